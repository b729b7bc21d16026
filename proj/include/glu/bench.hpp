#pragma once
// Closed-form work accounting for the encoder, decoder and propagators.
// Counts are exact functions of the configuration; they stand in for
// device memory, which is not measured.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace glu::bench {

struct CostConfig {
    std::uint64_t n_sensors = 64;  // N
    std::uint64_t latents = 16;    // S
    std::uint64_t width = 64;      // D
    std::uint64_t k = 8;           // K
    std::uint64_t window = 16;     // w
    std::uint64_t n_query = 1024;  // n_q
    std::uint64_t n_ref = 256;     // latent array size of the dense reference
    std::uint64_t heads = 1;
    std::uint64_t blocks = 2;
    std::uint64_t hidden = 64;
    std::uint64_t n_freq = 32;
    std::uint64_t n_d = 2;
    std::uint64_t n_c = 1;

    nlohmann::json to_json() const;
};

struct CostReport {
    std::string component;  // encoder | decoder | dense_reference | lfd | causal
    CostConfig config;
    std::uint64_t attention_scores = 0;
    std::uint64_t macs = 0;
    std::uint64_t peak_live = 0;
    std::uint64_t selection = 0;    // decoder only: distance evaluations
    std::uint64_t aggregation = 0;  // decoder only: (query, neighbor) terms
};

CostReport count_encoder_cost(const CostConfig& c);
CostReport count_decode_cost(const CostConfig& c);
CostReport count_dense_reference_cost(const CostConfig& c);
CostReport count_lfd_cost(const CostConfig& c);
CostReport count_causal_cost(const CostConfig& c);

struct SlopeFit {
    double slope = 0.0, intercept = 0.0;
    double ci_low = 0.0, ci_high = 0.0;  // 95%
    double r2 = 0.0;
    std::size_t n = 0;
};

/// Ordinary least squares of y on x with a t-based 95% interval on the slope.
SlopeFit fit_line(const std::vector<double>& x, const std::vector<double>& y);
/// Same fit in log-log coordinates.
SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

struct SweepGrid {
    CostConfig base;
    std::vector<std::uint64_t> sensors{64, 128, 256, 512, 1024, 2048, 4096};
    std::vector<std::uint64_t> queries{256, 1024, 4096, 16384};
    std::vector<std::uint64_t> ks{4, 8, 16, 32, 64};
    std::vector<std::uint64_t> windows{4, 8, 16, 32};

    static SweepGrid from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct SweepResult {
    std::vector<CostReport> rows;
    nlohmann::json summary;
};

SweepResult sweep(const SweepGrid& grid);

std::string csv_header();
std::string csv_row(const CostReport& r);
void write_csv(const std::string& path, const std::vector<CostReport>& rows);

}  // namespace glu::bench
