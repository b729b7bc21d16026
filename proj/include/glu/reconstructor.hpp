#pragma once
// Importance-warped top-K neighbor selection, soft aggregation of sensor
// tokens and the fused mean / log-variance decoder.

#include <span>
#include <vector>

#include <json.hpp>

#include "glu/encoder.hpp"

namespace glu {

/// ||y - x|| / (phi^gamma + eps) for one sensor.
double warped_distance(std::span<const double> y, std::span<const double> x, double phi, double gamma, double eps);

/// Selected neighbors for a batch of queries. Per query, k = min(K, N)
/// indices ordered by ascending warped distance, ties by ascending index.
struct Neighbors {
    std::size_t n_q = 0, k = 0;
    std::vector<std::size_t> idx;  // [n_q, k]
    std::vector<double> dist;      // warped distance, [n_q, k]
    std::vector<double> geo;       // Euclidean distance, [n_q, k]
};

Neighbors select_neighbors(const Mat& queries, const Mat& sensor_x, std::span<const double> phi, std::size_t K,
                           double gamma, double eps);

/// f_j = sum_i w_ij phi_i proj_i over the selected set, with
/// w_ij = softmax_i(-d_phi(y_j, x_i) / sigma_i). Differentiable in `proj`
/// and `phi` for fixed selection. `sigma` holds one bandwidth per sensor.
/// When `weights_out` is given it receives the softmax weights [n_q, k].
ad::Var knn_aggregate(ad::Var proj, ad::Var phi, const Neighbors& nb, std::span<const double> sigma, double gamma,
                      double eps, std::vector<double>* weights_out = nullptr);

enum class DecoderMode { adaptive, uniform, global_only };
const char* to_string(DecoderMode m);
DecoderMode parse_decoder_mode(const std::string& s);

struct ReconstructorConfig {
    std::size_t K = 8;
    double sigma = 0.05;
    double gamma = 1.0;
    double eps = 1e-6;
    std::size_t hidden = 64;
    double log_var_min = -10.0, log_var_max = 10.0;
    std::vector<double> sigma_per_sensor;  // optional override, one per sensor

    void validate() const;
    nlohmann::json to_json() const;
    static ReconstructorConfig from_json(const nlohmann::json& j);
};

struct DecodeVars {
    ad::Var mean;     // [n_q, n_c]
    ad::Var log_var;  // [n_q, n_c], clamped
    Neighbors neighbors;
    std::vector<double> weights;
};

/// Plain-value reconstruction result.
struct ReconstructionOutput {
    Mat mean, log_var;
    std::size_t k = 0;
    std::vector<std::size_t> neighbors;  // [n_q, k] sensor-set positions
    std::vector<double> weights;         // [n_q, k]
};

class Reconstructor {
public:
    Reconstructor() = default;
    Reconstructor(const ReconstructorConfig& cfg, const EncoderConfig& enc, Rng& rng);

    const ReconstructorConfig& config() const { return cfg_; }

    /// `phi` is the [N, 1] importance at the sensors (ones for uniform mode,
    /// unused for global-only). A non-null `fixed` bypasses selection.
    DecodeVars decode(ad::Tape& t, Encoder& enc, const LatentVars& lat, ad::Var phi, const Mat& sensor_x,
                      const Mat& queries, DecoderMode mode, const Neighbors* fixed = nullptr);

    /// Fusion and heads applied to an already aggregated local feature f [n_q, D].
    std::pair<ad::Var, ad::Var> fuse(ad::Tape& t, ad::Var f_plus_p, ad::Var z_global);

    void collect(ParamList& out);

    nn::Linear proj, fuse1, fuse2, head_mean, head_log_var;

private:
    ReconstructorConfig cfg_;
};

}  // namespace glu
