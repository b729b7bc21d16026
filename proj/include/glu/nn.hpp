#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "glu/autodiff.hpp"

namespace glu {

using ParamList = std::vector<Param*>;

// splitmix64 finalizer; mixes a base seed with stream identifiers so that
// per-case / per-step streams are independent of evaluation order.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

using Rng = std::mt19937_64;

/// Counters incremented by the instrumented forward ops. Thread-local.
struct OpCounters {
    std::uint64_t attention_scores = 0;   // query x key logits materialized
    std::uint64_t aggregation_terms = 0;  // (query, neighbor) pairs aggregated
    std::uint64_t peak_live_elements = 0; // max of live decode intermediates
    void reset() { *this = OpCounters{}; }
};
OpCounters& op_counters();

namespace nn {

Mat xavier(std::size_t fan_in, std::size_t fan_out, Rng& rng, double gain = 1.0);
Mat gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng);

struct Linear {
    Param w, b;
    Linear() = default;
    Linear(std::string name, std::size_t in, std::size_t out, Rng& rng, double gain = 1.0);
    ad::Var operator()(ad::Tape& t, ad::Var x);
    void collect(ParamList& out) { out.push_back(&w), out.push_back(&b); }
    void zero_init();
};

struct LayerNorm {
    Param gain, bias;
    double eps = 1e-5;
    LayerNorm() = default;
    LayerNorm(std::string name, std::size_t width, double eps = 1e-5);
    ad::Var operator()(ad::Tape& t, ad::Var x);
    void collect(ParamList& out) { out.push_back(&gain), out.push_back(&bias); }
};

struct Mlp {
    Linear in, out;
    Mlp() = default;
    Mlp(std::string name, std::size_t width_in, std::size_t hidden, std::size_t width_out, Rng& rng);
    ad::Var operator()(ad::Tape& t, ad::Var x);
    void collect(ParamList& o) { in.collect(o), out.collect(o); }
};

/// Scaled dot-product attention with learned Q/K/V/O projections.
/// Single head when heads == 1; `width` must be divisible by `heads`.
struct Attention {
    Linear q, k, v, o;
    std::size_t heads = 1;
    Attention() = default;
    Attention(std::string name, std::size_t width, std::size_t heads, Rng& rng);

    // key_bias: optional [1, n_keys] additive logit bias (same for every
    // query). mask: optional [n_q * n_keys] allow-list.
    ad::Var operator()(ad::Tape& t, ad::Var queries, ad::Var keys_values, const Mat* key_bias = nullptr,
                       const std::vector<std::uint8_t>* mask = nullptr);
    void collect(ParamList& out) { q.collect(out), k.collect(out), v.collect(out), o.collect(out); }
};

std::size_t count_parameters(const ParamList& params);

}  // namespace nn

/// Adam with cosine-decayed learning rate.
class Adam {
public:
    struct Options {
        double lr = 1e-3;
        double lr_min_frac = 0.05;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double clip_norm = 1.0;  // <= 0 disables global-norm clipping
        std::size_t total_steps = 1000;
    };

    Adam(ParamList params, Options opt);
    double current_lr() const;
    // Applies one update from the accumulated Param::grad and zeroes them.
    // Returns the pre-clipping global gradient norm.
    double step(double grad_scale = 1.0);
    void zero_grad();
    std::size_t steps_taken() const { return t_; }

private:
    ParamList params_;
    Options opt_;
    std::vector<Mat> m_, v_;
    std::size_t t_ = 0;
};

// Checkpoints: one little-endian float64 file per parameter plus manifest.json.
void save_params(const std::filesystem::path& dir, const ParamList& params, const std::string& tag);
void load_params(const std::filesystem::path& dir, const ParamList& params);

}  // namespace glu
