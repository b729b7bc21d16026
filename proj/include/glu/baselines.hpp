#pragma once
// Comparison models: a capacity-matched causal transformer propagator and
// POD with Gaussian-process regression. The uniform-kNN and global-only
// reconstruction ablations are GluModel decoder modes (see model.hpp).

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "glu/dynamics.hpp"

namespace glu {

struct CausalConfig {
    std::size_t width = 64;
    std::size_t window = 16;  // context in frames; older frames are dropped
    double dt = 1.0;
    std::size_t heads = 1;
    std::size_t hidden = 128;
    std::size_t blocks = 2;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static CausalConfig from_json(const nlohmann::json& j);
};

/// Dense attention over the flattened (N + 1) x T tokens of a history
/// window with a frame-causal mask; predicts a residual next state.
class CausalTransformer final : public Propagator {
public:
    explicit CausalTransformer(const CausalConfig& cfg);
    CausalTransformer(const CausalTransformer&) = delete;
    CausalTransformer& operator=(const CausalTransformer&) = delete;

    const CausalConfig& config() const { return cfg_; }
    std::size_t window() const override { return cfg_.window; }
    double dt() const override { return cfg_.dt; }
    std::string name() const override { return "causal_transformer"; }

    /// Output tokens for every frame of the window, [(N + 1) T, D], frame-major
    /// with the leader first in each frame.
    ad::Var encode_window(ad::Tape& t, std::span<const ad::Var> g_hist, std::span<const ad::Var> z_hist);
    /// Derivative predictions F for every window position (teacher forcing).
    std::vector<std::pair<ad::Var, ad::Var>> derivatives(ad::Tape& t, std::span<const ad::Var> g_hist,
                                                         std::span<const ad::Var> z_hist);

    StepVars step(ad::Tape& t, std::span<const ad::Var> g_hist, std::span<const ad::Var> z_hist,
                  const Mat& phi) override;
    ParamList params() override;
    void save(const std::filesystem::path& dir, const std::string& tag);
    void load(const std::filesystem::path& dir);

    Param frame_embed;  // [window, D]
    Param type_embed;   // [2, D]: leader, follower
    struct Block {
        nn::LayerNorm ln1, ln2;
        nn::Attention attn;
        nn::Mlp mlp;
    };
    std::vector<Block> blocks;
    nn::LayerNorm ln_out;
    nn::Linear head;

private:
    CausalConfig cfg_;
};

/// Frame-causal allow-list for T frames of `per_frame` tokens each.
std::vector<std::uint8_t> frame_causal_mask(std::size_t frames, std::size_t per_frame);

// -- POD-GPR --------------------------------------------------------------------

struct PodBasis {
    Eigen::MatrixXd modes;            // [n_features, r], orthonormal columns
    Eigen::VectorXd singular_values;  // all singular values, nonincreasing
    Eigen::VectorXd mean;             // [n_features]
    std::size_t rank = 0;

    double total_energy() const { return singular_values.squaredNorm(); }
    double retained_energy() const { return singular_values.head(Eigen::Index(rank)).squaredNorm(); }
    double discarded_energy() const { return total_energy() - retained_energy(); }
};

/// Snapshots as rows [n_snapshots, n_features]. Requires r <= n_snapshots.
PodBasis pod_fit(const Eigen::MatrixXd& snapshots, std::size_t r);
Eigen::VectorXd pod_project(const PodBasis& b, const Eigen::VectorXd& field);
Eigen::VectorXd pod_reconstruct(const PodBasis& b, const Eigen::VectorXd& coeffs);

struct GprOptions {
    double length_scale = 0.0;  // <= 0 selects the median pairwise input distance
    double noise = 1e-6;
};

/// Squared-exponential Gaussian process from sensor readings to modal coefficients.
struct PodGpr {
    PodBasis basis;
    Eigen::MatrixXd train_inputs;  // [n_train, n_in]
    Eigen::MatrixXd alpha;         // (K + noise I)^-1 A, [n_train, r]
    double length_scale = 1.0;
    double noise = 1e-6;
    double jitter = 0.0;           // extra diagonal added to reach a factorization
    std::vector<std::string> log;

    Eigen::VectorXd predict_coeffs(const Eigen::VectorXd& input) const;
    Eigen::VectorXd reconstruct(const Eigen::VectorXd& input) const;
};

/// `inputs` are the sensor readings of each training snapshot [n_train, n_in];
/// the targets are the basis coefficients of `snapshots`.
PodGpr pod_gpr_fit(const PodBasis& basis, const Eigen::MatrixXd& snapshots, const Eigen::MatrixXd& inputs,
                   const GprOptions& opt = {});

}  // namespace glu
