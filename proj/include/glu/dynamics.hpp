#pragma once
// Latent propagation: the Leader-Follower-Dynamics derivative with an
// explicit Euler step, plus autoregressive rollout shared by all propagators.

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "glu/nn.hpp"

namespace glu {

/// One latent frame S_t = (z_global [1, D], Z_local [N, D]).
struct LatentState {
    Mat z_global;
    Mat z_local;
};

enum class PoolMode { mean, max };

/// Temporal pooling of same-shaped states; throws on an empty window.
ad::Var pool_history(std::span<const ad::Var> states, PoolMode mode = PoolMode::mean);
Mat pool_history(std::span<const Mat> states, PoolMode mode = PoolMode::mean);

/// S + dt F, for tape variables and for plain values.
ad::Var euler_step(ad::Var s, ad::Var f, double dt);
Mat euler_step(const Mat& s, const Mat& f, double dt);

/// Derivative prediction for the next frame from a history window
/// (oldest first). `phi` is the [N, 1] sensor importance.
struct StepVars {
    ad::Var z_global, z_local;  // S_{t+1}
    ad::Var f_global, f_local;  // F
};

class Propagator {
public:
    virtual ~Propagator() = default;
    virtual std::size_t window() const = 0;
    virtual double dt() const = 0;
    virtual StepVars step(ad::Tape& t, std::span<const ad::Var> g_hist, std::span<const ad::Var> z_hist,
                          const Mat& phi) = 0;
    virtual ParamList params() = 0;
    virtual std::string name() const = 0;
};

struct LfdConfig {
    std::size_t width = 64;
    std::size_t window = 16;
    double dt = 1.0;
    std::size_t heads = 1;
    std::size_t hidden = 128;
    double bias_floor = -30.0;
    PoolMode pool = PoolMode::mean;
    bool pre_norm = true;  // LayerNorm on the leader and follower inputs
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static LfdConfig from_json(const nlohmann::json& j);
};

class Lfd final : public Propagator {
public:
    explicit Lfd(const LfdConfig& cfg);
    Lfd(const Lfd&) = delete;
    Lfd& operator=(const Lfd&) = delete;

    const LfdConfig& config() const { return cfg_; }
    std::size_t window() const override { return cfg_.window; }
    double dt() const override { return cfg_.dt; }
    std::string name() const override { return "lfd"; }

    /// Leader derivative [1, D]: self-attention over the history plus
    /// phi-biased cross-attention to the pooled followers, last row, FFN.
    ad::Var leader_update(ad::Tape& t, ad::Var g_hist, ad::Var z_pooled, const Mat& phi);
    /// Follower derivatives [N, D]: each token attends only to the leader history.
    ad::Var follower_update(ad::Tape& t, ad::Var z_pooled, ad::Var g_hist);

    StepVars step(ad::Tape& t, std::span<const ad::Var> g_hist, std::span<const ad::Var> z_hist,
                  const Mat& phi) override;
    ParamList params() override;
    void save(const std::filesystem::path& dir, const std::string& tag);
    void load(const std::filesystem::path& dir);

    nn::LayerNorm ln_leader, ln_follower;
    nn::Attention leader_self, leader_cross, follower_cross;
    nn::Mlp leader_ffn, follower_ffn;

private:
    LfdConfig cfg_;
};

/// ln(phi) clamped below at `floor`, as a [1, N] key bias.
Mat log_phi_bias(const Mat& phi, double floor);

struct LatentTrajectory {
    Mat leaders;                   // [T, D]
    std::vector<Mat> followers;    // T entries of [N, D]
    std::vector<double> leader_rms, follower_rms;
    long diverged_at = -1;         // first non-finite step index, -1 if none
    std::size_t n_initial = 0;     // frames taken from the observed window

    std::size_t size() const { return followers.size(); }
};

/// H autoregressive steps from an observed window. The history fed to each
/// step is the most recent min(window, available) frames. Stops early at the
/// first non-finite state.
LatentTrajectory rollout(Propagator& prop, const std::vector<LatentState>& window, const Mat& phi, std::size_t horizon);

}  // namespace glu
