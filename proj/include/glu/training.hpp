#pragma once
// Loss composition, the two-stage optimization loop, run directories and
// finite-difference gradient checks.

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "glu/baselines.hpp"
#include "glu/dataio.hpp"
#include "glu/model.hpp"

namespace glu::training {

struct TrainConfig {
    double lr = 2e-3;
    double lr_min_frac = 0.05;
    double clip_norm = 1.0;
    std::size_t batch_size = 4;
    std::size_t steps_stage1 = 1500;
    std::size_t steps_stage2 = 1000;
    double lambda_nll = 0.1;
    double lambda_latent = 1.0;
    double lambda_decode = 1.0;
    std::size_t queries_per_step = 512;
    // Sensor count per sample: log-uniform integer in [sensors_min, sensors_max].
    std::size_t sensors_min = 64, sensors_max = 64;
    std::size_t stage2_sensors = 64;
    double sensor_noise = 0.0;
    std::uint64_t seed = 0;
    std::size_t checkpoint_every = 0;  // 0: final checkpoint only
    std::size_t log_every = 10;
    double divergence_threshold = 1e6;
    // false: the importance net is trained by its variational loss only and
    // phi enters the decoder as a constant during stage 1.
    bool phi_recon_grad = false;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

/// Named loss components plus the optimized total.
struct LossBreakdown {
    ad::Var total;
    std::map<std::string, double> components;  // raw term values
    std::map<std::string, double> weighted;    // contribution of each term to total
};

struct Stage1Sample {
    sensing::SensorSet sensors;
    Mat queries;  // [n_q, n_d]
    Mat targets;  // [n_q, n_c]
};

/// MSE(mean, u) + lambda_nll NLL(log_var | detached mean) + L_phi (adaptive mode only).
/// Unless cfg.phi_recon_grad is set, MSE and NLL do not reach the importance net.
LossBreakdown loss_stage1(ad::Tape& t, GluModel& model, const Stage1Sample& s, const TrainConfig& cfg, Rng& rng,
                          bool analytic_expectation = false);

/// Throws NumericalError naming the first non-finite component.
void check_finite(const LossBreakdown& l);

Stage1Sample draw_stage1_sample(const dataio::FieldDataset& ds, const std::vector<std::size_t>& cases,
                                const TrainConfig& cfg, std::uint64_t stream);

struct LogRow {
    std::size_t step = 0;
    double lr = 0.0, grad_norm = 0.0, total = 0.0;
    std::map<std::string, double> components;
};

struct TrainReport {
    std::vector<LogRow> log;
    std::size_t steps = 0;
    bool diverged = false;
    std::string diagnostics;
    double seconds = 0.0;
};

/// Called after each logged step and at each checkpoint (step, final?).
using CheckpointFn = std::function<void(std::size_t step, bool final)>;

TrainReport train_stage1(GluModel& model, const dataio::FieldDataset& ds, const std::vector<std::size_t>& train_cases,
                         const TrainConfig& cfg, const CheckpointFn& on_checkpoint = {});

/// A trajectory encoded with fixed sensors by a (frozen) reconstruction model.
struct EncodedTrajectory {
    std::size_t case_index = 0;
    std::size_t t_begin = 0;
    sensing::SensorSet sensors;  // coordinates of the fixed sensors (values of frame 0)
    Mat phi;                     // [N, 1]
    std::vector<LatentState> states;
};

EncodedTrajectory encode_trajectory(GluModel& model, const dataio::FieldDataset& ds, std::size_t case_index,
                                    const std::vector<std::size_t>& indices, std::size_t t_begin, std::size_t t_end);

/// lambda_latent MSE(S_hat, S) + lambda_decode MSE(decoded next frame) for
/// one teacher-forced window ending at frame `t` (predicting t + 1). Every
/// window position is supervised, each from its own prefix of the history.
LossBreakdown loss_stage2(ad::Tape& t, Propagator& prop, GluModel& model, const EncodedTrajectory& traj,
                          const dataio::FieldDataset& ds, std::size_t t_end, const TrainConfig& cfg, Rng& rng);

TrainReport train_stage2(Propagator& prop, GluModel& model, const dataio::FieldDataset& ds,
                         const std::vector<std::size_t>& train_cases, const TrainConfig& cfg,
                         const CheckpointFn& on_checkpoint = {});

/// Central-difference check of d(build)/d(params). Returns the largest
/// |analytic - numeric| / max(|analytic|, |numeric|, floor) over up to
/// `per_param` randomly chosen entries of every parameter.
struct GradCheckResult {
    double max_rel = 0.0;
    std::string worst_param;
    std::size_t checked = 0;
};
GradCheckResult grad_check(const std::function<ad::Var(ad::Tape&)>& build, const ParamList& params,
                           std::size_t per_param = 6, double step = 1e-5, double floor = 1e-4,
                           std::uint64_t seed = 0);

/// Run directory: config.json snapshot, loss.csv, checkpoints/, metrics.json.
class RunDir {
public:
    explicit RunDir(std::filesystem::path root);
    const std::filesystem::path& path() const { return root_; }
    void write_config(const nlohmann::json& cfg) const;
    void write_loss_csv(const std::string& name, const TrainReport& r) const;
    void write_json(const std::string& name, const nlohmann::json& j) const;
    std::filesystem::path checkpoint(const std::string& name) const { return root_ / "checkpoints" / name; }

private:
    std::filesystem::path root_;
};

}  // namespace glu::training
