#pragma once
// Test-set evaluation of reconstruction and forecasting, plus the array
// exports used for plotting.

#include <filesystem>
#include <memory>
#include <vector>

#include <json.hpp>

#include "glu/baselines.hpp"
#include "glu/dataio.hpp"
#include "glu/dynamics.hpp"
#include "glu/model.hpp"
#include "glu/sensing.hpp"

namespace glu::eval {

/// Fixed per-case sensor layout used by every evaluation: sample_sensors
/// seeded from (seed, case).
std::vector<std::size_t> eval_sensors(const dataio::FieldDataset& ds, std::size_t case_index, std::size_t n,
                                      std::uint64_t seed);

/// Frame-wise relative L2 in physical (denormalized) units.
double frame_rel_l2(const dataio::FieldDataset& ds, const Mat& pred, const Mat& truth);

struct ReconMetrics {
    double mean = 0.0, stddev = 0.0;
    std::vector<double> per_frame;
    nlohmann::json to_json() const;
};

ReconMetrics evaluate_reconstruction(GluModel& model, const dataio::FieldDataset& ds,
                                     const std::vector<std::size_t>& cases, std::size_t n_sensors,
                                     std::uint64_t sensor_seed, std::size_t frame_stride = 1);

/// POD-GPR trained on the train cases with one fixed sensor layout.
ReconMetrics evaluate_pod_gpr(const dataio::FieldDataset& ds, const std::vector<std::size_t>& train,
                              const std::vector<std::size_t>& test, std::size_t n_sensors, std::size_t rank,
                              std::uint64_t sensor_seed, std::size_t frame_stride = 1);

/// phi_bar at every dataset point (ones for non-adaptive variants).
std::vector<double> importance_map(GluModel& model, const dataio::FieldDataset& ds);
double coefficient_of_variation(const std::vector<double>& v);

struct ForecastResult {
    LatentTrajectory trajectory;
    std::vector<double> rel_l2;     // per forecast step
    std::size_t divergence_step = 0;  // first step that is non-finite or has rel L2 > 1
    bool diverged = false;            // false: divergence_step == horizon (censored)
    std::vector<Mat> predictions;     // normalized units, kept on request
    nlohmann::json to_json() const;
};

ForecastResult forecast(GluModel& model, Propagator& prop, const dataio::FieldDataset& ds,
                        const sensing::ForecastTask& task, bool keep_predictions = false);

std::unique_ptr<Propagator> load_propagator(const std::filesystem::path& dir);

void dump_reconstruction(const std::filesystem::path& dir, GluModel& model, const dataio::FieldDataset& ds,
                         const sensing::SensorSet& s);
void dump_trajectory(const std::filesystem::path& dir, const ForecastResult& r);
void dump_importance(const std::filesystem::path& dir, const dataio::FieldDataset& ds, const std::vector<double>& phi);

}  // namespace glu::eval
