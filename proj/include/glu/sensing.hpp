#pragma once
// Sparse sensor sets and forecasting tasks drawn from a FieldDataset.

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "glu/dataio.hpp"
#include "glu/tensor.hpp"

namespace glu::sensing {

struct SensorSet {
    std::vector<std::size_t> indices;  // into dataset points, ascending
    Mat x;                             // [N, n_d]
    Mat u;                             // [N, n_c], normalized units
    std::size_t case_index = 0;
    std::size_t t_index = 0;

    std::size_t size() const { return indices.size(); }
};

/// Uniform sample of N distinct point indices, sorted ascending.
std::vector<std::size_t> sample_sensors(std::size_t n_p, std::size_t n, std::uint64_t seed);

inline double coverage(std::size_t n, std::size_t n_p) { return double(n) / double(n_p); }

/// Gathers coordinates and values. A positive `noise_std` adds Gaussian
/// noise to the values from a stream derived from `noise_seed`.
SensorSet make_observation(const dataio::FieldDataset& ds, std::size_t case_index, std::size_t t,
                           const std::vector<std::size_t>& indices, double noise_std = 0.0,
                           std::uint64_t noise_seed = 0);

/// All points of one snapshot as a [n_p, n_c] matrix.
Mat full_frame(const dataio::FieldDataset& ds, std::size_t case_index, std::size_t t);
/// All coordinates as a [n_p, n_d] matrix.
Mat all_coords(const dataio::FieldDataset& ds);

struct ForecastTask {
    std::size_t case_index = 0, t0 = 0, n_obs = 16, horizon = 0;
    std::vector<std::size_t> indices;
    std::uint64_t seed = 0;
    std::vector<SensorSet> window;   // frames t0 .. t0+n_obs-1
    Mat last_observed;               // full truth at t0+n_obs-1
    std::vector<Mat> future;         // full truth at t0+n_obs .. t0+n_obs+horizon-1

    nlohmann::json to_json() const;
};

/// Requires t0 + n_obs + horizon <= n_t; the error message states the
/// largest admissible horizon otherwise.
ForecastTask make_forecast_task(const dataio::FieldDataset& ds, std::size_t case_index, std::size_t t0,
                                std::size_t n_obs, std::size_t horizon, const std::vector<std::size_t>& indices,
                                std::uint64_t seed = 0);
ForecastTask forecast_task_from_json(const dataio::FieldDataset& ds, const nlohmann::json& j);

}  // namespace glu::sensing
