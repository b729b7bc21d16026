#include "glu/sensing.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

#include "glu/nn.hpp"

namespace glu::sensing {

std::vector<std::size_t> sample_sensors(std::size_t n_p, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_sensors: need at least one sensor");
    if (n > n_p)
        throw std::invalid_argument("sample_sensors: N=" + std::to_string(n) + " exceeds n_p=" + std::to_string(n_p));
    std::vector<std::size_t> perm(n_p);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    // Partial Fisher-Yates: the first n slots become a uniform n-subset.
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + std::size_t(rng() % (n_p - i));
        std::swap(perm[i], perm[j]);
    }
    perm.resize(n);
    std::sort(perm.begin(), perm.end());
    return perm;
}

SensorSet make_observation(const dataio::FieldDataset& ds, std::size_t case_index, std::size_t t,
                           const std::vector<std::size_t>& indices, double noise_std, std::uint64_t noise_seed) {
    if (case_index >= ds.n_cases) throw std::out_of_range("make_observation: case index out of range");
    if (t >= ds.n_t) throw std::out_of_range("make_observation: time index out of range");
    if (indices.empty()) throw std::invalid_argument("make_observation: empty sensor set");
    SensorSet s;
    s.indices = indices;
    s.case_index = case_index;
    s.t_index = t;
    s.x = Mat(indices.size(), ds.n_d);
    s.u = Mat(indices.size(), ds.n_c);
    Rng rng(derive_seed(noise_seed, case_index, t));
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::size_t p = indices[i];
        if (p >= ds.n_p) throw std::out_of_range("make_observation: sensor index " + std::to_string(p) + " out of range");
        for (std::size_t d = 0; d < ds.n_d; ++d) s.x(i, d) = ds.coord(p, d);
        for (std::size_t c = 0; c < ds.n_c; ++c) {
            s.u(i, c) = ds.at(case_index, t, p, c);
            if (noise_std > 0.0) s.u(i, c) += noise_std * noise(rng);
        }
    }
    return s;
}

Mat full_frame(const dataio::FieldDataset& ds, std::size_t case_index, std::size_t t) {
    Mat m(ds.n_p, ds.n_c);
    const float* src = ds.fields.data() + ds.index(case_index, t, 0, 0);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = src[i];
    return m;
}

Mat all_coords(const dataio::FieldDataset& ds) {
    Mat m(ds.n_p, ds.n_d);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = ds.coords[i];
    return m;
}

nlohmann::json ForecastTask::to_json() const {
    return {{"case", case_index}, {"t0", t0}, {"n_obs", n_obs}, {"horizon", horizon}, {"indices", indices}, {"seed", seed}};
}

ForecastTask make_forecast_task(const dataio::FieldDataset& ds, std::size_t case_index, std::size_t t0,
                                std::size_t n_obs, std::size_t horizon, const std::vector<std::size_t>& indices,
                                std::uint64_t seed) {
    if (n_obs < 1) throw std::invalid_argument("make_forecast_task: n_obs must be >= 1");
    if (t0 + n_obs > ds.n_t) throw std::invalid_argument("make_forecast_task: observation window overruns trajectory");
    if (t0 + n_obs + horizon > ds.n_t)
        throw std::invalid_argument("make_forecast_task: horizon " + std::to_string(horizon) +
                                    " overruns trajectory; max admissible H = " + std::to_string(ds.n_t - t0 - n_obs));
    ForecastTask task;
    task.case_index = case_index;
    task.t0 = t0;
    task.n_obs = n_obs;
    task.horizon = horizon;
    task.indices = indices;
    task.seed = seed;
    for (std::size_t k = 0; k < n_obs; ++k) task.window.push_back(make_observation(ds, case_index, t0 + k, indices));
    task.last_observed = full_frame(ds, case_index, t0 + n_obs - 1);
    for (std::size_t h = 0; h < horizon; ++h) task.future.push_back(full_frame(ds, case_index, t0 + n_obs + h));
    return task;
}

ForecastTask forecast_task_from_json(const dataio::FieldDataset& ds, const nlohmann::json& j) {
    return make_forecast_task(ds, j.at("case").get<std::size_t>(), j.at("t0").get<std::size_t>(),
                              j.value("n_obs", std::size_t(16)), j.at("horizon").get<std::size_t>(),
                              j.at("indices").get<std::vector<std::size_t>>(), j.value("seed", std::uint64_t(0)));
}

}  // namespace glu::sensing
