#include "glu/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "glu/errors.hpp"
#include "glu/metrics.hpp"

namespace glu::eval {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<std::size_t> eval_sensors(const dataio::FieldDataset& ds, std::size_t case_index, std::size_t n,
                                      std::uint64_t seed) {
    return sensing::sample_sensors(ds.n_p, n, derive_seed(seed, 0x5e45, case_index));
}

double frame_rel_l2(const dataio::FieldDataset& ds, const Mat& pred, const Mat& truth) {
    require_shape(pred, truth.rows(), truth.cols(), "frame_rel_l2");
    std::vector<double> p(pred.size()), t(truth.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const std::size_t ch = i % ds.n_c;
        p[i] = ds.normalized ? dataio::denormalize(pred[i], ds.norm, ch) : pred[i];
        t[i] = ds.normalized ? dataio::denormalize(truth[i], ds.norm, ch) : truth[i];
    }
    return metrics::rel_l2(p, t);
}

namespace {

void summarize(ReconMetrics& m) {
    if (m.per_frame.empty()) throw std::invalid_argument("evaluation produced no frames");
    double s = 0, s2 = 0;
    for (double v : m.per_frame) s += v, s2 += v * v;
    const double n = double(m.per_frame.size());
    m.mean = s / n;
    m.stddev = std::sqrt(std::max(0.0, s2 / n - m.mean * m.mean));
}

}  // namespace

json ReconMetrics::to_json() const {
    return {{"rel_l2_mean", mean}, {"rel_l2_std", stddev}, {"frames", per_frame.size()}};
}

ReconMetrics evaluate_reconstruction(GluModel& model, const dataio::FieldDataset& ds,
                                     const std::vector<std::size_t>& cases, std::size_t n_sensors,
                                     std::uint64_t sensor_seed, std::size_t frame_stride) {
    if (frame_stride == 0) throw std::invalid_argument("frame_stride must be >= 1");
    const Mat queries = sensing::all_coords(ds);
    ReconMetrics m;
    for (std::size_t c : cases) {
        const auto idx = eval_sensors(ds, c, n_sensors, sensor_seed);
        for (std::size_t t = 0; t < ds.n_t; t += frame_stride) {
            const auto s = sensing::make_observation(ds, c, t, idx);
            const auto out = model.reconstruct(s, queries);
            m.per_frame.push_back(frame_rel_l2(ds, out.mean, sensing::full_frame(ds, c, t)));
        }
    }
    summarize(m);
    return m;
}

ReconMetrics evaluate_pod_gpr(const dataio::FieldDataset& ds, const std::vector<std::size_t>& train,
                              const std::vector<std::size_t>& test, std::size_t n_sensors, std::size_t rank,
                              std::uint64_t sensor_seed, std::size_t frame_stride) {
    if (frame_stride == 0) throw std::invalid_argument("frame_stride must be >= 1");
    const auto idx = sensing::sample_sensors(ds.n_p, n_sensors, derive_seed(sensor_seed, 0x90d));
    const std::size_t dim = ds.n_p * ds.n_c;
    auto snapshot = [&](std::size_t c, std::size_t t) {
        Eigen::VectorXd v(dim);
        for (std::size_t i = 0; i < dim; ++i) v[i] = ds.fields[ds.index(c, t, 0, 0) + i];
        return v;
    };
    auto readings = [&](std::size_t c, std::size_t t) {
        Eigen::VectorXd v(idx.size() * ds.n_c);
        for (std::size_t k = 0; k < idx.size(); ++k)
            for (std::size_t ch = 0; ch < ds.n_c; ++ch) v[k * ds.n_c + ch] = ds.at(c, t, idx[k], ch);
        return v;
    };
    std::vector<std::pair<std::size_t, std::size_t>> frames;
    for (std::size_t c : train)
        for (std::size_t t = 0; t < ds.n_t; t += frame_stride) frames.emplace_back(c, t);
    Eigen::MatrixXd snaps(frames.size(), dim), inputs(frames.size(), idx.size() * ds.n_c);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        snaps.row(i) = snapshot(frames[i].first, frames[i].second).transpose();
        inputs.row(i) = readings(frames[i].first, frames[i].second).transpose();
    }
    const PodBasis basis = pod_fit(snaps, std::min(rank, frames.size()));
    const PodGpr gpr = pod_gpr_fit(basis, snaps, inputs);
    ReconMetrics m;
    for (std::size_t c : test)
        for (std::size_t t = 0; t < ds.n_t; t += frame_stride) {
            const Eigen::VectorXd rec = gpr.reconstruct(readings(c, t));
            Mat pred(ds.n_p, ds.n_c, std::vector<double>(rec.data(), rec.data() + rec.size()));
            m.per_frame.push_back(frame_rel_l2(ds, pred, sensing::full_frame(ds, c, t)));
        }
    summarize(m);
    return m;
}

std::vector<double> importance_map(GluModel& model, const dataio::FieldDataset& ds) {
    const Mat x = sensing::all_coords(ds);
    ad::Tape t(false);
    const Mat phi = model.sensor_phi(t, x).value();
    return phi.vec();
}

double coefficient_of_variation(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("coefficient_of_variation: empty input");
    double s = 0, s2 = 0;
    for (double x : v) s += x, s2 += x * x;
    const double m = s / double(v.size());
    return std::sqrt(std::max(0.0, s2 / double(v.size()) - m * m)) / std::abs(m);
}

json ForecastResult::to_json() const {
    return {{"rel_l2", rel_l2},
            {"divergence_step", divergence_step},
            {"diverged", diverged},
            {"latent_diverged_at", trajectory.diverged_at},
            {"leader_rms", trajectory.leader_rms},
            {"follower_rms", trajectory.follower_rms}};
}

ForecastResult forecast(GluModel& model, Propagator& prop, const dataio::FieldDataset& ds,
                        const sensing::ForecastTask& task, bool keep_predictions) {
    if (task.window.empty()) throw std::invalid_argument("forecast: empty observation window");
    std::vector<LatentState> window;
    Mat phi;
    {
        ad::Tape t(false);
        phi = model.sensor_phi(t, task.window.front().x).value();
        for (const auto& s : task.window) {
            LatentVars lat = model.encoder(t, s);
            window.push_back({lat.z_global.value(), lat.z_local.value()});
        }
    }
    ForecastResult r;
    r.trajectory = rollout(prop, window, phi, task.horizon);
    const Mat queries = sensing::all_coords(ds);
    const Mat& sx = task.window.front().x;
    r.divergence_step = task.horizon;
    for (std::size_t h = 0; h < task.horizon; ++h) {
        const std::size_t k = r.trajectory.n_initial + h;
        double err = INFINITY;
        Mat pred;
        if (k < r.trajectory.size()) {
            pred = Mat(ds.n_p, ds.n_c);
            const std::size_t chunk = 1024;
            for (std::size_t q0 = 0; q0 < ds.n_p; q0 += chunk) {
                const std::size_t q1 = std::min(ds.n_p, q0 + chunk);
                Mat qc(q1 - q0, ds.n_d);
                std::copy_n(queries.row(q0).data(), qc.size(), qc.data());
                ad::Tape t(false);
                Mat zg(1, r.trajectory.leaders.cols());
                std::copy_n(r.trajectory.leaders.row(k).data(), zg.size(), zg.data());
                LatentVars lat{t.constant(zg), t.constant(r.trajectory.followers[k])};
                DecodeVars d = model.decode(t, lat, t.constant(phi), sx, qc);
                std::copy_n(d.mean.value().data(), d.mean.value().size(), pred.row(q0).data());
            }
            err = frame_rel_l2(ds, pred, task.future[h]);
            if (!std::isfinite(err)) err = INFINITY;
        }
        r.rel_l2.push_back(err);
        if (!r.diverged && !(err <= 1.0)) {
            r.diverged = true;
            r.divergence_step = h + 1;
        }
        if (keep_predictions) r.predictions.push_back(std::move(pred));
    }
    return r;
}

std::unique_ptr<Propagator> load_propagator(const fs::path& dir) {
    const fs::path p = dir / "dynamics_config.json";
    if (!fs::exists(p)) throw NotFoundError("propagator config not found: " + p.string());
    json j;
    try {
        std::ifstream f(p);
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw FormatError("corrupt " + p.string() + ": " + e.what());
    }
    const std::string kind = j.value("kind", "");
    if (kind == "lfd") {
        auto m = std::make_unique<Lfd>(LfdConfig::from_json(j.at("config")));
        m->load(dir);
        return m;
    }
    if (kind == "causal_transformer") {
        auto m = std::make_unique<CausalTransformer>(CausalConfig::from_json(j.at("config")));
        m->load(dir);
        return m;
    }
    throw FormatError("unknown propagator kind '" + kind + "' in " + p.string());
}

namespace {

std::vector<float> to_f32(const std::vector<double>& v) { return {v.begin(), v.end()}; }

}  // namespace

void dump_reconstruction(const fs::path& dir, GluModel& model, const dataio::FieldDataset& ds,
                         const sensing::SensorSet& s) {
    const Mat queries = sensing::all_coords(ds);
    const auto out = model.reconstruct(s, queries);
    const Mat truth = sensing::full_frame(ds, s.case_index, s.t_index);
    std::vector<float> nb(out.neighbors.begin(), out.neighbors.end()), sidx(s.indices.begin(), s.indices.end());
    dataio::save_arrays(dir, "reconstruction",
                        {{"queries", {{queries.rows(), queries.cols()}, to_f32(queries.vec())}},
                         {"mean", {{out.mean.rows(), out.mean.cols()}, to_f32(out.mean.vec())}},
                         {"log_var", {{out.log_var.rows(), out.log_var.cols()}, to_f32(out.log_var.vec())}},
                         {"truth", {{truth.rows(), truth.cols()}, to_f32(truth.vec())}},
                         {"neighbors", {{queries.rows(), out.k}, nb}},
                         {"weights", {{queries.rows(), out.k}, to_f32(out.weights)}},
                         {"sensor_indices", {{s.indices.size()}, sidx}}},
                        {{"case", s.case_index},
                         {"t", s.t_index},
                         {"mode", to_string(model.mode())},
                         {"rel_l2", frame_rel_l2(ds, out.mean, truth)}});
}

void dump_trajectory(const fs::path& dir, const ForecastResult& r) {
    const auto& tr = r.trajectory;
    std::vector<double> err(r.rel_l2.begin(), r.rel_l2.end());
    dataio::save_arrays(dir, "latent_trajectory",
                        {{"leaders", {{tr.leaders.rows(), tr.leaders.cols()}, to_f32(tr.leaders.vec())}},
                         {"leader_rms", {{tr.leader_rms.size()}, to_f32(tr.leader_rms)}},
                         {"follower_rms", {{tr.follower_rms.size()}, to_f32(tr.follower_rms)}},
                         {"rel_l2", {{err.size()}, to_f32(err)}}},
                        {{"n_initial", tr.n_initial}, {"divergence_step", r.divergence_step}, {"diverged", r.diverged}});
}

void dump_importance(const fs::path& dir, const dataio::FieldDataset& ds, const std::vector<double>& phi) {
    std::vector<std::size_t> shape = ds.grid_shape.empty() ? std::vector<std::size_t>{ds.n_p} : ds.grid_shape;
    dataio::save_arrays(dir, "importance_map", {{"phi_bar", {shape, to_f32(phi)}}},
                        {{"cv", coefficient_of_variation(phi)}});
}

}  // namespace glu::eval
