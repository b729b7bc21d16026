#include "glu/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "glu/errors.hpp"

namespace glu::training {

using nlohmann::json;

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("train.lr", "must be > 0");
    if (!(lr_min_frac >= 0.0 && lr_min_frac <= 1.0)) throw ConfigError("train.lr_min_frac", "must be in [0,1]");
    if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
    if (!(lambda_nll >= 0.0)) throw ConfigError("train.lambda_nll", "must be >= 0");
    if (!(lambda_latent >= 0.0)) throw ConfigError("train.lambda_latent", "must be >= 0");
    if (!(lambda_decode >= 0.0)) throw ConfigError("train.lambda_decode", "must be >= 0");
    if (queries_per_step < 1) throw ConfigError("train.queries_per_step", "must be >= 1");
    if (sensors_min < 1 || sensors_max < sensors_min) throw ConfigError("train.sensors_min", "need 1 <= min <= max");
    if (stage2_sensors < 1) throw ConfigError("train.stage2_sensors", "must be >= 1");
    if (!(sensor_noise >= 0.0)) throw ConfigError("train.sensor_noise", "must be >= 0");
    if (log_every < 1) throw ConfigError("train.log_every", "must be >= 1");
}

json TrainConfig::to_json() const {
    return {{"lr", lr},
            {"lr_min_frac", lr_min_frac},
            {"clip_norm", clip_norm},
            {"batch_size", batch_size},
            {"steps_stage1", steps_stage1},
            {"steps_stage2", steps_stage2},
            {"lambda_nll", lambda_nll},
            {"lambda_latent", lambda_latent},
            {"lambda_decode", lambda_decode},
            {"queries_per_step", queries_per_step},
            {"sensors_min", sensors_min},
            {"sensors_max", sensors_max},
            {"stage2_sensors", stage2_sensors},
            {"sensor_noise", sensor_noise},
            {"seed", seed},
            {"checkpoint_every", checkpoint_every},
            {"log_every", log_every},
            {"divergence_threshold", divergence_threshold},
            {"phi_recon_grad", phi_recon_grad}};
}

TrainConfig TrainConfig::from_json(const json& j) {
    TrainConfig c;
    c.lr = j.value("lr", c.lr);
    c.lr_min_frac = j.value("lr_min_frac", c.lr_min_frac);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.steps_stage1 = j.value("steps_stage1", c.steps_stage1);
    c.steps_stage2 = j.value("steps_stage2", c.steps_stage2);
    c.lambda_nll = j.value("lambda_nll", c.lambda_nll);
    c.lambda_latent = j.value("lambda_latent", c.lambda_latent);
    c.lambda_decode = j.value("lambda_decode", c.lambda_decode);
    c.queries_per_step = j.value("queries_per_step", c.queries_per_step);
    c.sensors_min = j.value("sensors_min", c.sensors_min);
    c.sensors_max = j.value("sensors_max", c.sensors_max);
    c.stage2_sensors = j.value("stage2_sensors", c.stage2_sensors);
    c.sensor_noise = j.value("sensor_noise", c.sensor_noise);
    c.seed = j.value("seed", c.seed);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.log_every = j.value("log_every", c.log_every);
    c.divergence_threshold = j.value("divergence_threshold", c.divergence_threshold);
    c.phi_recon_grad = j.value("phi_recon_grad", c.phi_recon_grad);
    return c;
}

LossBreakdown loss_stage1(ad::Tape& t, GluModel& model, const Stage1Sample& s, const TrainConfig& cfg, Rng& rng,
                          bool analytic_expectation) {
    ForwardVars f;
    if (cfg.phi_recon_grad) {
        f = model.forward(t, s.sensors, s.queries);
    } else {
        f.latent = model.encoder(t, s.sensors);
        f.phi = t.constant(model.sensor_phi(t, s.sensors.x).value());
        f.out = model.decode(t, f.latent, f.phi, s.sensors.x, s.queries);
    }
    const Mat& mean = f.out.mean.value();
    require_shape(s.targets, mean.rows(), mean.cols(), "stage-1 targets");
    ad::Var target = t.constant(s.targets);
    ad::Var mse = ad::mse(f.out.mean, target);

    // Gaussian NLL with the mean held constant: 0.5 (log var + r^2 exp(-log var)).
    Mat r2(mean.rows(), mean.cols());
    for (std::size_t i = 0; i < r2.size(); ++i) r2[i] = (s.targets[i] - mean[i]) * (s.targets[i] - mean[i]);
    ad::Var lv = f.out.log_var;
    ad::Var nll = ad::scale(ad::mean(ad::add(lv, ad::mul(t.constant(r2), ad::exp(ad::scale(lv, -1.0))))), 0.5);

    LossBreakdown out;
    std::vector<ad::Var> terms{mse, nll};
    std::vector<double> weights{1.0, cfg.lambda_nll};
    out.components["mse"] = mse.item();
    out.components["nll"] = nll.item();
    out.weighted["mse"] = mse.item();
    out.weighted["nll"] = cfg.lambda_nll * nll.item();

    if (model.mode() == DecoderMode::adaptive) {
        const Mat& lvv = lv.value();
        std::vector<double> sigma2(lvv.rows(), 0.0);
        for (std::size_t q = 0; q < lvv.rows(); ++q) {
            for (std::size_t c = 0; c < lvv.cols(); ++c) sigma2[q] += std::exp(lvv(q, c));
            sigma2[q] /= double(lvv.cols());
        }
        const auto u = importance::uncertainty_target(sigma2);
        importance::BetaParams q = model.importance.params(t, s.queries);
        importance::LossTerms lp =
            importance::importance_loss(Mat(u.size(), 1, u), q, model.importance.config(), rng, analytic_expectation);
        terms.push_back(lp.total);
        weights.push_back(1.0);
        out.components["importance"] = lp.weighted;
        out.components["importance_utility"] = lp.utility;
        out.components["importance_kl"] = lp.kl;
        out.components["importance_entropy"] = lp.entropy;
        out.components["importance_variance"] = lp.variance;
        out.weighted["importance"] = lp.weighted;
    }
    out.total = ad::weighted_sum(terms, weights);
    return out;
}

void check_finite(const LossBreakdown& l) {
    for (const auto& [name, v] : l.components)
        if (!std::isfinite(v)) throw NumericalError("non-finite loss component '" + name + "'");
    if (!std::isfinite(l.total.item())) throw NumericalError("non-finite total loss");
}

Stage1Sample draw_stage1_sample(const dataio::FieldDataset& ds, const std::vector<std::size_t>& cases,
                                const TrainConfig& cfg, std::uint64_t stream) {
    if (cases.empty()) throw std::invalid_argument("draw_stage1_sample: no training cases");
    Rng rng(derive_seed(cfg.seed, stream, 1));
    const std::size_t c = cases[rng() % cases.size()];
    const std::size_t t = rng() % ds.n_t;
    std::size_t n = cfg.sensors_min;
    if (cfg.sensors_max > cfg.sensors_min) {
        std::uniform_real_distribution<double> lu(std::log(double(cfg.sensors_min)), std::log(double(cfg.sensors_max) + 1.0));
        n = std::clamp<std::size_t>(std::size_t(std::exp(lu(rng))), cfg.sensors_min, cfg.sensors_max);
    }
    n = std::min(n, ds.n_p);
    Stage1Sample s;
    s.sensors = sensing::make_observation(ds, c, t, sensing::sample_sensors(ds.n_p, n, rng()), cfg.sensor_noise, rng());
    const auto q = sensing::sample_sensors(ds.n_p, std::min(cfg.queries_per_step, ds.n_p), rng());
    s.queries = Mat(q.size(), ds.n_d);
    s.targets = Mat(q.size(), ds.n_c);
    for (std::size_t i = 0; i < q.size(); ++i) {
        for (std::size_t d = 0; d < ds.n_d; ++d) s.queries(i, d) = ds.coord(q[i], d);
        for (std::size_t ch = 0; ch < ds.n_c; ++ch) s.targets(i, ch) = ds.at(c, t, q[i], ch);
    }
    return s;
}

namespace {

using Clock = std::chrono::steady_clock;

struct Accumulator {
    double total = 0.0;
    std::map<std::string, double> comp;
    std::size_t n = 0;
    void add(const LossBreakdown& l) {
        total += l.total.item();
        for (const auto& [k, v] : l.components) comp[k] += v;
        ++n;
    }
    LogRow row(std::size_t step, double lr, double gn) const {
        LogRow r{step, lr, gn, total / double(n), {}};
        for (const auto& [k, v] : comp) r.components[k] = v / double(n);
        return r;
    }
};

template <class SampleLoss>
TrainReport run_loop(const ParamList& params, std::size_t steps, const TrainConfig& cfg, SampleLoss&& sample_loss,
                     const CheckpointFn& on_checkpoint) {
    const auto t0 = Clock::now();
    TrainReport rep;
    Adam::Options ao;
    ao.lr = cfg.lr;
    ao.lr_min_frac = cfg.lr_min_frac;
    ao.clip_norm = cfg.clip_norm;
    ao.total_steps = std::max<std::size_t>(steps, 1);
    Adam opt(params, ao);
    opt.zero_grad();
    for (std::size_t step = 0; step < steps; ++step) {
        Accumulator acc;
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            ad::Tape t;
            LossBreakdown l = sample_loss(t, step * cfg.batch_size + b);
            try {
                check_finite(l);
            } catch (const NumericalError& e) {
                rep.diverged = true;
                rep.diagnostics = "step " + std::to_string(step) + ": " + e.what();
                rep.steps = step;
                rep.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
                return rep;
            }
            if (l.total.item() > cfg.divergence_threshold) {
                rep.diverged = true;
                rep.diagnostics = "step " + std::to_string(step) + ": loss " + std::to_string(l.total.item()) +
                                  " exceeds divergence threshold";
                rep.steps = step;
                rep.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
                return rep;
            }
            t.backward(l.total);
            acc.add(l);
        }
        const double lr = opt.current_lr();
        const double gn = opt.step(1.0 / double(cfg.batch_size));
        if (step % cfg.log_every == 0 || step + 1 == steps) rep.log.push_back(acc.row(step, lr, gn));
        if (on_checkpoint && cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 && step + 1 < steps)
            on_checkpoint(step + 1, false);
    }
    rep.steps = steps;
    if (on_checkpoint) on_checkpoint(steps, true);
    rep.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return rep;
}

}  // namespace

TrainReport train_stage1(GluModel& model, const dataio::FieldDataset& ds, const std::vector<std::size_t>& train_cases,
                         const TrainConfig& cfg, const CheckpointFn& on_checkpoint) {
    cfg.validate();
    return run_loop(
        model.params(), cfg.steps_stage1, cfg,
        [&](ad::Tape& t, std::uint64_t stream) {
            const Stage1Sample s = draw_stage1_sample(ds, train_cases, cfg, stream);
            Rng rng(derive_seed(cfg.seed, stream, 2));
            return loss_stage1(t, model, s, cfg, rng);
        },
        on_checkpoint);
}

EncodedTrajectory encode_trajectory(GluModel& model, const dataio::FieldDataset& ds, std::size_t case_index,
                                    const std::vector<std::size_t>& indices, std::size_t t_begin, std::size_t t_end) {
    if (t_end > ds.n_t || t_begin >= t_end) throw std::invalid_argument("encode_trajectory: bad frame range");
    EncodedTrajectory tr;
    tr.case_index = case_index;
    tr.t_begin = t_begin;
    for (std::size_t t = t_begin; t < t_end; ++t) {
        sensing::SensorSet s = sensing::make_observation(ds, case_index, t, indices);
        ad::Tape tape(false);
        LatentVars lat = model.encoder(tape, s);
        if (t == t_begin) {
            tr.phi = model.sensor_phi(tape, s.x).value();
            tr.sensors = s;
        }
        tr.states.push_back({lat.z_global.value(), lat.z_local.value()});
    }
    return tr;
}

LossBreakdown loss_stage2(ad::Tape& t, Propagator& prop, GluModel& model, const EncodedTrajectory& traj,
                          const dataio::FieldDataset& ds, std::size_t t_end, const TrainConfig& cfg, Rng& rng) {
    const std::size_t last = t_end - traj.t_begin;
    if (last + 1 >= traj.states.size()) throw std::invalid_argument("loss_stage2: window has no next frame");
    const std::size_t first = last + 1 >= prop.window() ? last + 1 - prop.window() : 0;
    std::vector<ad::Var> g, z;
    for (std::size_t k = first; k <= last; ++k) {
        g.push_back(t.constant(traj.states[k].z_global));
        z.push_back(t.constant(traj.states[k].z_local));
    }
    auto latent_mse = [&](ad::Var zg, ad::Var zl, std::size_t k) {
        ad::Var pred = ad::concat_rows(std::vector<ad::Var>{zg, zl});
        Mat target(pred.rows(), pred.cols());
        std::copy(traj.states[k].z_global.vec().begin(), traj.states[k].z_global.vec().end(), target.data());
        std::copy(traj.states[k].z_local.vec().begin(), traj.states[k].z_local.vec().end(),
                  target.data() + traj.states[k].z_global.size());
        return ad::mse(pred, t.constant(target));
    };

    // Every window position is a teacher-forced target, for all propagators.
    ad::Var next_g, next_z;
    std::vector<ad::Var> per_pos;
    if (auto* ct = dynamic_cast<CausalTransformer*>(&prop)) {
        auto f = ct->derivatives(t, g, z);
        for (std::size_t p = 0; p < f.size(); ++p) {
            ad::Var pg = euler_step(g[p], f[p].first, prop.dt());
            ad::Var pz = euler_step(z[p], f[p].second, prop.dt());
            per_pos.push_back(latent_mse(pg, pz, first + p + 1));
            if (p + 1 == f.size()) next_g = pg, next_z = pz;
        }
    } else {
        for (std::size_t p = 0; p < g.size(); ++p) {
            StepVars s = prop.step(t, std::span<const ad::Var>(g.data(), p + 1),
                                   std::span<const ad::Var>(z.data(), p + 1), traj.phi);
            per_pos.push_back(latent_mse(s.z_global, s.z_local, first + p + 1));
            if (p + 1 == g.size()) next_g = s.z_global, next_z = s.z_local;
        }
    }
    ad::Var latent = ad::weighted_sum(per_pos, std::vector<double>(per_pos.size(), 1.0 / double(per_pos.size())));

    LossBreakdown out;
    std::vector<ad::Var> terms{latent};
    std::vector<double> weights{cfg.lambda_latent};
    out.components["latent"] = latent.item();
    out.weighted["latent"] = cfg.lambda_latent * latent.item();
    if (cfg.lambda_decode > 0.0) {
        const std::size_t frame = t_end + 1;
        const auto q = sensing::sample_sensors(ds.n_p, std::min(cfg.queries_per_step, ds.n_p), rng());
        Mat queries(q.size(), ds.n_d), targets(q.size(), ds.n_c);
        for (std::size_t i = 0; i < q.size(); ++i) {
            for (std::size_t d = 0; d < ds.n_d; ++d) queries(i, d) = ds.coord(q[i], d);
            for (std::size_t ch = 0; ch < ds.n_c; ++ch) targets(i, ch) = ds.at(traj.case_index, frame, q[i], ch);
        }
        DecodeVars d = model.decode(t, LatentVars{next_g, next_z}, t.constant(traj.phi), traj.sensors.x, queries);
        ad::Var dec = ad::mse(d.mean, t.constant(targets));
        terms.push_back(dec);
        weights.push_back(cfg.lambda_decode);
        out.components["decode"] = dec.item();
        out.weighted["decode"] = cfg.lambda_decode * dec.item();
    }
    out.total = ad::weighted_sum(terms, weights);
    return out;
}

TrainReport train_stage2(Propagator& prop, GluModel& model, const dataio::FieldDataset& ds,
                         const std::vector<std::size_t>& train_cases, const TrainConfig& cfg,
                         const CheckpointFn& on_checkpoint) {
    cfg.validate();
    if (ds.n_t < 2) throw std::invalid_argument("train_stage2: trajectories need at least two frames");
    std::vector<EncodedTrajectory> trajs;
    for (std::size_t c : train_cases) {
        const auto idx = sensing::sample_sensors(ds.n_p, std::min(cfg.stage2_sensors, ds.n_p), derive_seed(cfg.seed, 77, c));
        trajs.push_back(encode_trajectory(model, ds, c, idx, 0, ds.n_t));
    }
    ParamList frozen = model.params();
    for (Param* p : frozen) p->frozen = true;
    const std::size_t lo = std::min(prop.window() - 1, ds.n_t - 2);
    TrainReport rep;
    try {
        rep = run_loop(
            prop.params(), cfg.steps_stage2, cfg,
            [&](ad::Tape& t, std::uint64_t stream) {
                Rng rng(derive_seed(cfg.seed, stream, 3));
                const auto& tr = trajs[rng() % trajs.size()];
                const std::size_t t_end = lo + rng() % (ds.n_t - 1 - lo);
                return loss_stage2(t, prop, model, tr, ds, t_end, cfg, rng);
            },
            on_checkpoint);
    } catch (...) {
        for (Param* p : frozen) p->frozen = false;
        throw;
    }
    for (Param* p : frozen) p->frozen = false;
    return rep;
}

GradCheckResult grad_check(const std::function<ad::Var(ad::Tape&)>& build, const ParamList& params,
                           std::size_t per_param, double step, double floor, std::uint64_t seed) {
    for (Param* p : params) p->zero_grad();
    {
        ad::Tape t;
        t.backward(build(t));
    }
    auto eval = [&]() {
        ad::Tape t(false);
        return build(t).item();
    };
    GradCheckResult res;
    Rng rng(seed);
    for (Param* p : params) {
        const std::size_t n = p->value.size();
        std::vector<std::size_t> entries;
        if (n <= per_param) {
            for (std::size_t i = 0; i < n; ++i) entries.push_back(i);
        } else {
            for (std::size_t k = 0; k < per_param; ++k) entries.push_back(rng() % n);
        }
        for (std::size_t i : entries) {
            const double orig = p->value[i];
            const double h = step * std::max(1.0, std::abs(orig));
            p->value[i] = orig + h;
            const double fp = eval();
            p->value[i] = orig - h;
            const double fm = eval();
            p->value[i] = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            const double analytic = p->grad[i];
            const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
            ++res.checked;
            if (rel > res.max_rel) {
                res.max_rel = rel;
                res.worst_param = p->name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return res;
}

RunDir::RunDir(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_ / "checkpoints");
}

void RunDir::write_config(const json& cfg) const { write_json("config.json", cfg); }

void RunDir::write_loss_csv(const std::string& name, const TrainReport& r) const {
    std::ofstream f(root_ / name);
    std::vector<std::string> keys;
    if (!r.log.empty())
        for (const auto& [k, v] : r.log.front().components) keys.push_back(k);
    f << "step,lr,grad_norm,total";
    for (const auto& k : keys) f << "," << k;
    f << "\n";
    f.precision(10);
    for (const auto& row : r.log) {
        f << row.step << "," << row.lr << "," << row.grad_norm << "," << row.total;
        for (const auto& k : keys) {
            auto it = row.components.find(k);
            f << "," << (it == row.components.end() ? NAN : it->second);
        }
        f << "\n";
    }
}

void RunDir::write_json(const std::string& name, const json& j) const {
    std::ofstream(root_ / name) << j.dump(2) << "\n";
}

}  // namespace glu::training
