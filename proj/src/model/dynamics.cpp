#include "glu/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "glu/errors.hpp"

namespace glu {

ad::Var pool_history(std::span<const ad::Var> states, PoolMode mode) {
    if (states.empty()) throw std::invalid_argument("pool_history: empty window");
    if (states.size() == 1) return states[0];
    if (mode == PoolMode::mean) {
        std::vector<double> w(states.size(), 1.0 / double(states.size()));
        // weighted_sum is scalar-only, so accumulate elementwise.
        ad::Var acc = ad::scale(states[0], w[0]);
        for (std::size_t i = 1; i < states.size(); ++i) acc = ad::add(acc, ad::scale(states[i], w[i]));
        return acc;
    }
    // Max pooling per element: stack rows of each entry and take max over the window.
    const std::size_t r = states[0].rows(), c = states[0].cols();
    std::vector<ad::Var> flat;
    for (const auto& s : states) {
        if (s.rows() != r || s.cols() != c) throw std::invalid_argument("pool_history: shape mismatch");
        flat.push_back(s);
    }
    ad::Var out;
    for (std::size_t row = 0; row < r; ++row) {
        std::vector<ad::Var> rows;
        for (const auto& s : flat) rows.push_back(ad::slice_rows(s, row, row + 1));
        ad::Var m = ad::max_rows(ad::concat_rows(rows));
        out = row == 0 ? m : ad::concat_rows(std::vector<ad::Var>{out, m});
    }
    return out;
}

Mat pool_history(std::span<const Mat> states, PoolMode mode) {
    if (states.empty()) throw std::invalid_argument("pool_history: empty window");
    Mat out = states[0];
    for (std::size_t k = 1; k < states.size(); ++k) {
        if (!states[k].same_shape(out)) throw std::invalid_argument("pool_history: shape mismatch");
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = mode == PoolMode::mean ? out[i] + states[k][i] : std::max(out[i], states[k][i]);
    }
    if (mode == PoolMode::mean)
        for (auto& v : out.vec()) v /= double(states.size());
    return out;
}

ad::Var euler_step(ad::Var s, ad::Var f, double dt) { return ad::add(s, ad::scale(f, dt)); }

Mat euler_step(const Mat& s, const Mat& f, double dt) {
    if (!s.same_shape(f)) throw std::invalid_argument("euler_step: shape mismatch");
    Mat out = s;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s[i] + dt * f[i];
    return out;
}

void LfdConfig::validate() const {
    if (width < 1) throw ConfigError("dynamics.width", "must be >= 1");
    if (window < 1) throw ConfigError("dynamics.window", "must be >= 1");
    if (!(dt > 0.0)) throw ConfigError("dynamics.dt", "must be > 0");
    if (heads < 1 || width % heads != 0) throw ConfigError("dynamics.heads", "must divide width");
    if (hidden < 1) throw ConfigError("dynamics.hidden", "must be >= 1");
}

nlohmann::json LfdConfig::to_json() const {
    return {{"width", width},   {"window", window}, {"dt", dt},
            {"heads", heads},   {"hidden", hidden}, {"bias_floor", bias_floor},
            {"pool", pool == PoolMode::mean ? "mean" : "max"}, {"pre_norm", pre_norm}, {"seed", seed}};
}

LfdConfig LfdConfig::from_json(const nlohmann::json& j) {
    LfdConfig c;
    c.width = j.value("width", c.width);
    c.window = j.value("window", c.window);
    c.dt = j.value("dt", c.dt);
    c.heads = j.value("heads", c.heads);
    c.hidden = j.value("hidden", c.hidden);
    c.bias_floor = j.value("bias_floor", c.bias_floor);
    const std::string pool = j.value("pool", std::string("mean"));
    if (pool != "mean" && pool != "max") throw ConfigError("dynamics.pool", "must be 'mean' or 'max'");
    c.pool = pool == "mean" ? PoolMode::mean : PoolMode::max;
    c.pre_norm = j.value("pre_norm", c.pre_norm);
    c.seed = j.value("seed", c.seed);
    return c;
}

namespace {
Rng lfd_rng(const LfdConfig& c) {
    c.validate();
    return Rng(derive_seed(c.seed, 11));
}
}  // namespace

Lfd::Lfd(const LfdConfig& cfg) : cfg_(cfg) {
    Rng rng = lfd_rng(cfg);
    ln_leader = nn::LayerNorm("lfd.ln_leader", cfg.width);
    ln_follower = nn::LayerNorm("lfd.ln_follower", cfg.width);
    leader_self = nn::Attention("lfd.leader_self", cfg.width, cfg.heads, rng);
    leader_cross = nn::Attention("lfd.leader_cross", cfg.width, cfg.heads, rng);
    follower_cross = nn::Attention("lfd.follower_cross", cfg.width, cfg.heads, rng);
    leader_ffn = nn::Mlp("lfd.leader_ffn", cfg.width, cfg.hidden, cfg.width, rng);
    follower_ffn = nn::Mlp("lfd.follower_ffn", cfg.width, cfg.hidden, cfg.width, rng);
    // Start from the persistence model F = 0.
    leader_ffn.out.zero_init();
    follower_ffn.out.zero_init();
}

Mat log_phi_bias(const Mat& phi, double floor) {
    Mat b(1, phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) b[i] = phi[i] > 0.0 ? std::max(std::log(phi[i]), floor) : floor;
    return b;
}

ad::Var Lfd::leader_update(ad::Tape& t, ad::Var g_hist, ad::Var z_pooled, const Mat& phi) {
    require_shape(phi, z_pooled.rows(), 1, "leader_update phi");
    const Mat bias = log_phi_bias(phi, cfg_.bias_floor);
    ad::Var g = cfg_.pre_norm ? ln_leader(t, g_hist) : g_hist;
    ad::Var z = cfg_.pre_norm ? ln_follower(t, z_pooled) : z_pooled;
    ad::Var a = ad::add(leader_self(t, g, g), leader_cross(t, g, z, &bias));
    const std::size_t last = g_hist.rows() - 1;
    ad::Var h = ad::add(ad::slice_rows(a, last, last + 1), ad::slice_rows(g, last, last + 1));
    return leader_ffn(t, h);
}

ad::Var Lfd::follower_update(ad::Tape& t, ad::Var z_pooled, ad::Var g_hist) {
    ad::Var z = cfg_.pre_norm ? ln_follower(t, z_pooled) : z_pooled;
    ad::Var g = cfg_.pre_norm ? ln_leader(t, g_hist) : g_hist;
    return follower_ffn(t, ad::add(z, follower_cross(t, z, g)));
}

StepVars Lfd::step(ad::Tape& t, std::span<const ad::Var> g_hist, std::span<const ad::Var> z_hist, const Mat& phi) {
    if (g_hist.empty() || g_hist.size() != z_hist.size())
        throw std::invalid_argument("Lfd::step: history windows must be nonempty and equally long");
    const std::size_t n = std::min(g_hist.size(), cfg_.window);
    g_hist = g_hist.subspan(g_hist.size() - n);
    z_hist = z_hist.subspan(z_hist.size() - n);
    ad::Var g = ad::concat_rows(g_hist);
    ad::Var zp = pool_history(z_hist, cfg_.pool);
    StepVars s;
    s.f_global = leader_update(t, g, zp, phi);
    s.f_local = follower_update(t, zp, g);
    s.z_global = euler_step(g_hist.back(), s.f_global, cfg_.dt);
    s.z_local = euler_step(z_hist.back(), s.f_local, cfg_.dt);
    return s;
}

ParamList Lfd::params() {
    ParamList p;
    if (cfg_.pre_norm) {
        ln_leader.collect(p);
        ln_follower.collect(p);
    }
    leader_self.collect(p);
    leader_cross.collect(p);
    follower_cross.collect(p);
    leader_ffn.collect(p);
    follower_ffn.collect(p);
    return p;
}

void Lfd::save(const std::filesystem::path& dir, const std::string& tag) {
    save_params(dir, params(), tag);
    std::ofstream(dir / "dynamics_config.json") << nlohmann::json{{"kind", "lfd"}, {"config", cfg_.to_json()}}.dump(2)
                                                 << "\n";
}

void Lfd::load(const std::filesystem::path& dir) { load_params(dir, params()); }

namespace {

double rms(const Mat& m) {
    double s = 0.0;
    for (double v : m.vec()) s += v * v;
    return std::sqrt(s / double(std::max<std::size_t>(m.size(), 1)));
}

bool finite(const Mat& m) {
    for (double v : m.vec())
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace

LatentTrajectory rollout(Propagator& prop, const std::vector<LatentState>& window, const Mat& phi, std::size_t horizon) {
    if (window.empty()) throw std::invalid_argument("rollout: empty observation window");
    const std::size_t d = window[0].z_global.cols();
    std::vector<Mat> leaders;
    LatentTrajectory traj;
    traj.n_initial = window.size();
    for (const auto& s : window) {
        leaders.push_back(s.z_global);
        traj.followers.push_back(s.z_local);
        traj.leader_rms.push_back(rms(s.z_global));
        traj.follower_rms.push_back(rms(s.z_local));
    }
    for (std::size_t h = 0; h < horizon; ++h) {
        ad::Tape t(false);
        const std::size_t n = std::min(prop.window(), leaders.size());
        std::vector<ad::Var> g, z;
        for (std::size_t k = leaders.size() - n; k < leaders.size(); ++k) {
            g.push_back(t.constant(leaders[k]));
            z.push_back(t.constant(traj.followers[k]));
        }
        StepVars s = prop.step(t, g, z, phi);
        if (!finite(s.z_global.value()) || !finite(s.z_local.value())) {
            traj.diverged_at = long(h);
            break;
        }
        leaders.push_back(s.z_global.value());
        traj.followers.push_back(s.z_local.value());
        traj.leader_rms.push_back(rms(leaders.back()));
        traj.follower_rms.push_back(rms(traj.followers.back()));
    }
    traj.leaders = Mat(leaders.size(), d);
    for (std::size_t k = 0; k < leaders.size(); ++k) std::copy_n(leaders[k].data(), d, traj.leaders.row(k).data());
    return traj;
}

}  // namespace glu
