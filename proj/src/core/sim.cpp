#include "glu/sim.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "glu/errors.hpp"
#include "glu/kernels.hpp"
#include "glu/nn.hpp"

namespace glu::sim {

using dataio::FieldDataset;
using nlohmann::json;

std::size_t FhnConfig::grid_n() const { return std::size_t(std::llround(2.0 * half_width / dx)); }

void FhnConfig::validate() const {
    if (!(dt > 0.0)) throw ConfigError("dt", "must be > 0");
    if (save_every < 1) throw ConfigError("save_every", "must be >= 1");
    if (!(dx > 0.0) || !(half_width > 0.0)) throw ConfigError("dx", "grid spacing and half width must be > 0");
    const double n = 2.0 * half_width / dx;
    if (std::abs(n - std::round(n)) > 1e-9 || n < 4) throw ConfigError("dx", "2*half_width/dx must be an integer >= 4");
    if (mu_u < 0.0 || mu_v < 0.0) throw ConfigError("mu_u", "diffusivities must be >= 0");
    if (init_std < 0.0) throw ConfigError("init_std", "must be >= 0");
}

json FhnConfig::to_json() const {
    return {{"mu_u", mu_u},   {"mu_v", mu_v},           {"alpha", alpha},       {"beta", beta},
            {"half_width", half_width}, {"dx", dx},     {"dt", dt},             {"n_steps", n_steps},
            {"save_every", save_every}, {"burn_in", burn_in}, {"init_std", init_std}, {"seed", seed},
            {"max_retries", max_retries}, {"reaction", reaction}};
}

FhnConfig FhnConfig::from_json(const json& j) {
    FhnConfig c;
    c.mu_u = j.value("mu_u", c.mu_u);
    c.mu_v = j.value("mu_v", c.mu_v);
    c.alpha = j.value("alpha", c.alpha);
    c.beta = j.value("beta", c.beta);
    c.half_width = j.value("half_width", c.half_width);
    c.dx = j.value("dx", c.dx);
    c.dt = j.value("dt", c.dt);
    c.n_steps = j.value("n_steps", c.n_steps);
    c.save_every = j.value("save_every", c.save_every);
    c.burn_in = j.value("burn_in", c.burn_in);
    c.init_std = j.value("init_std", c.init_std);
    c.seed = j.value("seed", c.seed);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.reaction = j.value("reaction", c.reaction);
    return c;
}

FhnStepper::FhnStepper(const FhnConfig& cfg) : cfg_(cfg), n_(cfg.grid_n()), plan_(n_, n_) {
    cfg_.validate();
    const std::size_t nh = n_ / 2 + 1;
    decay_u_.resize(n_ * nh);
    decay_v_.resize(n_ * nh);
    spec_.resize(n_ * nh);
    for (std::size_t iy = 0; iy < n_; ++iy)
        for (std::size_t ix = 0; ix < nh; ++ix) {
            const double kk = k2(iy, ix);
            decay_u_[iy * nh + ix] = std::exp(-cfg_.mu_u * kk * cfg_.dt) / double(n_ * n_);
            decay_v_[iy * nh + ix] = std::exp(-cfg_.mu_v * kk * cfg_.dt) / double(n_ * n_);
        }
}

double FhnStepper::k2(std::size_t iy, std::size_t ix) const {
    const double length = double(n_) * cfg_.dx;
    const double ky = 2.0 * std::numbers::pi * double(fft::freq_index(iy, n_)) / length;
    const double kx = 2.0 * std::numbers::pi * double(ix) / length;
    return kx * kx + ky * ky;
}

void FhnStepper::step(std::vector<double>& u, std::vector<double>& v, std::size_t step_index) {
    const std::size_t np = n_ * n_;
    if (u.size() != np || v.size() != np) throw std::invalid_argument("FhnStepper: field size mismatch");
    auto diffuse = [&](std::vector<double>& f, const std::vector<double>& decay) {
        plan_.forward(f, spec_);
        for (std::size_t i = 0; i < spec_.size(); ++i) spec_[i] *= decay[i];
        plan_.inverse(spec_, f);
    };
    if (cfg_.mu_u > 0.0) diffuse(u, decay_u_);
    if (cfg_.mu_v > 0.0) diffuse(v, decay_v_);
    if (cfg_.reaction) kernels::active().fhn_reaction(u.data(), v.data(), np, cfg_.dt, cfg_.alpha, cfg_.beta);
    for (std::size_t i = 0; i < np; ++i)
        if (!std::isfinite(u[i]) || !std::isfinite(v[i]))
            throw NumericalError("FHN state became non-finite at step " + std::to_string(step_index));
}

void fhn_step(std::vector<double>& u, std::vector<double>& v, const FhnConfig& cfg) {
    FhnStepper s(cfg);
    s.step(u, v, 0);
}

namespace {

std::vector<double> grid_coords(std::size_t n, double lo, double spacing) {
    std::vector<double> c(n * n * 2);
    for (std::size_t iy = 0; iy < n; ++iy)
        for (std::size_t ix = 0; ix < n; ++ix) {
            const std::size_t p = iy * n + ix;
            c[2 * p + 0] = lo + double(ix) * spacing;
            c[2 * p + 1] = lo + double(iy) * spacing;
        }
    return c;
}

void finish_dataset(FieldDataset& ds, const std::vector<double>& raw_coords, const GenerateOptions& opt) {
    const auto rc = dataio::rescale_coords(raw_coords, ds.n_p, ds.n_d);
    ds.coords.assign(rc.coords.begin(), rc.coords.end());
    ds.norm.coord_min = rc.min;
    ds.norm.coord_max = rc.max;
    ds.split_seed = opt.split_seed;
    ds.train_frac = opt.train_frac;
    if (opt.normalize) {
        const auto split = dataio::split_cases(ds.n_cases, opt.train_frac, opt.split_seed);
        const auto res = dataio::normalize_fields(ds, split.train);
        if (!res.warnings.empty()) ds.generator["warnings"] = res.warnings;
    } else {
        ds.norm.mean.assign(ds.n_c, 0.0);
        ds.norm.stddev.assign(ds.n_c, 1.0);
    }
    ds.validate();
}

}  // namespace

FieldDataset generate_fhn(const FhnConfig& cfg, std::size_t n_cases, const GenerateOptions& opt) {
    cfg.validate();
    const std::size_t n = cfg.grid_n();
    const std::size_t np = n * n;
    FieldDataset ds;
    ds.n_cases = n_cases;
    ds.n_t = fhn_snapshot_count(cfg);
    ds.n_p = np;
    ds.n_c = 2;
    ds.n_d = 2;
    ds.dt = cfg.dt * double(cfg.save_every);
    ds.channel_names = {"u", "v"};
    ds.grid_shape = {n, n};
    ds.fields.resize(n_cases * ds.n_t * np * 2);
    ds.generator = {{"name", "fhn"}, {"config", cfg.to_json()}, {"n_cases", n_cases}};
    json retries = json::array();

    FhnStepper stepper(cfg);
    for (std::size_t c = 0; c < n_cases; ++c) {
        for (std::size_t attempt = 0;; ++attempt) {
            Rng rng(derive_seed(cfg.seed, c, attempt));
            std::normal_distribution<double> noise(0.0, cfg.init_std);
            std::vector<double> u(np), v(np);
            for (auto& x : u) x = noise(rng);
            for (auto& x : v) x = noise(rng);
            try {
                std::size_t saved = 0;
                const std::size_t total = cfg.burn_in + cfg.n_steps;
                for (std::size_t s = 0; s <= total; ++s) {
                    if (s >= cfg.burn_in && (s - cfg.burn_in) % cfg.save_every == 0) {
                        for (std::size_t p = 0; p < np; ++p) {
                            ds.fields[ds.index(c, saved, p, 0)] = float(u[p]);
                            ds.fields[ds.index(c, saved, p, 1)] = float(v[p]);
                        }
                        ++saved;
                    }
                    if (s < total) stepper.step(u, v, s);
                }
                break;
            } catch (const NumericalError& e) {
                retries.push_back({{"case", c}, {"attempt", attempt}, {"error", e.what()}});
                if (attempt + 1 >= std::max<std::size_t>(cfg.max_retries, 1))
                    throw NumericalError("case " + std::to_string(c) + " unstable after " +
                                         std::to_string(attempt + 1) + " attempts: " + e.what());
            }
        }
    }
    ds.generator["retries"] = retries;
    finish_dataset(ds, grid_coords(n, -cfg.half_width, cfg.dx), opt);
    return ds;
}

void AdvectionConfig::validate() const {
    if (grid_n < 4) throw ConfigError("grid_n", "must be >= 4");
    if (n_t < 1) throw ConfigError("n_t", "must be >= 1");
    if (max_wavenumber < 1) throw ConfigError("max_wavenumber", "must be >= 1");
}

json AdvectionConfig::to_json() const {
    return {{"grid_n", grid_n},   {"n_t", n_t},   {"speed_x", speed_x}, {"speed_y", speed_y},
            {"max_wavenumber", max_wavenumber}, {"seed", seed}};
}

AdvectionConfig AdvectionConfig::from_json(const json& j) {
    AdvectionConfig c;
    c.grid_n = j.value("grid_n", c.grid_n);
    c.n_t = j.value("n_t", c.n_t);
    c.speed_x = j.value("speed_x", c.speed_x);
    c.speed_y = j.value("speed_y", c.speed_y);
    c.max_wavenumber = j.value("max_wavenumber", c.max_wavenumber);
    c.seed = j.value("seed", c.seed);
    return c;
}

FieldDataset generate_advection(const AdvectionConfig& cfg, std::size_t n_cases, const GenerateOptions& opt) {
    cfg.validate();
    const std::size_t n = cfg.grid_n, np = n * n;
    FieldDataset ds;
    ds.n_cases = n_cases;
    ds.n_t = cfg.n_t;
    ds.n_p = np;
    ds.n_c = 1;
    ds.n_d = 2;
    ds.dt = 1.0;
    ds.channel_names = {"q"};
    ds.grid_shape = {n, n};
    ds.fields.resize(n_cases * cfg.n_t * np);
    ds.generator = {{"name", "advection"}, {"config", cfg.to_json()}, {"n_cases", n_cases}};

    struct Mode {
        int kx, ky;
        double a, b;
    };
    const int K = cfg.max_wavenumber;
    for (std::size_t c = 0; c < n_cases; ++c) {
        Rng rng(derive_seed(cfg.seed, c));
        std::normal_distribution<double> g(0.0, 1.0);
        std::vector<Mode> modes;
        for (int ky = -K; ky <= K; ++ky)
            for (int kx = 0; kx <= K; ++kx) {
                if (kx == 0 && ky <= 0) continue;  // half-plane: each real mode once
                const double amp = 1.0 / (1.0 + double(kx * kx + ky * ky));
                modes.push_back({kx, ky, amp * g(rng), amp * g(rng)});
            }
        for (std::size_t t = 0; t < cfg.n_t; ++t) {
            const double sx = cfg.speed_x * double(t), sy = cfg.speed_y * double(t);
            for (std::size_t iy = 0; iy < n; ++iy)
                for (std::size_t ix = 0; ix < n; ++ix) {
                    const double x = double(ix) / double(n) - sx;
                    const double y = double(iy) / double(n) - sy;
                    double val = 0.0;
                    for (const Mode& m : modes) {
                        // Reduce the phase modulo one period before scaling by 2 pi.
                        double ph = double(m.kx) * x + double(m.ky) * y;
                        ph -= std::floor(ph);
                        const double th = 2.0 * std::numbers::pi * ph;
                        val += m.a * std::cos(th) + m.b * std::sin(th);
                    }
                    ds.fields[ds.index(c, t, iy * n + ix, 0)] = float(val);
                }
        }
    }
    finish_dataset(ds, grid_coords(n, 0.0, 1.0 / double(n)), opt);
    return ds;
}

json LocalizedConfig::to_json() const {
    return {{"grid_n", grid_n},       {"n_t", n_t},
            {"center_x", center_x},   {"center_y", center_y},
            {"radius", radius},       {"active_amplitude", active_amplitude},
            {"background_amplitude", background_amplitude}, {"active_wavenumber", active_wavenumber},
            {"seed", seed}};
}

FieldDataset generate_localized(const LocalizedConfig& cfg, std::size_t n_cases, const GenerateOptions& opt) {
    const std::size_t n = cfg.grid_n, np = n * n;
    FieldDataset ds;
    ds.n_cases = n_cases;
    ds.n_t = cfg.n_t;
    ds.n_p = np;
    ds.n_c = 1;
    ds.n_d = 2;
    ds.dt = 1.0;
    ds.channel_names = {"s"};
    ds.grid_shape = {n, n};
    ds.fields.resize(n_cases * cfg.n_t * np);
    ds.generator = {{"name", "localized"}, {"config", cfg.to_json()}, {"n_cases", n_cases}};
    const double two_pi = 2.0 * std::numbers::pi;
    const auto raw = grid_coords(n, -1.0, 2.0 / double(n - 1));
    for (std::size_t c = 0; c < n_cases; ++c) {
        Rng rng(derive_seed(cfg.seed, c));
        std::normal_distribution<double> g(0.0, 1.0);
        std::uniform_real_distribution<double> uph(0.0, two_pi);
        const double bx = g(rng), by = g(rng), bph = uph(rng);
        for (std::size_t t = 0; t < cfg.n_t; ++t) {
            // Fresh random phases each snapshot: the active region is unpredictable in time.
            const double p1 = uph(rng), p2 = uph(rng), p3 = uph(rng);
            const double a1 = g(rng), a2 = g(rng);
            for (std::size_t p = 0; p < np; ++p) {
                const double x = raw[2 * p], y = raw[2 * p + 1];
                const double bg = cfg.background_amplitude * std::sin(0.5 * std::numbers::pi * (bx * x + by * y) + bph);
                const double dxc = x - cfg.center_x, dyc = y - cfg.center_y;
                const double r2 = (dxc * dxc + dyc * dyc) / (cfg.radius * cfg.radius);
                const double env = r2 < 1.0 ? std::pow(1.0 - r2, 2) : 0.0;
                const double k = double(cfg.active_wavenumber) * std::numbers::pi;
                const double act = a1 * std::sin(k * x + p1) * std::cos(k * y + p2) + a2 * std::sin(k * (x + y) * 0.7 + p3);
                ds.fields[ds.index(c, t, p, 0)] = float(bg + cfg.active_amplitude * env * act);
            }
        }
    }
    finish_dataset(ds, raw, opt);
    return ds;
}

std::vector<bool> localized_active_mask(const FieldDataset& ds, const LocalizedConfig& cfg) {
    std::vector<bool> mask(ds.n_p);
    for (std::size_t p = 0; p < ds.n_p; ++p) {
        const double dxc = ds.coord(p, 0) - cfg.center_x, dyc = ds.coord(p, 1) - cfg.center_y;
        mask[p] = dxc * dxc + dyc * dyc < cfg.radius * cfg.radius;
    }
    return mask;
}

}  // namespace glu::sim
