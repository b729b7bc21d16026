// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/math/distributions/beta.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <json.hpp>

#include "glu/baselines.hpp"
#include "glu/bench.hpp"
#include "glu/dynamics.hpp"
#include "glu/evaluation.hpp"
#include "glu/importance.hpp"
#include "glu/kernels.hpp"
#include "glu/metrics.hpp"
#include "glu/model.hpp"
#include "glu/reconstructor.hpp"
#include "glu/sensing.hpp"
#include "glu/sim.hpp"
#include "glu/training.hpp"

using namespace glu;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// -- pinned tolerances and budgets ---------------------------------------------

constexpr int kSelectionInstances = 1000;
constexpr double kSelectionSeconds = 10.0;
constexpr int kBetaSets = 500;
constexpr double kBetaTol = 1e-6;
constexpr double kBetaSeconds = 30.0;
constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 120.0;
constexpr double kMeanConservationTol = 1e-10;
constexpr double kFixedPointTol = 1e-12;
constexpr double kModeDecayTol = 1e-10;
constexpr double kJsdTol = 1e-9;
constexpr double kRelL2Tol = 1e-12;
constexpr double kParsevalTol = 1e-6;
constexpr double kCorrLengthTol = 0.02;
constexpr double kMechanismSeconds = 30.0 * 60.0;
constexpr double kScalingStepTol = 0.05;
constexpr double kSlopeTol = 0.01;
constexpr std::uint64_t kLfdSpotValue = 8448;
constexpr double kLocalizationRatio = 1.2;
constexpr double kLatentNormFactor = 10.0;

constexpr std::size_t kSeeds = 3;
const std::vector<std::size_t> kSensorCounts{16, 32, 64, 128, 256};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
    json data = json::object();
};

std::string fmt(double v, int prec = 4) {
    std::ostringstream o;
    o << std::setprecision(prec) << v;
    return o.str();
}

double mean_of(const std::vector<double>& v) {
    long double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : double(s / (long double)v.size());
}

double stddev_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / double(v.size() - 1));
}

Mat random_mat(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Mat m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = u(rng);
    return m;
}

void jitter(const ParamList& ps, std::mt19937_64& rng, double sd) {
    std::normal_distribution<double> g(0.0, sd);
    for (Param* p : ps)
        for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] += g(rng);
}

// -- 1. selection vs exhaustive sort ---------------------------------------------

Outcome criterion_selection() {
    Outcome o;
    std::mt19937_64 r(1001);
    std::uniform_int_distribution<std::size_t> un(1, 200), uk(1, 16), uq(1, 8);
    std::uniform_real_distribution<double> uphi(0.01, 1.0);
    const double gammas[] = {0.5, 1.0, 2.0};
    const double eps = 1e-6;
    std::size_t mismatches = 0, queries = 0, ties = 0;
    for (int inst = 0; inst < kSelectionInstances; ++inst) {
        const std::size_t n = un(r), K = uk(r), nq = uq(r);
        const double gamma = gammas[inst % 3];
        Mat x = random_mat(n, 2, r);
        std::vector<double> phi(n);
        for (auto& p : phi) p = uphi(r);
        // every fourth instance carries exact duplicates, hence exact ties
        if (inst % 4 == 0 && n > 3)
            for (std::size_t i = 1; i < n; i += 3) x(i, 0) = x(0, 0), x(i, 1) = x(0, 1), phi[i] = phi[0];
        const Mat q = random_mat(nq, 2, r);
        const auto nb = select_neighbors(q, x, phi, K, gamma, eps);
        for (std::size_t j = 0; j < nq; ++j) {
            std::vector<std::pair<double, std::size_t>> d(n);
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0;
                for (std::size_t c = 0; c < 2; ++c) s += (q(j, c) - x(i, c)) * (q(j, c) - x(i, c));
                d[i] = {std::sqrt(s) / (std::pow(phi[i], gamma) + eps), i};
            }
            std::sort(d.begin(), d.end());
            const std::size_t k = std::min(K, n);
            for (std::size_t s = 1; s < n; ++s) ties += d[s].first == d[s - 1].first;
            bool same = nb.k == k;
            for (std::size_t s = 0; same && s < k; ++s) same = nb.idx[j * nb.k + s] == d[s].second;
            mismatches += !same;
            ++queries;
        }
    }
    o.data = {{"instances", kSelectionInstances}, {"queries", queries}, {"mismatches", mismatches}, {"tied_pairs", ties},
              {"kernel", kernels::active().name}};
    o.detail = std::to_string(kSelectionInstances) + " instances, " + std::to_string(queries) + " queries, " +
               std::to_string(mismatches) + " mismatches, " + std::to_string(ties) + " exact ties exercised";
    o.pass = mismatches == 0;
    return o;
}

// -- 2. Beta KL and entropy vs quadrature ----------------------------------------

// x and 1 - x are passed separately so both endpoints keep full precision.
double log_pdf(double x, double xm, double a, double b) {
    return (a - 1) * std::log(x) + (b - 1) * std::log(xm) - importance::log_beta_fn(a, b);
}

// tanh_sinh hands over the signed distance to the nearest endpoint.
std::pair<double, double> split_unit(double x, double xc) {
    return x < 0.5 ? std::pair{-xc, 1.0 - x} : std::pair{x, xc};
}

Outcome criterion_beta() {
    Outcome o;
    std::mt19937_64 r(2002);
    std::uniform_real_distribution<double> u(0.5, 10.0);
    boost::math::quadrature::tanh_sinh<double> ts;
    double worst_kl = 0, worst_h = 0;
    for (int i = 0; i < kBetaSets; ++i) {
        const double a = u(r), b = u(r), a0 = u(r), b0 = u(r);
        const double qkl = ts.integrate([&](double x, double xc) {
            const auto [lo, hi] = split_unit(x, xc);
            const double lp = log_pdf(lo, hi, a, b);
            return std::exp(lp) * (lp - log_pdf(lo, hi, a0, b0));
        }, 0.0, 1.0, 1e-13);
        const double qh = ts.integrate([&](double x, double xc) {
            const auto [lo, hi] = split_unit(x, xc);
            const double lp = log_pdf(lo, hi, a, b);
            return -std::exp(lp) * lp;
        }, 0.0, 1.0, 1e-13);
        worst_kl = std::max(worst_kl, std::abs(importance::kl_beta(a, b, a0, b0) - qkl) / std::max(1.0, std::abs(qkl)));
        worst_h = std::max(worst_h, std::abs(importance::beta_entropy(a, b) - qh) / std::max(1.0, std::abs(qh)));
    }
    o.data = {{"sets", kBetaSets}, {"max_err_kl", worst_kl}, {"max_err_entropy", worst_h}, {"tol", kBetaTol}};
    o.detail = std::to_string(kBetaSets) + " sets, max error KL " + fmt(worst_kl, 3) + ", entropy " + fmt(worst_h, 3) +
               " (tol " + fmt(kBetaTol) + ", error relative to max(1, |value|))";
    o.pass = worst_kl <= kBetaTol && worst_h <= kBetaTol;
    return o;
}

// -- 3. gradient suite -------------------------------------------------------------

Outcome criterion_gradients() {
    Outcome o;
    std::map<std::string, training::GradCheckResult> res;
    std::mt19937_64 r(3003);

    EncoderConfig ec;
    ec.n_d = 2, ec.n_c = 2, ec.n_freq = 4, ec.width = 8, ec.latents = 3, ec.heads = 2;
    {
        Rng rng(31);
        Encoder enc(ec, rng);
        ParamList ps;
        enc.collect(ps);
        jitter(ps, r, 0.1);
        const Mat x = random_mat(6, 2, r), u = random_mat(6, 2, r);
        const Mat wg = random_mat(1, 8, r), wl = random_mat(6, 8, r);
        auto build = [&](ad::Tape& t) {
            const auto lat = enc.encode(t, enc.embed(t, x, u));
            return ad::add(ad::sum(ad::mul(lat.z_global, t.constant(wg))), ad::sum(ad::mul(lat.z_local, t.constant(wl))));
        };
        res["encoder"] = training::grad_check(build, ps, 6, 1e-5, 1e-4, 1);
    }
    {
        ReconstructorConfig rc;
        rc.K = 3, rc.hidden = 8, rc.sigma = 0.5;
        Rng rng(32);
        Encoder enc(ec, rng);
        Reconstructor rec(rc, ec, rng);
        ParamList ps;
        enc.collect(ps);
        rec.collect(ps);
        jitter(ps, r, 0.1);
        const Mat x = random_mat(7, 2, r), u = random_mat(7, 2, r), q = random_mat(5, 2, r), tgt = random_mat(5, 2, r);
        Param phi("phi", random_mat(7, 1, r, 0.3, 1.0));
        const auto nb = select_neighbors(q, x, phi.value.vec(), rc.K, rc.gamma, rc.eps);
        ps.push_back(&phi);
        auto build = [&](ad::Tape& t) {
            const auto lat = enc.encode(t, enc.embed(t, x, u));
            const auto out = rec.decode(t, enc, lat, t.param(phi), x, q, DecoderMode::adaptive, &nb);
            return ad::add(ad::mse(out.mean, t.constant(tgt)), ad::scale(ad::mean(out.log_var), 0.1));
        };
        res["aggregation_fusion"] = training::grad_check(build, ps, 6, 1e-5, 1e-4, 2);
    }
    {
        importance::ImportanceConfig c;
        c.n_freq = 3, c.hidden = 6;
        Rng rng(33);
        importance::ImportanceNet net(c, rng);
        ParamList ps;
        net.collect(ps);
        jitter(ps, r, 0.2);
        const Mat x = random_mat(9, 2, r), u = random_mat(9, 1, r, 0.0, 1.0);
        auto build = [&](ad::Tape& t) {
            Rng lr(0);
            return importance::importance_loss(u, net.params(t, x), c, lr, true).total;
        };
        res["importance_loss"] = training::grad_check(build, ps, 6, 1e-5, 1e-4, 3);
    }
    {
        LfdConfig lc;
        lc.width = 6, lc.window = 4, lc.hidden = 10, lc.dt = 0.5, lc.heads = 2, lc.seed = 34;
        Lfd l(lc);
        jitter(l.params(), r, 0.2);
        std::vector<Mat> gs, zs;
        for (int k = 0; k < 3; ++k) gs.push_back(random_mat(1, 6, r)), zs.push_back(random_mat(5, 6, r));
        const Mat phi = random_mat(5, 1, r, 0.2, 1.0), tg = random_mat(1, 6, r), tz = random_mat(5, 6, r);
        auto build = [&](ad::Tape& t) {
            std::vector<ad::Var> g, z;
            for (const auto& m : gs) g.push_back(t.constant(m));
            for (const auto& m : zs) z.push_back(t.constant(m));
            const auto s = l.step(t, g, z, phi);
            return ad::add(ad::mse(s.z_global, t.constant(tg)), ad::mse(s.z_local, t.constant(tz)));
        };
        res["lfd_step"] = training::grad_check(build, l.params(), 6, 1e-5, 1e-4, 4);
    }
    double worst = 0;
    std::string parts;
    for (const auto& [name, g] : res) {
        worst = std::max(worst, g.max_rel);
        o.data[name] = {{"max_rel", g.max_rel}, {"worst_param", g.worst_param}, {"checked", g.checked}};
        parts += (parts.empty() ? "" : ", ") + name + " " + fmt(g.max_rel, 2);
    }
    o.detail = "max relative deviation " + fmt(worst, 3) + " (" + parts + "; tol " + fmt(kGradTol) + ")";
    o.pass = worst <= kGradTol;
    return o;
}

// -- 4. simulator physics ------------------------------------------------------------

Outcome criterion_physics() {
    Outcome o;
    sim::FhnConfig c;
    c.dx = 1.5625;  // 64 x 64
    const std::size_t n = c.grid_n();
    std::mt19937_64 r(4004);
    std::normal_distribution<double> g(0.3, 1.0);

    auto mean = [](const std::vector<double>& v) {
        long double s = 0;
        for (double x : v) s += x;
        return double(s / (long double)v.size());
    };

    double cons = 0;
    {
        sim::FhnConfig d = c;
        d.reaction = false;
        sim::FhnStepper s(d);
        std::vector<double> u(n * n), v(n * n);
        for (auto& x : u) x = g(r);
        for (auto& x : v) x = g(r);
        const double mu = mean(u), mv = mean(v);
        for (int k = 0; k < 1000; ++k) s.step(u, v);
        cons = std::max(std::abs(mean(u) - mu) / std::abs(mu), std::abs(mean(v) - mv) / std::abs(mv));
    }
    double fixed = 0;
    {
        sim::FhnStepper s(c);
        const double f = std::cbrt(c.alpha);
        std::vector<double> u(n * n, f), v(n * n, f);
        for (int k = 0; k < 100; ++k) {
            std::vector<double> u0 = u, v0 = v;
            s.step(u, v);
            for (std::size_t i = 0; i < u.size(); ++i)
                fixed = std::max({fixed, std::abs(u[i] - u0[i]), std::abs(v[i] - v0[i])});
        }
    }
    double decay = 0;
    {
        sim::FhnConfig d = c;
        d.reaction = false;
        sim::FhnStepper s(d);
        const double L = 2 * d.half_width;
        const int modes[][2] = {{1, 0}, {3, 2}, {0, 5}, {7, 4}};
        for (const auto& m : modes) {
            const double kx = 2 * std::numbers::pi * m[0] / L, ky = 2 * std::numbers::pi * m[1] / L;
            std::vector<double> u(n * n), v(n * n);
            for (std::size_t iy = 0; iy < n; ++iy)
                for (std::size_t ix = 0; ix < n; ++ix) {
                    const double ph = kx * d.dx * double(ix) + ky * d.dx * double(iy);
                    u[iy * n + ix] = std::cos(ph);
                    v[iy * n + ix] = std::sin(ph);
                }
            const auto u0 = u, v0 = v;
            s.step(u, v);
            const double k2 = kx * kx + ky * ky;
            const double fu = std::exp(-d.mu_u * k2 * d.dt), fv = std::exp(-d.mu_v * k2 * d.dt);
            for (std::size_t i = 0; i < u.size(); ++i)
                decay = std::max({decay, std::abs(u[i] - fu * u0[i]), std::abs(v[i] - fv * v0[i])});
        }
    }
    o.data = {{"grid", n}, {"mean_conservation_rel", cons}, {"fixed_point_max_step_change", fixed}, {"mode_decay_max_err", decay}};
    o.detail = "grid " + std::to_string(n) + "^2: mean drift " + fmt(cons, 3) + " (tol " + fmt(kMeanConservationTol) +
               "), fixed point " + fmt(fixed, 3) + " (tol " + fmt(kFixedPointTol) + "), mode decay " + fmt(decay, 3) +
               " (tol " + fmt(kModeDecayTol) + ")";
    o.pass = cons <= kMeanConservationTol && fixed <= kFixedPointTol && decay <= kModeDecayTol;
    return o;
}

// -- 5. metric identities -------------------------------------------------------------

Outcome criterion_metrics() {
    Outcome o;
    std::mt19937_64 r(5005);
    std::uniform_real_distribution<double> up(1e-6, 1.0);
    std::vector<double> p(40), p10(40);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = up(r), p10[i] = 10.0 * p[i];
    const double lsd = metrics::lsd(p, p10).value;

    std::vector<double> a(16, 0.0), b(16, 0.0);
    for (std::size_t i = 0; i < 8; ++i) a[i] = 1.0 / 8, b[8 + i] = 1.0 / 8;
    const double jsd = metrics::jsd(a, b);

    const std::vector<double> pred{3, 0}, truth{3, 4};
    const double rl2 = metrics::rel_l2(pred, truth);

    const std::size_t n = 48;
    std::normal_distribution<double> g(1.0, 2.0);
    std::vector<double> f(n * n);
    for (auto& x : f) x = g(r);
    const double var = [&] {
        const double m = mean_of(f);
        double s = 0;
        for (double x : f) s += (x - m) * (x - m);
        return s / double(f.size());
    }();
    const double parseval = std::abs(metrics::energy_spectrum(f, {n, n}).total_power - var) / var;

    double corr = 0;
    const std::size_t nc = 128;
    for (int m : {1, 2, 4, 8}) {
        std::vector<double> c(nc);
        const double k = 2 * std::numbers::pi * m / double(nc);
        for (std::size_t i = 0; i < nc; ++i) c[i] = std::cos(k * double(i));
        const double expect = std::acos(std::exp(-1.0)) / k;
        corr = std::max(corr, std::abs(metrics::spatial_corr_length(c, {nc}).length - expect) / expect);
    }
    o.data = {{"lsd_p_10p", lsd}, {"jsd_disjoint", jsd}, {"rel_l2", rl2}, {"parseval_rel", parseval}, {"corr_length_rel", corr}};
    o.detail = "LSD " + fmt(lsd, 17) + ", JSD-ln2 " + fmt(jsd - std::log(2.0), 3) + ", rel_l2 " + fmt(rl2, 17) +
               ", Parseval " + fmt(parseval, 3) + ", g_r rel err " + fmt(corr, 3);
    o.pass = lsd == 1.0 && std::abs(jsd - std::log(2.0)) <= kJsdTol && std::abs(rl2 - 0.8) <= kRelL2Tol &&
             parseval <= kParsevalTol && corr <= kCorrLengthTol;
    return o;
}

// -- shared training budget ---------------------------------------------------------------

struct Budget {
    double scale = 1.0;  // < 1 only in --quick smoke runs
    std::size_t steps(std::size_t n) const { return std::max<std::size_t>(5, std::size_t(double(n) * scale)); }
};

ModelConfig model_config(const dataio::FieldDataset& ds, DecoderMode mode, std::uint64_t seed) {
    ModelConfig mc;
    mc.encoder.n_d = ds.n_d;
    mc.encoder.n_c = ds.n_c;
    mc.encoder.width = 32;
    mc.importance.n_d = ds.n_d;
    mc.mode = mode;
    mc.seed = seed;
    return mc;
}

// -- 6, 7. FHN mechanism ordering and sensor scaling ---------------------------------------

struct FhnStudy {
    dataio::FieldDataset ds;
    dataio::Split split;
    std::map<std::string, std::vector<double>> err64;        // variant -> per seed
    std::vector<std::vector<double>> scaling;                 // seed -> per sensor count
    std::vector<std::unique_ptr<GluModel>> adaptive;          // per seed, kept for 8 and 10
    std::vector<double> cv;                                   // importance CV per seed
    double seconds = 0.0;
    bool ready = false;
};

constexpr std::uint64_t kEvalSensorSeed = 777;
constexpr std::size_t kEvalStride = 5;

dataio::FieldDataset fhn_dataset(std::size_t cases) {
    sim::FhnConfig c;
    c.dx = 1.5625;
    c.burn_in = 1000;
    c.seed = 60;
    return sim::generate_fhn(c, cases, {});
}

void run_fhn_study(FhnStudy& st, const Budget& b) {
    const auto t0 = Clock::now();
    st.ds = fhn_dataset(24);
    st.split = dataio::split_cases(st.ds);
    training::TrainConfig tc;
    tc.steps_stage1 = b.steps(1500);
    tc.queries_per_step = 256;
    tc.sensors_min = 16;
    tc.sensors_max = 256;
    tc.log_every = 100;
    for (auto mode : {DecoderMode::adaptive, DecoderMode::uniform, DecoderMode::global_only}) {
        for (std::size_t s = 0; s < kSeeds; ++s) {
            auto model = std::make_unique<GluModel>(model_config(st.ds, mode, 100 + s));
            tc.seed = 200 + s;
            const auto rep = training::train_stage1(*model, st.ds, st.split.train, tc);
            if (rep.diverged) throw std::runtime_error("training diverged: " + rep.diagnostics);
            const auto e = eval::evaluate_reconstruction(*model, st.ds, st.split.test, 64, kEvalSensorSeed, kEvalStride);
            st.err64[to_string(mode)].push_back(e.mean);
            std::cout << "  fhn " << to_string(mode) << " seed " << s << ": rel_l2@64 " << fmt(e.mean) << " ("
                      << fmt(rep.seconds, 3) << " s)\n"
                      << std::flush;
            if (mode == DecoderMode::adaptive) {
                std::vector<double> curve;
                for (std::size_t n : kSensorCounts)
                    curve.push_back(n == 64 ? e.mean
                                            : eval::evaluate_reconstruction(*model, st.ds, st.split.test, n,
                                                                            kEvalSensorSeed, kEvalStride)
                                                  .mean);
                st.scaling.push_back(curve);
                st.cv.push_back(eval::coefficient_of_variation(eval::importance_map(*model, st.ds)));
                st.adaptive.push_back(std::move(model));
            }
        }
    }
    st.seconds = seconds_since(t0);
    st.ready = true;
}

Outcome criterion_mechanism(const FhnStudy& st) {
    Outcome o;
    const auto& g = st.err64.at("adaptive");
    const double mg = mean_of(g);
    bool pass = st.seconds <= kMechanismSeconds && st.ds.n_cases >= 20;
    std::string detail = "seed-mean rel_l2@64: adaptive " + fmt(mg);
    for (const char* other : {"uniform", "global_only"}) {
        const auto& v = st.err64.at(other);
        const double mo = mean_of(v);
        const double pooled = std::sqrt(0.5 * (stddev_of(g) * stddev_of(g) + stddev_of(v) * stddev_of(v)));
        const bool ok = mg < mo && (mo - mg) > pooled;
        pass = pass && ok;
        detail += std::string(", ") + other + " " + fmt(mo) + " (gap " + fmt(mo - mg, 3) + " vs pooled sd " +
                  fmt(pooled, 3) + (ok ? "" : ", not separated") + ")";
        o.data[other] = {{"per_seed", v}, {"mean", mo}, {"pooled_sd", pooled}, {"separated", ok}};
    }
    o.data["adaptive"] = {{"per_seed", g}, {"mean", mg}};
    o.data["cases"] = st.ds.n_cases;
    o.data["training_seconds"] = st.seconds;
    detail += "; " + std::to_string(st.ds.n_cases) + " cases, " + fmt(st.seconds / 60.0, 3) + " min for 9 models";
    o.detail = detail;
    o.pass = pass;
    return o;
}

Outcome criterion_scaling(const FhnStudy& st) {
    Outcome o;
    std::vector<double> curve(kSensorCounts.size(), 0.0);
    for (const auto& c : st.scaling)
        for (std::size_t i = 0; i < c.size(); ++i) curve[i] += c[i] / double(st.scaling.size());
    bool pass = true;
    std::string detail = "seed-mean rel_l2 at N=";
    for (std::size_t i = 0; i < curve.size(); ++i) {
        detail += (i ? ", " : "") + std::to_string(kSensorCounts[i]) + ":" + fmt(curve[i]);
        if (i > 0 && curve[i] > (1.0 + kScalingStepTol) * curve[i - 1]) pass = false;
    }
    o.data = {{"sensors", kSensorCounts}, {"seed_mean", curve}, {"per_seed", st.scaling}};
    o.detail = detail + " (one model per seed, trained on N in [16, 256])";
    o.pass = pass;
    return o;
}

// -- 8. forecasting stability ------------------------------------------------------------

struct ForecastStats {
    std::vector<double> h50;          // per seed, mean over test cases
    std::vector<double> div_step;     // per seed, mean over test cases
    bool finite = true, bounded = true;
    double worst_norm_ratio = 0.0;
};

std::unique_ptr<Propagator> make_prop(const std::string& kind, std::size_t width, std::uint64_t seed) {
    if (kind == "lfd") {
        LfdConfig c;
        c.width = width, c.window = 16, c.seed = seed;
        return std::make_unique<Lfd>(c);
    }
    CausalConfig c;
    c.width = width, c.window = 16, c.seed = seed;
    return std::make_unique<CausalTransformer>(c);
}

training::TrainConfig stage2_config(const Budget& b, std::uint64_t seed) {
    training::TrainConfig tc;
    tc.steps_stage2 = b.steps(400);
    tc.stage2_sensors = 64;
    tc.log_every = 100;
    tc.seed = seed;
    return tc;
}

void forecast_cases(GluModel& model, Propagator& prop, const dataio::FieldDataset& ds,
                    const std::vector<std::size_t>& cases, std::size_t horizon, std::uint64_t seed, ForecastStats& out) {
    std::vector<double> h50, div;
    for (std::size_t c : cases) {
        const auto task =
            sensing::make_forecast_task(ds, c, 0, 16, horizon, eval::eval_sensors(ds, c, 64, seed), seed);
        const auto r = eval::forecast(model, prop, ds, task);
        div.push_back(double(r.divergence_step));
        if (r.rel_l2.size() >= 50) h50.push_back(r.rel_l2[49]);
        const auto& tr = r.trajectory;
        if (tr.diverged_at >= 0 || tr.size() != tr.n_initial + horizon) out.finite = false;
        double w = 0, roll = 0;
        for (std::size_t i = 0; i < tr.size(); ++i) {
            const double m = std::max(tr.leader_rms[i], tr.follower_rms[i]);
            if (!std::isfinite(m)) out.finite = false;
            if (i < tr.n_initial) w = std::max(w, m);
            else roll = std::max(roll, m);
        }
        const double ratio = w > 0 ? roll / w : INFINITY;
        out.worst_norm_ratio = std::max(out.worst_norm_ratio, ratio);
        if (!(ratio <= kLatentNormFactor)) out.bounded = false;
    }
    out.h50.push_back(mean_of(h50));
    out.div_step.push_back(mean_of(div));
}

Outcome criterion_forecasting(FhnStudy& st, const Budget& b) {
    Outcome o;
    sim::AdvectionConfig ac;
    ac.seed = 80;
    const auto adv = sim::generate_advection(ac, 24, {});
    const auto split = dataio::split_cases(adv);
    std::map<std::string, ForecastStats> a_stats, f_stats;
    training::TrainConfig tc;
    tc.steps_stage1 = b.steps(1000);
    tc.queries_per_step = 256;
    tc.log_every = 100;
    for (std::size_t s = 0; s < kSeeds; ++s) {
        GluModel model(model_config(adv, DecoderMode::adaptive, 300 + s));
        tc.seed = 400 + s;
        const auto rep = training::train_stage1(model, adv, split.train, tc);
        if (rep.diverged) throw std::runtime_error("training diverged: " + rep.diagnostics);
        for (const std::string kind : {"lfd", "causal_transformer"}) {
            auto prop = make_prop(kind, 32, 500 + s);
            const auto r2 = training::train_stage2(*prop, model, adv, split.train, stage2_config(b, 600 + s));
            if (r2.diverged) throw std::runtime_error("stage 2 diverged: " + r2.diagnostics);
            forecast_cases(model, *prop, adv, split.test, 200, kEvalSensorSeed, a_stats[kind]);
            std::cout << "  advection " << kind << " seed " << s << ": h50 rel_l2 " << fmt(a_stats[kind].h50.back())
                      << " (" << fmt(r2.seconds, 3) << " s)\n"
                      << std::flush;
        }
    }
    const std::size_t fhn_h = st.ds.n_t - 16;
    for (std::size_t s = 0; s < kSeeds; ++s) {
        for (const std::string kind : {"lfd", "causal_transformer"}) {
            auto prop = make_prop(kind, 32, 700 + s);
            const auto r2 = training::train_stage2(*prop, *st.adaptive[s], st.ds, st.split.train, stage2_config(b, 800 + s));
            if (r2.diverged) throw std::runtime_error("stage 2 diverged: " + r2.diagnostics);
            forecast_cases(*st.adaptive[s], *prop, st.ds, st.split.test, fhn_h, kEvalSensorSeed, f_stats[kind]);
            std::cout << "  fhn " << kind << " seed " << s << ": divergence step " << fmt(f_stats[kind].div_step.back())
                      << " (" << fmt(r2.seconds, 3) << " s)\n"
                      << std::flush;
        }
    }
    const auto& al = a_stats["lfd"];
    const auto& ac_ = a_stats["causal_transformer"];
    const double h_lfd = mean_of(al.h50), h_ct = mean_of(ac_.h50);
    const double d_lfd = mean_of(f_stats["lfd"].div_step), d_ct = mean_of(f_stats["causal_transformer"].div_step);
    const bool stable = al.finite && al.bounded;
    o.pass = stable && h_lfd <= h_ct && d_lfd >= d_ct;
    o.detail = "advection LFD 200 steps " + std::string(al.finite ? "finite" : "NON-FINITE") + ", latent RMS ratio " +
               fmt(al.worst_norm_ratio, 3) + " (bound " + fmt(kLatentNormFactor) + "); h50 rel_l2 LFD " + fmt(h_lfd) +
               " vs causal " + fmt(h_ct) + "; FHN divergence step LFD " + fmt(d_lfd) + " vs causal " + fmt(d_ct) +
               " (censored at " + std::to_string(fhn_h) + ")";
    o.data = {{"advection", {{"lfd_h50", al.h50}, {"causal_h50", ac_.h50}, {"lfd_finite", al.finite},
                             {"lfd_norm_ratio", al.worst_norm_ratio}, {"causal_finite", ac_.finite}}},
              {"fhn", {{"lfd_divergence_step", f_stats["lfd"].div_step},
                       {"causal_divergence_step", f_stats["causal_transformer"].div_step},
                       {"horizon", fhn_h}}}};
    return o;
}

// -- 9. cost scaling --------------------------------------------------------------------

Outcome criterion_cost() {
    Outcome o;
    const bench::SweepGrid grid;
    const auto res = bench::sweep(grid);
    const double enc = res.summary["encoder_vs_N"]["loglog"]["slope"].get<double>();
    const double causal = res.summary["causal_vs_N"]["loglog"]["slope"].get<double>();

    // LFD affine in N: every point on the line through the first two
    bool affine = true;
    std::vector<std::uint64_t> lfd;
    for (auto n : grid.sensors) {
        bench::CostConfig c = grid.base;
        c.n_sensors = n;
        lfd.push_back(bench::count_lfd_cost(c).attention_scores);
    }
    const double slope = double(lfd[1] - lfd[0]) / double(grid.sensors[1] - grid.sensors[0]);
    for (std::size_t i = 0; i < lfd.size(); ++i)
        affine = affine && double(lfd[i]) == double(lfd[0]) + slope * double(grid.sensors[i] - grid.sensors[0]);

    // decoder peak: the n_q coefficient is independent of N and linear in K
    auto peak = [&](std::uint64_t n, std::uint64_t nq, std::uint64_t k) {
        bench::CostConfig c = grid.base;
        c.n_sensors = n, c.n_query = nq, c.k = k;
        return double(bench::count_decode_cost(c).peak_live);
    };
    auto per_query = [&](std::uint64_t n, std::uint64_t k) { return (peak(n, 4096, k) - peak(n, 256, k)) / 3840.0; };
    const bool n_free = per_query(64, 8) == per_query(4096, 8) && per_query(256, 16) == per_query(2048, 16);
    const double dk = (per_query(256, 32) - per_query(256, 8)) / 24.0;
    const bool k_linear = dk > 0 && per_query(256, 16) - per_query(256, 8) == dk * 8;

    bench::CostConfig spot = grid.base;
    spot.n_sensors = 256, spot.window = 16, spot.heads = 1;
    const std::uint64_t sv = bench::count_lfd_cost(spot).attention_scores;

    o.data = {{"encoder_slope", enc}, {"causal_slope", causal}, {"lfd_affine", affine}, {"lfd_slope", slope},
              {"decoder_peak_nq_coeff_independent_of_N", n_free}, {"decoder_peak_nq_coeff_per_K", dk},
              {"lfd_spot", sv}, {"sensors", grid.sensors}};
    o.detail = "encoder slope " + fmt(enc, 6) + ", causal slope " + fmt(causal, 6) + " (tol " + fmt(kSlopeTol) +
               "), LFD " + (affine ? "affine" : "NOT affine") + " in N, decoder peak per query " +
               (n_free ? "independent of N" : "DEPENDS on N") + " and " + fmt(dk) + " per K, spot " + std::to_string(sv);
    o.pass = std::abs(enc - 1.0) <= kSlopeTol && std::abs(causal - 2.0) <= kSlopeTol && affine && n_free && k_linear &&
             sv == kLfdSpotValue;
    return o;
}

// -- 10. importance localization ----------------------------------------------------------

Outcome criterion_localization(const FhnStudy& st, const Budget& b) {
    Outcome o;
    std::vector<double> ratios, cvs;
    training::TrainConfig tc;
    tc.steps_stage1 = b.steps(800);
    tc.queries_per_step = 256;
    tc.sensors_min = 32;
    tc.sensors_max = 128;
    tc.log_every = 100;
    for (std::size_t s = 0; s < kSeeds; ++s) {
        sim::LocalizedConfig lc;
        lc.seed = 90 + s;
        const auto ds = sim::generate_localized(lc, 24, {});
        const auto split = dataio::split_cases(ds);
        GluModel model(model_config(ds, DecoderMode::adaptive, 1000 + s));
        tc.seed = 1100 + s;
        const auto rep = training::train_stage1(model, ds, split.train, tc);
        if (rep.diverged) throw std::runtime_error("training diverged: " + rep.diagnostics);
        const auto phi = eval::importance_map(model, ds);
        const auto mask = sim::localized_active_mask(ds, lc);
        std::vector<double> in, out;
        for (std::size_t p = 0; p < phi.size(); ++p) (mask[p] ? in : out).push_back(phi[p]);
        ratios.push_back(mean_of(in) / mean_of(out));
        cvs.push_back(eval::coefficient_of_variation(phi));
        std::cout << "  localized seed " << s << ": inside/outside " << fmt(ratios.back()) << ", cv " << fmt(cvs.back())
                  << "\n"
                  << std::flush;
    }
    const double min_ratio = *std::min_element(ratios.begin(), ratios.end());
    const double cv_loc = mean_of(cvs), cv_fhn = mean_of(st.cv);
    o.data = {{"ratio_per_seed", ratios}, {"localized_cv_per_seed", cvs}, {"fhn_cv_per_seed", st.cv}};
    o.detail = "inside/outside phi ratio per seed";
    for (double r : ratios) o.detail += " " + fmt(r);
    o.detail += " (need >= " + fmt(kLocalizationRatio) + "); CV FHN " + fmt(cv_fhn) + " vs localized " + fmt(cv_loc);
    o.pass = min_ratio >= kLocalizationRatio && cv_fhn < cv_loc;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::vector<int> only;
    bool quick = false;
    std::string out;
    app.add_option("--only", only, "criteria to run (default: all)");
    app.add_flag("--quick", quick, "reduced training budgets for smoke runs; results are not meaningful");
    app.add_option("-o,--out", out, "write results JSON here");
    CLI11_PARSE(app, argc, argv);

    std::set<int> sel(only.begin(), only.end());
    if (sel.empty())
        for (int i = 1; i <= 10; ++i) sel.insert(i);
    Budget budget;
    if (quick) budget.scale = 0.05;

    std::map<int, Outcome> results;
    auto run = [&](int id, auto&& fn) {
        if (!sel.count(id)) return;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        o.seconds = seconds_since(t0);
        results[id] = o;
        std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << " ["
                  << fmt(o.seconds, 3) << " s]\n"
                  << std::flush;
    };

    std::cout << "kernel: " << kernels::active().name << (quick ? "  (quick mode: budgets scaled down)" : "") << "\n";
    run(1, [] {
        const auto t0 = Clock::now();
        auto o = criterion_selection();
        const double s = seconds_since(t0);
        if (s >= kSelectionSeconds) o.pass = false, o.detail += ", too slow";
        return o;
    });
    run(2, [] {
        const auto t0 = Clock::now();
        auto o = criterion_beta();
        if (seconds_since(t0) >= kBetaSeconds) o.pass = false, o.detail += ", too slow";
        return o;
    });
    run(3, [] {
        const auto t0 = Clock::now();
        auto o = criterion_gradients();
        if (seconds_since(t0) >= kGradSeconds) o.pass = false, o.detail += ", too slow";
        return o;
    });
    run(4, criterion_physics);
    run(5, criterion_metrics);

    FhnStudy study;
    const bool need_fhn = sel.count(6) || sel.count(7) || sel.count(8) || sel.count(10);
    std::string fhn_error;
    if (need_fhn) {
        try {
            std::cout << "training FHN reconstruction models (3 variants x 3 seeds)\n" << std::flush;
            run_fhn_study(study, budget);
        } catch (const std::exception& e) {
            fhn_error = e.what();
        }
    }
    auto with_fhn = [&](auto&& fn) {
        return [&, fn]() -> Outcome {
            if (!study.ready) throw std::runtime_error("FHN study failed: " + fhn_error);
            return fn();
        };
    };
    run(6, with_fhn([&] { return criterion_mechanism(study); }));
    run(7, with_fhn([&] { return criterion_scaling(study); }));
    run(8, with_fhn([&] { return criterion_forecasting(study, budget); }));
    run(9, criterion_cost);
    run(10, with_fhn([&] { return criterion_localization(study, budget); }));

    int failed = 0;
    json j{{"quick", quick}, {"criteria", json::object()}};
    for (const auto& [id, o] : results) {
        failed += !o.pass;
        j["criteria"][std::to_string(id)] = {{"pass", o.pass}, {"detail", o.detail}, {"seconds", o.seconds}, {"data", o.data}};
    }
    if (!out.empty()) {
        fs::create_directories(fs::path(out).parent_path().empty() ? fs::path(".") : fs::path(out).parent_path());
        std::ofstream(out) << j.dump(2) << "\n";
    }
    std::cout << results.size() - std::size_t(failed) << "/" << results.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}
