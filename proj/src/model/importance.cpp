#include "glu/importance.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "glu/errors.hpp"

namespace glu::importance {

using boost::math::digamma;
using boost::math::trigamma;

double log_beta_fn(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

double posterior_mean(double a, double b) { return a / (a + b); }

double beta_variance(double a, double b) {
    const double s = a + b;
    return a * b / (s * s * (s + 1.0));
}

double kl_beta(double a, double b, double a0, double b0) {
    return log_beta_fn(a0, b0) - log_beta_fn(a, b) + (a - a0) * digamma(a) + (b - b0) * digamma(b) +
           (a0 - a + b0 - b) * digamma(a + b);
}

double beta_entropy(double a, double b) {
    return log_beta_fn(a, b) - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b) + (a + b - 2.0) * digamma(a + b);
}

std::pair<double, double> kl_beta_grad(double a, double b, double a0, double b0) {
    const double t = (a0 - a + b0 - b) * trigamma(a + b);
    return {(a - a0) * trigamma(a) + t, (b - b0) * trigamma(b) + t};
}

std::pair<double, double> beta_entropy_grad(double a, double b) {
    const double t = (a + b - 2.0) * trigamma(a + b);
    return {-(a - 1.0) * trigamma(a) + t, -(b - 1.0) * trigamma(b) + t};
}

std::pair<double, double> beta_sample_grad(double phi, double a, double b) {
    const double pdf = boost::math::ibeta_derivative(a, b, phi);
    if (!(pdf > 0.0) || !std::isfinite(pdf)) return {0.0, 0.0};
    // dF/da and dF/db by central differences of the regularized incomplete beta.
    const double ha = 1e-5 * a, hb = 1e-5 * b;
    const double dfa = (boost::math::ibeta(a + ha, b, phi) - boost::math::ibeta(a - ha, b, phi)) / (2.0 * ha);
    const double dfb = (boost::math::ibeta(a, b + hb, phi) - boost::math::ibeta(a, b - hb, phi)) / (2.0 * hb);
    return {-dfa / pdf, -dfb / pdf};
}

double sample_beta(double a, double b, Rng& rng) {
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    const double x = ga(rng), y = gb(rng);
    double phi = x + y > 0.0 ? x / (x + y) : 0.5;
    return std::clamp(phi, 1e-12, 1.0 - 1e-12);
}

std::vector<double> uncertainty_target(const std::vector<double>& sigma2) {
    if (sigma2.empty()) throw std::invalid_argument("uncertainty_target: empty field");
    const auto [lo, hi] = std::minmax_element(sigma2.begin(), sigma2.end());
    std::vector<double> u(sigma2.size(), 0.0);
    const double range = *hi - *lo;
    if (!(range > 0.0)) return u;
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = (sigma2[i] - *lo) / range;
    return u;
}

namespace {

void check_pair(const ad::Var& a, const ad::Var& b, const char* what) {
    if (a.cols() != 1 || !a.value().same_shape(b.value()))
        throw std::invalid_argument(std::string(what) + ": alpha/beta must be matching [n,1] columns");
}

// Elementwise binary op with per-element partials (da, db) cached at forward time.
template <class F>
ad::Var binary_op(ad::Var a, ad::Var b, F f) {
    const std::size_t n = a.rows();
    Mat out(n, 1), pa(n, 1), pb(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        const auto [v, da, db] = f(a.value()[i], b.value()[i]);
        out[i] = v, pa[i] = da, pb[i] = db;
    }
    ad::Node* na = a.node();
    ad::Node* nb = b.node();
    ad::Var r = a.tape()->make(std::move(out), a.requires_grad() || b.requires_grad(), nullptr);
    ad::Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [na, nb, nr, pa = std::move(pa), pb = std::move(pb)]() {
            for (std::size_t i = 0; i < pa.size(); ++i) {
                if (na->requires_grad) na->g()[i] += nr->grad[i] * pa[i];
                if (nb->requires_grad) nb->g()[i] += nr->grad[i] * pb[i];
            }
        };
    }
    return r;
}

struct Triple {
    double v, da, db;
};

}  // namespace

ad::Var posterior_mean(ad::Var a, ad::Var b) {
    check_pair(a, b, "posterior_mean");
    return binary_op(a, b, [](double x, double y) {
        const double s = x + y;
        return Triple{x / s, y / (s * s), -x / (s * s)};
    });
}

ad::Var kl_beta(ad::Var a, ad::Var b, double a0, double b0) {
    check_pair(a, b, "kl_beta");
    return binary_op(a, b, [a0, b0](double x, double y) {
        const auto [da, db] = kl_beta_grad(x, y, a0, b0);
        return Triple{kl_beta(x, y, a0, b0), da, db};
    });
}

ad::Var beta_entropy(ad::Var a, ad::Var b) {
    check_pair(a, b, "beta_entropy");
    return binary_op(a, b, [](double x, double y) {
        const auto [da, db] = beta_entropy_grad(x, y);
        return Triple{beta_entropy(x, y), da, db};
    });
}

ad::Var sample_phi(ad::Var a, ad::Var b, Rng& rng) {
    check_pair(a, b, "sample_phi");
    const bool grad = a.tape()->recording() && (a.requires_grad() || b.requires_grad());
    return binary_op(a, b, [&rng, grad](double x, double y) {
        const double phi = sample_beta(x, y, rng);
        if (!grad) return Triple{phi, 0.0, 0.0};
        const auto [da, db] = beta_sample_grad(phi, x, y);
        return Triple{phi, da, db};
    });
}

void ImportanceConfig::validate() const {
    if (n_d < 1) throw ConfigError("importance.n_d", "must be >= 1");
    if (n_freq < 1) throw ConfigError("importance.n_freq", "must be >= 1");
    if (hidden < 1) throw ConfigError("importance.hidden", "must be >= 1");
    if (!(eps > 0.0)) throw ConfigError("importance.eps", "must be > 0");
    if (!(prior_alpha > 0.0)) throw ConfigError("importance.prior_alpha", "must be > 0");
    if (!(prior_beta > 0.0)) throw ConfigError("importance.prior_beta", "must be > 0");
    if (!(lambda_kl >= 0.0)) throw ConfigError("importance.lambda_kl", "must be >= 0");
    if (!(lambda_h >= 0.0)) throw ConfigError("importance.lambda_h", "must be >= 0");
    if (!(lambda_v >= 0.0)) throw ConfigError("importance.lambda_v", "must be >= 0");
    if (mc_samples < 1) throw ConfigError("importance.mc_samples", "must be >= 1");
}

nlohmann::json ImportanceConfig::to_json() const {
    return {{"n_d", n_d},
            {"n_freq", n_freq},
            {"hidden", hidden},
            {"freq_std", freq_std},
            {"eps", eps},
            {"prior_alpha", prior_alpha},
            {"prior_beta", prior_beta},
            {"lambda_kl", lambda_kl},
            {"lambda_h", lambda_h},
            {"lambda_v", lambda_v},
            {"flip_entropy_sign", flip_entropy_sign},
            {"flip_variance_sign", flip_variance_sign},
            {"mc_samples", mc_samples}};
}

ImportanceConfig ImportanceConfig::from_json(const nlohmann::json& j) {
    ImportanceConfig c;
    c.n_d = j.value("n_d", c.n_d);
    c.n_freq = j.value("n_freq", c.n_freq);
    c.hidden = j.value("hidden", c.hidden);
    c.freq_std = j.value("freq_std", c.freq_std);
    c.eps = j.value("eps", c.eps);
    c.prior_alpha = j.value("prior_alpha", c.prior_alpha);
    c.prior_beta = j.value("prior_beta", c.prior_beta);
    c.lambda_kl = j.value("lambda_kl", c.lambda_kl);
    c.lambda_h = j.value("lambda_h", c.lambda_h);
    c.lambda_v = j.value("lambda_v", c.lambda_v);
    c.flip_entropy_sign = j.value("flip_entropy_sign", c.flip_entropy_sign);
    c.flip_variance_sign = j.value("flip_variance_sign", c.flip_variance_sign);
    c.mc_samples = j.value("mc_samples", c.mc_samples);
    return c;
}

ImportanceNet::ImportanceNet(const ImportanceConfig& cfg, Rng& rng)
    : freq(nn::gaussian(cfg.n_freq, cfg.n_d, cfg.freq_std, rng)),
      l1("imp.l1", 2 * cfg.n_freq + cfg.n_d, cfg.hidden, rng),
      l2("imp.l2", cfg.hidden, cfg.hidden, rng),
      head_alpha("imp.head_alpha", cfg.hidden, 1, rng),
      head_beta("imp.head_beta", cfg.hidden, 1, rng),
      cfg_(cfg) {
    cfg_.validate();
    head_alpha.zero_init();
    head_beta.zero_init();
}

BetaParams ImportanceNet::params(ad::Tape& t, const Mat& x) {
    require_shape(x, x.rows(), cfg_.n_d, "importance coords");
    ad::Var feats = ad::concat_cols(ad::fourier_features(x, t.constant(freq)), t.constant(x));
    ad::Var h = ad::gelu(l2(t, ad::gelu(l1(t, feats))));
    const Mat eps(x.rows(), 1, cfg_.eps);
    ad::Var a = ad::add(ad::exp(head_alpha(t, h)), t.constant(eps));
    ad::Var b = ad::add(ad::exp(head_beta(t, h)), t.constant(eps));
    return {a, b};
}

Mat ImportanceNet::phi_bar(const Mat& x) {
    ad::Tape t(false);
    BetaParams q = params(t, x);
    return posterior_mean(q.alpha, q.beta).value();
}

void ImportanceNet::collect(ParamList& out) {
    l1.collect(out);
    l2.collect(out);
    head_alpha.collect(out);
    head_beta.collect(out);
}

LossTerms importance_loss(const Mat& u_target, const BetaParams& q, const ImportanceConfig& cfg, Rng& rng,
                          bool analytic_expectation) {
    if (cfg.mc_samples < 1) throw std::invalid_argument("importance_loss: mc_samples must be >= 1");
    const std::size_t n = q.alpha.rows();
    require_shape(u_target, n, 1, "uncertainty target");
    ad::Tape& t = *q.alpha.tape();
    ad::Var u = t.constant(u_target);

    ad::Var utility;
    if (analytic_expectation) {
        utility = ad::mean(ad::mul(u, posterior_mean(q.alpha, q.beta)));
    } else {
        std::vector<ad::Var> draws;
        std::vector<double> w(cfg.mc_samples, 1.0 / double(cfg.mc_samples));
        for (std::size_t s = 0; s < cfg.mc_samples; ++s)
            draws.push_back(ad::mean(ad::mul(u, sample_phi(q.alpha, q.beta, rng))));
        utility = ad::weighted_sum(draws, w);
    }
    ad::Var kl = ad::mean(kl_beta(q.alpha, q.beta, cfg.prior_alpha, cfg.prior_beta));
    ad::Var ent = ad::mean(beta_entropy(q.alpha, q.beta));
    ad::Var phi = posterior_mean(q.alpha, q.beta);
    ad::Var centered = ad::sub(phi, ad::broadcast_rows(ad::mean_rows(phi), n));
    ad::Var var = ad::mean(ad::square(centered));

    const double sh = cfg.flip_entropy_sign ? 1.0 : -1.0;
    const double sv = cfg.flip_variance_sign ? 1.0 : -1.0;
    const std::vector<ad::Var> terms{utility, kl, ent, var};
    const std::vector<double> weights{-1.0, cfg.lambda_kl, sh * cfg.lambda_h, sv * cfg.lambda_v};
    LossTerms out;
    out.total = ad::weighted_sum(terms, weights);
    out.utility = utility.item();
    out.kl = kl.item();
    out.entropy = ent.item();
    out.variance = var.item();
    out.weighted = out.total.item();
    return out;
}

}  // namespace glu::importance
