#pragma once
// Beta-distributed importance field phi(x) and its variational loss.

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "glu/nn.hpp"

namespace glu::importance {

// -- closed forms --------------------------------------------------------------
double log_beta_fn(double a, double b);
double posterior_mean(double a, double b);
double beta_variance(double a, double b);
/// KL(Beta(a, b) || Beta(a0, b0)) in nats.
double kl_beta(double a, double b, double a0, double b0);
/// Differential entropy of Beta(a, b) in nats.
double beta_entropy(double a, double b);
/// Partial derivatives (d/da, d/db) of the two closed forms above.
std::pair<double, double> kl_beta_grad(double a, double b, double a0, double b0);
std::pair<double, double> beta_entropy_grad(double a, double b);

/// Implicit reparameterization derivatives (d phi/d a, d phi/d b) of a
/// Beta(a, b) sample located at phi.
std::pair<double, double> beta_sample_grad(double phi, double a, double b);
double sample_beta(double a, double b, Rng& rng);

/// Min-max normalization; a constant input maps to all zeros.
std::vector<double> uncertainty_target(const std::vector<double>& sigma2);

// -- differentiable ops (elementwise over [n, 1] columns) ----------------------
ad::Var posterior_mean(ad::Var a, ad::Var b);
ad::Var kl_beta(ad::Var a, ad::Var b, double a0, double b0);
ad::Var beta_entropy(ad::Var a, ad::Var b);
ad::Var sample_phi(ad::Var a, ad::Var b, Rng& rng);

struct ImportanceConfig {
    std::size_t n_d = 2;
    std::size_t n_freq = 16;
    std::size_t hidden = 64;
    double freq_std = 1.0;
    double eps = 1e-4;  // floor added to exp() of each head

    double prior_alpha = 1.0, prior_beta = 1.0;
    double lambda_kl = 1e-3, lambda_h = 1e-4, lambda_v = 1e-3;
    // The printed objective subtracts both the entropy and the spatial-variance
    // terms; setting a flag reverses that term's sign.
    bool flip_entropy_sign = false;
    bool flip_variance_sign = false;
    std::size_t mc_samples = 4;

    void validate() const;
    nlohmann::json to_json() const;
    static ImportanceConfig from_json(const nlohmann::json& j);
};

struct BetaParams {
    ad::Var alpha, beta;  // [n, 1]
};

/// Coordinate network x -> (alpha(x), beta(x)) = exp(heads) + eps. Heads
/// start at zero, so the untrained field is Beta(1+eps, 1+eps) everywhere.
class ImportanceNet {
public:
    ImportanceNet() = default;
    ImportanceNet(const ImportanceConfig& cfg, Rng& rng);

    const ImportanceConfig& config() const { return cfg_; }
    BetaParams params(ad::Tape& t, const Mat& x);
    /// phi_bar evaluated at x as a constant matrix [n, 1] (no tape kept).
    Mat phi_bar(const Mat& x);
    void collect(ParamList& out);

    Mat freq;  // fixed Fourier frequencies [n_freq, n_d]
    nn::Linear l1, l2, head_alpha, head_beta;

private:
    ImportanceConfig cfg_;
};

struct LossTerms {
    ad::Var total;
    double utility = 0.0;   // E_q[mean U phi]
    double kl = 0.0;        // mean KL to the prior
    double entropy = 0.0;   // mean entropy
    double variance = 0.0;  // spatial variance of phi_bar
    double weighted = 0.0;  // value of total
};

/// L_phi over points Omega. With `analytic_expectation` the Monte-Carlo
/// utility term is replaced by its closed form mean(U phi_bar).
LossTerms importance_loss(const Mat& u_target, const BetaParams& q, const ImportanceConfig& cfg, Rng& rng,
                          bool analytic_expectation = false);

}  // namespace glu::importance
