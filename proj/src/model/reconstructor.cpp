#include "glu/reconstructor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "glu/errors.hpp"
#include "glu/kernels.hpp"

namespace glu {

double warped_distance(std::span<const double> y, std::span<const double> x, double phi, double gamma, double eps) {
    if (y.size() != x.size()) throw std::invalid_argument("warped_distance: dimension mismatch");
    double acc = 0.0;
    for (std::size_t d = 0; d < y.size(); ++d) {
        const double diff = y[d] - x[d];
        acc = acc + diff * diff;
    }
    return std::sqrt(acc) / (std::pow(phi, gamma) + eps);
}

Neighbors select_neighbors(const Mat& queries, const Mat& sensor_x, std::span<const double> phi, std::size_t K,
                           double gamma, double eps) {
    const std::size_t n = sensor_x.rows(), dim = sensor_x.cols();
    if (n == 0) throw std::invalid_argument("select_neighbors: empty sensor set");
    if (K == 0) throw std::invalid_argument("select_neighbors: K must be >= 1");
    if (phi.size() != n) throw std::invalid_argument("select_neighbors: phi size does not match sensors");
    if (queries.cols() != dim) throw std::invalid_argument("select_neighbors: query dimension mismatch");

    std::vector<double> coords_dm(n * dim), scale(n), ones(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < dim; ++d) coords_dm[d * n + i] = sensor_x(i, d);
        scale[i] = std::pow(phi[i], gamma) + eps;
    }
    Neighbors nb;
    nb.n_q = queries.rows();
    nb.k = std::min(K, n);
    nb.idx.resize(nb.n_q * nb.k);
    nb.dist.resize(nb.n_q * nb.k);
    nb.geo.resize(nb.n_q * nb.k);
    const auto& kt = kernels::active();
    std::vector<double> d(n);
    std::vector<std::size_t> order(n);
    for (std::size_t j = 0; j < nb.n_q; ++j) {
        kt.warped_distance(queries.row(j).data(), dim, coords_dm.data(), scale.data(), n, d.data());
        std::iota(order.begin(), order.end(), 0);
        std::partial_sort(order.begin(), order.begin() + std::ptrdiff_t(nb.k), order.end(),
                          [&](std::size_t a, std::size_t b) { return d[a] < d[b] || (d[a] == d[b] && a < b); });
        for (std::size_t s = 0; s < nb.k; ++s) {
            const std::size_t i = order[s];
            nb.idx[j * nb.k + s] = i;
            nb.dist[j * nb.k + s] = d[i];
            double acc = 0.0;
            for (std::size_t c = 0; c < dim; ++c) {
                const double diff = queries(j, c) - sensor_x(i, c);
                acc = acc + diff * diff;
            }
            nb.geo[j * nb.k + s] = std::sqrt(acc);
        }
    }
    return nb;
}

ad::Var knn_aggregate(ad::Var proj, ad::Var phi, const Neighbors& nb, std::span<const double> sigma, double gamma,
                      double eps, std::vector<double>* weights_out) {
    const std::size_t n = proj.rows(), width = proj.cols(), k = nb.k, nq = nb.n_q;
    require_shape(phi.value(), n, 1, "knn_aggregate phi");
    if (sigma.size() != n) throw std::invalid_argument("knn_aggregate: sigma size does not match sensors");
    const Mat& P = proj.value();
    const Mat& F = phi.value();
    Mat out(nq, width);
    std::vector<double> w(nq * k);
    std::vector<double> logit(k);
    for (std::size_t j = 0; j < nq; ++j) {
        double mx = -INFINITY;
        for (std::size_t s = 0; s < k; ++s) {
            const std::size_t i = nb.idx[j * k + s];
            const double d = nb.geo[j * k + s] / (std::pow(F[i], gamma) + eps);
            logit[s] = -d / sigma[i];
            mx = std::max(mx, logit[s]);
        }
        double z = 0.0;
        for (std::size_t s = 0; s < k; ++s) z += (w[j * k + s] = std::exp(logit[s] - mx));
        for (std::size_t s = 0; s < k; ++s) {
            w[j * k + s] /= z;
            const std::size_t i = nb.idx[j * k + s];
            kernels::active().axpy(w[j * k + s] * F[i], P.row(i).data(), &out(j, 0), width);
        }
    }
    op_counters().aggregation_terms += nq * k;
    // Live decode intermediates: one distance scratch row, the per-query
    // neighbor index / distance / weight arrays and the aggregated features.
    auto& oc = op_counters();
    oc.peak_live_elements = std::max<std::uint64_t>(oc.peak_live_elements, n + 3 * nq * k + nq * width);
    if (weights_out) *weights_out = w;

    ad::Node* np = proj.node();
    ad::Node* nf = phi.node();
    ad::Var r = proj.tape()->make(std::move(out), proj.requires_grad() || phi.requires_grad(), nullptr);
    ad::Node* nr = r.node();
    if (nr->requires_grad) {
        std::vector<double> sig(sigma.begin(), sigma.end());
        nr->backward = [np, nf, nr, idx = nb.idx, geo = nb.geo, w = std::move(w),
                        sig = std::move(sig), k, nq, width, gamma, eps]() {
            const Mat& P = np->value;
            const Mat& F = nf->value;
            const Mat& G = nr->grad;
            const auto& kt = kernels::active();
            std::vector<double> c(k);
            for (std::size_t j = 0; j < nq; ++j) {
                const double* g = G.row(j).data();
                double cbar = 0.0;
                for (std::size_t s = 0; s < k; ++s) {
                    const std::size_t i = idx[j * k + s];
                    const double pg = kt.dot(P.row(i).data(), g, width);
                    c[s] = F[i] * pg;  // dL/dw
                    cbar += w[j * k + s] * c[s];
                    if (np->requires_grad) kt.axpy(w[j * k + s] * F[i], g, &np->g()(i, 0), width);
                    if (nf->requires_grad) nf->g()[i] += w[j * k + s] * pg;
                }
                if (!nf->requires_grad) continue;
                for (std::size_t s = 0; s < k; ++s) {
                    const std::size_t i = idx[j * k + s];
                    const double dl = w[j * k + s] * (c[s] - cbar);  // dL/dlogit
                    const double sc = std::pow(F[i], gamma) + eps;
                    // logit = -r / (sigma (phi^gamma + eps))
                    const double dlogit_dphi =
                        geo[j * k + s] * gamma * std::pow(F[i], gamma - 1.0) / (sig[i] * sc * sc);
                    nf->g()[i] += dl * dlogit_dphi;
                }
            }
        };
    }
    return r;
}

const char* to_string(DecoderMode m) {
    switch (m) {
        case DecoderMode::adaptive: return "adaptive";
        case DecoderMode::uniform: return "uniform";
        case DecoderMode::global_only: return "global_only";
    }
    return "?";
}

DecoderMode parse_decoder_mode(const std::string& s) {
    if (s == "adaptive") return DecoderMode::adaptive;
    if (s == "uniform") return DecoderMode::uniform;
    if (s == "global_only") return DecoderMode::global_only;
    throw std::invalid_argument("unknown decoder mode '" + s + "'");
}

void ReconstructorConfig::validate() const {
    if (K < 1) throw ConfigError("reconstructor.K", "must be >= 1");
    if (!(sigma > 0.0)) throw ConfigError("reconstructor.sigma", "must be > 0");
    if (!(eps > 0.0)) throw ConfigError("reconstructor.eps", "must be > 0");
    if (!(gamma >= 0.0)) throw ConfigError("reconstructor.gamma", "must be >= 0");
    if (hidden < 1) throw ConfigError("reconstructor.hidden", "must be >= 1");
    if (!(log_var_max > log_var_min)) throw ConfigError("reconstructor.log_var_max", "must exceed log_var_min");
    for (double s : sigma_per_sensor)
        if (!(s > 0.0)) throw ConfigError("reconstructor.sigma_per_sensor", "entries must be > 0");
}

nlohmann::json ReconstructorConfig::to_json() const {
    nlohmann::json j = {{"K", K},         {"sigma", sigma},         {"gamma", gamma},
                        {"eps", eps},     {"hidden", hidden},       {"log_var_min", log_var_min},
                        {"log_var_max", log_var_max}};
    if (!sigma_per_sensor.empty()) j["sigma_per_sensor"] = sigma_per_sensor;
    return j;
}

ReconstructorConfig ReconstructorConfig::from_json(const nlohmann::json& j) {
    ReconstructorConfig c;
    c.K = j.value("K", c.K);
    c.sigma = j.value("sigma", c.sigma);
    c.gamma = j.value("gamma", c.gamma);
    c.eps = j.value("eps", c.eps);
    c.hidden = j.value("hidden", c.hidden);
    c.log_var_min = j.value("log_var_min", c.log_var_min);
    c.log_var_max = j.value("log_var_max", c.log_var_max);
    c.sigma_per_sensor = j.value("sigma_per_sensor", c.sigma_per_sensor);
    return c;
}

Reconstructor::Reconstructor(const ReconstructorConfig& cfg, const EncoderConfig& enc, Rng& rng)
    : proj("rec.proj", enc.width, enc.width, rng),
      fuse1("rec.fuse1", 2 * enc.width, cfg.hidden, rng),
      fuse2("rec.fuse2", cfg.hidden, cfg.hidden, rng),
      head_mean("rec.head_mean", cfg.hidden, enc.n_c, rng),
      head_log_var("rec.head_log_var", cfg.hidden, enc.n_c, rng),
      cfg_(cfg) {
    cfg_.validate();
}

std::pair<ad::Var, ad::Var> Reconstructor::fuse(ad::Tape& t, ad::Var f_plus_p, ad::Var z_global) {
    ad::Var in = ad::concat_cols(f_plus_p, ad::broadcast_rows(z_global, f_plus_p.rows()));
    ad::Var h = ad::gelu(fuse2(t, ad::gelu(fuse1(t, in))));
    ad::Var log_var = ad::clamp(head_log_var(t, h), cfg_.log_var_min, cfg_.log_var_max);
    return {head_mean(t, h), log_var};
}

DecodeVars Reconstructor::decode(ad::Tape& t, Encoder& enc, const LatentVars& lat, ad::Var phi, const Mat& sensor_x,
                                 const Mat& queries, DecoderMode mode, const Neighbors* fixed) {
    DecodeVars out;
    ad::Var p = enc.fourier_embed(t, queries);
    ad::Var local = p;
    if (mode != DecoderMode::global_only) {
        const std::size_t n = sensor_x.rows();
        std::vector<double> sigma = cfg_.sigma_per_sensor;
        if (sigma.empty()) sigma.assign(n, cfg_.sigma);
        if (sigma.size() != n) throw std::invalid_argument("decode: sigma_per_sensor length does not match sensors");
        const Mat& ph = phi.value();
        out.neighbors = fixed ? *fixed
                              : select_neighbors(queries, sensor_x, std::span<const double>(ph.data(), ph.size()),
                                                 cfg_.K, cfg_.gamma, cfg_.eps);
        ad::Var f = knn_aggregate(proj(t, lat.z_local), phi, out.neighbors, sigma, cfg_.gamma, cfg_.eps, &out.weights);
        local = ad::add(f, p);
    }
    std::tie(out.mean, out.log_var) = fuse(t, local, lat.z_global);
    return out;
}

void Reconstructor::collect(ParamList& out) {
    proj.collect(out);
    fuse1.collect(out);
    fuse2.collect(out);
    head_mean.collect(out);
    head_log_var.collect(out);
}

}  // namespace glu
