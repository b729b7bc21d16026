#include "glu/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "glu/errors.hpp"

namespace glu {

void CausalConfig::validate() const {
    if (width < 1) throw ConfigError("causal.width", "must be >= 1");
    if (window < 1) throw ConfigError("causal.window", "must be >= 1");
    if (!(dt > 0.0)) throw ConfigError("causal.dt", "must be > 0");
    if (heads < 1 || width % heads != 0) throw ConfigError("causal.heads", "must divide width");
    if (hidden < 1) throw ConfigError("causal.hidden", "must be >= 1");
    if (blocks < 1) throw ConfigError("causal.blocks", "must be >= 1");
}

nlohmann::json CausalConfig::to_json() const {
    return {{"width", width}, {"window", window}, {"dt", dt},        {"heads", heads},
            {"hidden", hidden}, {"blocks", blocks}, {"seed", seed}};
}

CausalConfig CausalConfig::from_json(const nlohmann::json& j) {
    CausalConfig c;
    c.width = j.value("width", c.width);
    c.window = j.value("window", c.window);
    c.dt = j.value("dt", c.dt);
    c.heads = j.value("heads", c.heads);
    c.hidden = j.value("hidden", c.hidden);
    c.blocks = j.value("blocks", c.blocks);
    c.seed = j.value("seed", c.seed);
    return c;
}

std::vector<std::uint8_t> frame_causal_mask(std::size_t frames, std::size_t per_frame) {
    const std::size_t n = frames * per_frame;
    std::vector<std::uint8_t> m(n * n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m[i * n + j] = (j / per_frame) <= (i / per_frame) ? 1 : 0;
    return m;
}

CausalTransformer::CausalTransformer(const CausalConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(derive_seed(cfg.seed, 13));
    frame_embed = Param("ct.frame_embed", nn::gaussian(cfg.window, cfg.width, 0.02, rng));
    type_embed = Param("ct.type_embed", nn::gaussian(2, cfg.width, 0.02, rng));
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
        const std::string p = "ct.block" + std::to_string(b);
        blocks.push_back(Block{nn::LayerNorm(p + ".ln1", cfg.width), nn::LayerNorm(p + ".ln2", cfg.width),
                               nn::Attention(p + ".attn", cfg.width, cfg.heads, rng),
                               nn::Mlp(p + ".mlp", cfg.width, cfg.hidden, cfg.width, rng)});
    }
    ln_out = nn::LayerNorm("ct.ln_out", cfg.width);
    head = nn::Linear("ct.head", cfg.width, cfg.width, rng);
    head.zero_init();
}

ad::Var CausalTransformer::encode_window(ad::Tape& t, std::span<const ad::Var> g_hist, std::span<const ad::Var> z_hist) {
    if (g_hist.empty() || g_hist.size() != z_hist.size())
        throw std::invalid_argument("CausalTransformer: history windows must be nonempty and equally long");
    if (g_hist.size() > cfg_.window) {
        g_hist = g_hist.subspan(g_hist.size() - cfg_.window);
        z_hist = z_hist.subspan(z_hist.size() - cfg_.window);
    }
    const std::size_t frames = g_hist.size(), n = z_hist[0].rows(), per = n + 1;
    ad::Var fe = t.param(frame_embed);
    ad::Var te = t.param(type_embed);
    ad::Var te_leader = ad::slice_rows(te, 0, 1);
    ad::Var te_follow = ad::broadcast_rows(ad::slice_rows(te, 1, 2), n);
    std::vector<ad::Var> tokens;
    // Frame embeddings are aligned to the end of the context so the newest
    // frame always carries the same position.
    const std::size_t offset = cfg_.window - frames;
    for (std::size_t f = 0; f < frames; ++f) {
        ad::Var pos = ad::slice_rows(fe, offset + f, offset + f + 1);
        tokens.push_back(ad::add(ad::add(g_hist[f], te_leader), pos));
        tokens.push_back(ad::add_rowvec(ad::add(z_hist[f], te_follow), pos));
    }
    ad::Var x = ad::concat_rows(tokens);
    const auto mask = frame_causal_mask(frames, per);
    for (auto& b : blocks) {
        ad::Var h = b.ln1(t, x);
        x = ad::add(x, b.attn(t, h, h, nullptr, &mask));
        x = ad::add(x, b.mlp(t, b.ln2(t, x)));
    }
    return head(t, ln_out(t, x));
}

std::vector<std::pair<ad::Var, ad::Var>> CausalTransformer::derivatives(ad::Tape& t, std::span<const ad::Var> g_hist,
                                                                        std::span<const ad::Var> z_hist) {
    ad::Var out = encode_window(t, g_hist, z_hist);
    const std::size_t frames = std::min(g_hist.size(), cfg_.window), per = z_hist[0].rows() + 1;
    std::vector<std::pair<ad::Var, ad::Var>> f;
    for (std::size_t k = 0; k < frames; ++k)
        f.emplace_back(ad::slice_rows(out, k * per, k * per + 1), ad::slice_rows(out, k * per + 1, (k + 1) * per));
    return f;
}

StepVars CausalTransformer::step(ad::Tape& t, std::span<const ad::Var> g_hist, std::span<const ad::Var> z_hist,
                                 const Mat&) {
    auto f = derivatives(t, g_hist, z_hist);
    StepVars s;
    s.f_global = f.back().first;
    s.f_local = f.back().second;
    s.z_global = euler_step(g_hist.back(), s.f_global, cfg_.dt);
    s.z_local = euler_step(z_hist.back(), s.f_local, cfg_.dt);
    return s;
}

ParamList CausalTransformer::params() {
    ParamList p{&frame_embed, &type_embed};
    for (auto& b : blocks) {
        b.ln1.collect(p);
        b.ln2.collect(p);
        b.attn.collect(p);
        b.mlp.collect(p);
    }
    ln_out.collect(p);
    head.collect(p);
    return p;
}

void CausalTransformer::save(const std::filesystem::path& dir, const std::string& tag) {
    save_params(dir, params(), tag);
    std::ofstream(dir / "dynamics_config.json")
        << nlohmann::json{{"kind", "causal_transformer"}, {"config", cfg_.to_json()}}.dump(2) << "\n";
}

void CausalTransformer::load(const std::filesystem::path& dir) { load_params(dir, params()); }

// -- POD-GPR --------------------------------------------------------------------

PodBasis pod_fit(const Eigen::MatrixXd& snapshots, std::size_t r) {
    const auto n = std::size_t(snapshots.rows());
    if (n == 0) throw std::invalid_argument("pod_fit: no snapshots");
    if (r < 1 || r > n) throw std::invalid_argument("pod_fit: rank must be in [1, n_snapshots]");
    PodBasis b;
    b.mean = snapshots.colwise().mean().transpose();
    const Eigen::MatrixXd centered = snapshots.rowwise() - b.mean.transpose();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    b.singular_values = svd.singularValues();
    b.rank = std::min<std::size_t>(r, std::size_t(svd.matrixV().cols()));
    b.modes = svd.matrixV().leftCols(Eigen::Index(b.rank));
    return b;
}

Eigen::VectorXd pod_project(const PodBasis& b, const Eigen::VectorXd& field) {
    return b.modes.transpose() * (field - b.mean);
}

Eigen::VectorXd pod_reconstruct(const PodBasis& b, const Eigen::VectorXd& coeffs) { return b.mean + b.modes * coeffs; }

namespace {

Eigen::MatrixXd se_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double ell) {
    Eigen::MatrixXd k(a.rows(), b.rows());
    const double inv = 1.0 / (2.0 * ell * ell);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.rows(); ++j) k(i, j) = std::exp(-(a.row(i) - b.row(j)).squaredNorm() * inv);
    return k;
}

double median_pairwise_distance(const Eigen::MatrixXd& x) {
    std::vector<double> d;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = i + 1; j < x.rows(); ++j) d.push_back((x.row(i) - x.row(j)).norm());
    if (d.empty()) return 1.0;
    auto mid = d.begin() + std::ptrdiff_t(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    return *mid > 0.0 ? *mid : 1.0;
}

}  // namespace

PodGpr pod_gpr_fit(const PodBasis& basis, const Eigen::MatrixXd& snapshots, const Eigen::MatrixXd& inputs,
                   const GprOptions& opt) {
    if (snapshots.rows() != inputs.rows()) throw std::invalid_argument("pod_gpr_fit: snapshot/input count mismatch");
    PodGpr g;
    g.basis = basis;
    g.train_inputs = inputs;
    g.noise = opt.noise;
    g.length_scale = opt.length_scale > 0.0 ? opt.length_scale : median_pairwise_distance(inputs);
    Eigen::MatrixXd targets(snapshots.rows(), Eigen::Index(basis.rank));
    for (Eigen::Index i = 0; i < snapshots.rows(); ++i)
        targets.row(i) = pod_project(basis, snapshots.row(i).transpose()).transpose();
    Eigen::MatrixXd k = se_kernel(inputs, inputs, g.length_scale);
    k.diagonal().array() += g.noise;
    double jitter = 0.0;
    for (int attempt = 0; attempt < 12; ++attempt) {
        Eigen::MatrixXd kj = k;
        kj.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(kj);
        if (llt.info() == Eigen::Success) {
            g.alpha = llt.solve(targets);
            g.jitter = jitter;
            return g;
        }
        jitter = jitter == 0.0 ? 1e-10 * std::max(1.0, k.diagonal().mean()) : jitter * 10.0;
        g.log.push_back("kernel matrix not positive definite; retrying with jitter " + std::to_string(jitter));
    }
    throw NumericalError("pod_gpr_fit: kernel matrix could not be factorized");
}

Eigen::VectorXd PodGpr::predict_coeffs(const Eigen::VectorXd& input) const {
    const Eigen::MatrixXd ks = se_kernel(input.transpose(), train_inputs, length_scale);
    return (ks * alpha).transpose();
}

Eigen::VectorXd PodGpr::reconstruct(const Eigen::VectorXd& input) const {
    return pod_reconstruct(basis, predict_coeffs(input));
}

}  // namespace glu
