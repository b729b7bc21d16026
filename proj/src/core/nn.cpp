#include "glu/nn.hpp"

#include <cmath>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "glu/binio.hpp"
#include "glu/errors.hpp"

namespace glu {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(seed) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

OpCounters& op_counters() {
    thread_local OpCounters c;
    return c;
}

namespace nn {

Mat xavier(std::size_t fan_in, std::size_t fan_out, Rng& rng, double gain) {
    const double a = gain * std::sqrt(6.0 / double(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    Mat m(fan_in, fan_out);
    for (auto& v : m.vec()) v = u(rng);
    return m;
}

Mat gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
    std::normal_distribution<double> n(0.0, stddev);
    Mat m(rows, cols);
    for (auto& v : m.vec()) v = n(rng);
    return m;
}

Linear::Linear(std::string name, std::size_t in, std::size_t out, Rng& rng, double gain)
    : w(name + ".w", xavier(in, out, rng, gain)), b(name + ".b", Mat(1, out)) {}

ad::Var Linear::operator()(ad::Tape& t, ad::Var x) { return ad::linear(x, t.param(w), t.param(b)); }

void Linear::zero_init() {
    w.value.fill(0.0);
    b.value.fill(0.0);
}

LayerNorm::LayerNorm(std::string name, std::size_t width, double e)
    : gain(name + ".gain", Mat(1, width, 1.0)), bias(name + ".bias", Mat(1, width)), eps(e) {}

ad::Var LayerNorm::operator()(ad::Tape& t, ad::Var x) {
    return ad::layer_norm(x, t.param(gain), t.param(bias), eps);
}

Mlp::Mlp(std::string name, std::size_t width_in, std::size_t hidden, std::size_t width_out, Rng& rng)
    : in(name + ".in", width_in, hidden, rng), out(name + ".out", hidden, width_out, rng) {}

ad::Var Mlp::operator()(ad::Tape& t, ad::Var x) { return out(t, ad::gelu(in(t, x))); }

Attention::Attention(std::string name, std::size_t width, std::size_t h, Rng& rng)
    : q(name + ".q", width, width, rng),
      k(name + ".k", width, width, rng),
      v(name + ".v", width, width, rng),
      o(name + ".o", width, width, rng),
      heads(h) {
    if (h == 0 || width % h != 0) throw std::invalid_argument(name + ": width must be divisible by heads");
}

ad::Var Attention::operator()(ad::Tape& t, ad::Var queries, ad::Var keys_values, const Mat* key_bias,
                              const std::vector<std::uint8_t>* mask) {
    const std::size_t width = queries.cols();
    const std::size_t dh = width / heads;
    const double inv_sqrt = 1.0 / std::sqrt(double(dh));
    ad::Var qq = q(t, queries);
    ad::Var kk = k(t, keys_values);
    ad::Var vv = v(t, keys_values);
    op_counters().attention_scores += std::uint64_t(heads) * queries.rows() * keys_values.rows();

    auto head = [&](ad::Var qh, ad::Var kh, ad::Var vh) {
        ad::Var s = ad::scale(ad::matmul_nt(qh, kh), inv_sqrt);
        if (key_bias) s = ad::add_rowvec(s, t.constant(*key_bias));
        return ad::matmul(ad::softmax_rows(s, mask), vh);
    };
    ad::Var out;
    if (heads == 1) {
        out = head(qq, kk, vv);
    } else {
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t c0 = h * dh, c1 = c0 + dh;
            ad::Var oh = head(ad::slice_cols(qq, c0, c1), ad::slice_cols(kk, c0, c1), ad::slice_cols(vv, c0, c1));
            out = h == 0 ? oh : ad::concat_cols(out, oh);
        }
    }
    return o(t, out);
}

std::size_t count_parameters(const ParamList& params) {
    std::size_t n = 0;
    for (const Param* p : params) n += p->value.size();
    return n;
}

}  // namespace nn

Adam::Adam(ParamList params, Options opt) : params_(std::move(params)), opt_(opt) {
    for (Param* p : params_) {
        m_.emplace_back(p->value.rows(), p->value.cols());
        v_.emplace_back(p->value.rows(), p->value.cols());
        if (!p->grad.same_shape(p->value)) p->zero_grad();
    }
}

double Adam::current_lr() const {
    const double total = double(std::max<std::size_t>(opt_.total_steps, 1));
    const double frac = std::min(1.0, double(t_) / total);
    const double cosf = 0.5 * (1.0 + std::cos(3.14159265358979323846 * frac));
    return opt_.lr * (opt_.lr_min_frac + (1.0 - opt_.lr_min_frac) * cosf);
}

double Adam::step(double grad_scale) {
    double sq = 0.0;
    for (Param* p : params_)
        for (double g : p->grad.vec()) sq += (g * grad_scale) * (g * grad_scale);
    const double norm = std::sqrt(sq);
    double clip = 1.0;
    if (opt_.clip_norm > 0.0 && norm > opt_.clip_norm) clip = opt_.clip_norm / norm;
    const double lr = current_lr();
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, double(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Param& p = *params_[i];
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const double g = p.grad[j] * grad_scale * clip;
            m_[i][j] = opt_.beta1 * m_[i][j] + (1.0 - opt_.beta1) * g;
            v_[i][j] = opt_.beta2 * v_[i][j] + (1.0 - opt_.beta2) * g * g;
            p.value[j] -= lr * (m_[i][j] / bc1) / (std::sqrt(v_[i][j] / bc2) + opt_.eps);
        }
    }
    zero_grad();
    return norm;
}

void Adam::zero_grad() {
    for (Param* p : params_) p->grad.fill(0.0);
}

void save_params(const std::filesystem::path& dir, const ParamList& params, const std::string& tag) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["format_version"] = 1;
    manifest["kind"] = "checkpoint";
    manifest["tag"] = tag;
    manifest["dtype"] = "float64";
    manifest["arrays"] = nlohmann::json::array();
    for (const Param* p : params) {
        const std::string file = p->name + ".f64";
        binio::write_le<double>(dir / file, p->value.vec());
        manifest["arrays"].push_back({{"name", p->name}, {"file", file}, {"shape", {p->value.rows(), p->value.cols()}}});
    }
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
}

void load_params(const std::filesystem::path& dir, const ParamList& params) {
    const auto mpath = dir / "manifest.json";
    if (!std::filesystem::exists(mpath)) throw NotFoundError("checkpoint not found: " + dir.string());
    nlohmann::json manifest;
    try {
        std::ifstream(mpath) >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("corrupt checkpoint manifest " + mpath.string() + ": " + e.what());
    }
    if (manifest.value("format_version", 0) != 1) throw FormatError("unknown checkpoint format version");
    std::unordered_map<std::string, nlohmann::json> by_name;
    for (const auto& a : manifest.at("arrays")) by_name[a.at("name").get<std::string>()] = a;
    for (Param* p : params) {
        auto it = by_name.find(p->name);
        if (it == by_name.end()) throw FormatError("checkpoint lacks parameter " + p->name);
        const auto shape = it->second.at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 2 || shape[0] != p->value.rows() || shape[1] != p->value.cols())
            throw FormatError("checkpoint shape mismatch for " + p->name);
        auto data = binio::read_le<double>(dir / it->second.at("file").get<std::string>(), p->value.size());
        p->value = Mat(shape[0], shape[1], std::move(data));
        p->zero_grad();
    }
}

}  // namespace glu
