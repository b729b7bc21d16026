#include "glu/model.hpp"

#include <fstream>

#include "glu/errors.hpp"

namespace glu {

namespace {

Rng stream(std::uint64_t seed, std::uint64_t id) { return Rng(derive_seed(seed, id)); }

}  // namespace

void ModelConfig::validate() const {
    encoder.validate();
    importance.validate();
    reconstructor.validate();
    if (importance.n_d != encoder.n_d) throw ConfigError("model.importance.n_d", "must equal encoder.n_d");
}

nlohmann::json ModelConfig::to_json() const {
    return {{"encoder", encoder.to_json()},
            {"importance", importance.to_json()},
            {"reconstructor", reconstructor.to_json()},
            {"mode", to_string(mode)},
            {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.encoder = EncoderConfig::from_json(j.value("encoder", nlohmann::json::object()));
    c.importance = importance::ImportanceConfig::from_json(j.value("importance", nlohmann::json::object()));
    c.importance.n_d = c.encoder.n_d;
    c.reconstructor = ReconstructorConfig::from_json(j.value("reconstructor", nlohmann::json::object()));
    try {
        c.mode = parse_decoder_mode(j.value("mode", std::string("adaptive")));
    } catch (const std::invalid_argument& e) {
        throw ConfigError("model.mode", e.what());
    }
    c.seed = j.value("seed", c.seed);
    return c;
}

GluModel::GluModel(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng r1 = stream(cfg.seed, 1), r2 = stream(cfg.seed, 2), r3 = stream(cfg.seed, 3);
    encoder = Encoder(cfg.encoder, r1);
    importance = importance::ImportanceNet(cfg.importance, r2);
    reconstructor = Reconstructor(cfg.reconstructor, cfg.encoder, r3);
}

ad::Var GluModel::sensor_phi(ad::Tape& t, const Mat& sensor_x) {
    if (cfg_.mode != DecoderMode::adaptive) return t.constant(Mat(sensor_x.rows(), 1, 1.0));
    importance::BetaParams q = importance.params(t, sensor_x);
    return importance::posterior_mean(q.alpha, q.beta);
}

ForwardVars GluModel::forward(ad::Tape& t, const sensing::SensorSet& s, const Mat& queries, const Neighbors* fixed) {
    ForwardVars f;
    f.latent = encoder(t, s);
    f.phi = sensor_phi(t, s.x);
    f.out = reconstructor.decode(t, encoder, f.latent, f.phi, s.x, queries, cfg_.mode, fixed);
    return f;
}

DecodeVars GluModel::decode(ad::Tape& t, const LatentVars& lat, ad::Var phi, const Mat& sensor_x, const Mat& queries,
                            const Neighbors* fixed) {
    return reconstructor.decode(t, encoder, lat, phi, sensor_x, queries, cfg_.mode, fixed);
}

ReconstructionOutput GluModel::reconstruct(const sensing::SensorSet& s, const Mat& queries, std::size_t chunk) {
    ad::Tape t(false);
    LatentVars lat = encoder(t, s);
    ad::Var phi = sensor_phi(t, s.x);
    const std::size_t nq = queries.rows(), nc = cfg_.encoder.n_c, nd = queries.cols();
    ReconstructionOutput out;
    out.mean = Mat(nq, nc);
    out.log_var = Mat(nq, nc);
    for (std::size_t q0 = 0; q0 < nq; q0 += chunk) {
        const std::size_t q1 = std::min(nq, q0 + chunk);
        Mat qs(q1 - q0, nd);
        std::copy_n(queries.row(q0).data(), qs.size(), qs.data());
        ad::Tape tc(false);
        LatentVars lc{tc.constant(lat.z_global.value()), tc.constant(lat.z_local.value())};
        DecodeVars d = reconstructor.decode(tc, encoder, lc, tc.constant(phi.value()), s.x, qs, cfg_.mode);
        std::copy(d.mean.value().vec().begin(), d.mean.value().vec().end(), &out.mean(q0, 0));
        std::copy(d.log_var.value().vec().begin(), d.log_var.value().vec().end(), &out.log_var(q0, 0));
        out.k = d.neighbors.k;
        out.neighbors.insert(out.neighbors.end(), d.neighbors.idx.begin(), d.neighbors.idx.end());
        out.weights.insert(out.weights.end(), d.weights.begin(), d.weights.end());
    }
    return out;
}

ParamList GluModel::params() {
    ParamList p;
    encoder.collect(p);
    if (cfg_.mode == DecoderMode::adaptive) importance.collect(p);
    reconstructor.collect(p);
    return p;
}

void GluModel::save(const std::filesystem::path& dir, const std::string& tag) {
    ParamList p;
    encoder.collect(p);
    importance.collect(p);
    reconstructor.collect(p);
    save_params(dir, p, tag);
    std::ofstream(dir / "model_config.json") << cfg_.to_json().dump(2) << "\n";
}

void GluModel::load(const std::filesystem::path& dir) {
    ParamList p;
    encoder.collect(p);
    importance.collect(p);
    reconstructor.collect(p);
    load_params(dir, p);
}

std::unique_ptr<GluModel> load_model(const std::filesystem::path& dir) {
    const auto path = dir / "model_config.json";
    if (!std::filesystem::exists(path)) throw NotFoundError("model config not found: " + path.string());
    nlohmann::json j;
    try {
        std::ifstream f(path);
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("corrupt model config " + path.string() + ": " + e.what());
    }
    auto m = std::make_unique<GluModel>(ModelConfig::from_json(j));
    m->load(dir);
    return m;
}

}  // namespace glu
