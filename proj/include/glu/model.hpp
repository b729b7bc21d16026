#pragma once
// The complete reconstruction model: encoder, importance field and decoder,
// in one of three decoder variants (adaptive GLU, uniform kNN, global-only).

#include <filesystem>
#include <memory>

#include <json.hpp>

#include "glu/importance.hpp"
#include "glu/reconstructor.hpp"

namespace glu {

struct ModelConfig {
    EncoderConfig encoder;
    importance::ImportanceConfig importance;
    ReconstructorConfig reconstructor;
    DecoderMode mode = DecoderMode::adaptive;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

struct ForwardVars {
    LatentVars latent;
    ad::Var phi;  // [N, 1] importance at the sensors
    DecodeVars out;
};

class GluModel {
public:
    explicit GluModel(const ModelConfig& cfg);
    GluModel(const GluModel&) = delete;
    GluModel& operator=(const GluModel&) = delete;

    const ModelConfig& config() const { return cfg_; }
    DecoderMode mode() const { return cfg_.mode; }

    /// phi_bar at the sensor coordinates for the adaptive variant; ones otherwise.
    ad::Var sensor_phi(ad::Tape& t, const Mat& sensor_x);
    ForwardVars forward(ad::Tape& t, const sensing::SensorSet& s, const Mat& queries,
                        const Neighbors* fixed = nullptr);
    /// Decodes from given latent tokens (used after latent propagation).
    DecodeVars decode(ad::Tape& t, const LatentVars& lat, ad::Var phi, const Mat& sensor_x, const Mat& queries,
                      const Neighbors* fixed = nullptr);

    /// Inference: queries are decoded in chunks of `chunk` rows.
    ReconstructionOutput reconstruct(const sensing::SensorSet& s, const Mat& queries, std::size_t chunk = 1024);

    /// Trainable parameters of this variant (the importance net only in adaptive mode).
    ParamList params();
    void save(const std::filesystem::path& dir, const std::string& tag);
    void load(const std::filesystem::path& dir);

    Encoder encoder;
    importance::ImportanceNet importance;
    Reconstructor reconstructor;

private:
    ModelConfig cfg_;
};

std::unique_ptr<GluModel> load_model(const std::filesystem::path& dir);

}  // namespace glu
