#pragma once
// Set encoder: Fourier-feature sensor embeddings, latent-query aggregation
// and enrichment back onto the sensor tokens.

#include <cstdint>

#include <json.hpp>

#include "glu/nn.hpp"
#include "glu/sensing.hpp"

namespace glu {

struct EncoderConfig {
    std::size_t n_d = 2, n_c = 1;
    std::size_t n_freq = 32;
    std::size_t width = 64;    // D
    std::size_t latents = 16;  // S, the last row is the leader
    std::size_t heads = 1;
    double freq_std = 1.0;
    double ln_eps = 1e-5;

    void validate() const;
    nlohmann::json to_json() const;
    static EncoderConfig from_json(const nlohmann::json& j);
};

/// z_global [1, D] and Z_local [N, D] as tape variables.
struct LatentVars {
    ad::Var z_global;
    ad::Var z_local;
};

class Encoder {
public:
    Encoder() = default;
    Encoder(const EncoderConfig& cfg, Rng& rng);

    const EncoderConfig& config() const { return cfg_; }

    /// W_p [cos(2 pi B x), sin(2 pi B x)] per row of x.
    ad::Var fourier_embed(ad::Tape& t, const Mat& x);
    /// LayerNorm(e_pos) + LayerNorm(e_val).
    ad::Var embed(ad::Tape& t, const Mat& x, const Mat& u);
    LatentVars encode(ad::Tape& t, ad::Var h);
    LatentVars operator()(ad::Tape& t, const sensing::SensorSet& s) { return encode(t, embed(t, s.x, s.u)); }

    void collect(ParamList& out);

    Param freq;  // B [n_freq, n_d]
    nn::Linear w_pos, w_val;
    nn::LayerNorm ln_pos, ln_val;
    Param queries;  // L [S, D]
    nn::Attention aggregate, enrich;

private:
    EncoderConfig cfg_;
};

}  // namespace glu
