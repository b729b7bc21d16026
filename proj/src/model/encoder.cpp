#include "glu/encoder.hpp"

#include <stdexcept>

#include "glu/errors.hpp"

namespace glu {

void EncoderConfig::validate() const {
    if (n_d < 1) throw ConfigError("encoder.n_d", "must be >= 1");
    if (n_c < 1) throw ConfigError("encoder.n_c", "must be >= 1");
    if (n_freq < 1) throw ConfigError("encoder.n_freq", "must be >= 1");
    if (width < 1) throw ConfigError("encoder.width", "must be >= 1");
    if (latents < 1) throw ConfigError("encoder.latents", "must be >= 1");
    if (heads < 1 || width % heads != 0) throw ConfigError("encoder.heads", "must divide width");
    if (!(freq_std >= 0.0)) throw ConfigError("encoder.freq_std", "must be >= 0");
}

nlohmann::json EncoderConfig::to_json() const {
    return {{"n_d", n_d},     {"n_c", n_c},           {"n_freq", n_freq}, {"width", width},
            {"latents", latents}, {"heads", heads}, {"freq_std", freq_std}, {"ln_eps", ln_eps}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
    EncoderConfig c;
    c.n_d = j.value("n_d", c.n_d);
    c.n_c = j.value("n_c", c.n_c);
    c.n_freq = j.value("n_freq", c.n_freq);
    c.width = j.value("width", c.width);
    c.latents = j.value("latents", c.latents);
    c.heads = j.value("heads", c.heads);
    c.freq_std = j.value("freq_std", c.freq_std);
    c.ln_eps = j.value("ln_eps", c.ln_eps);
    return c;
}

Encoder::Encoder(const EncoderConfig& cfg, Rng& rng)
    : freq("enc.B", nn::gaussian(cfg.n_freq, cfg.n_d, cfg.freq_std, rng)),
      w_pos("enc.w_pos", 2 * cfg.n_freq, cfg.width, rng),
      w_val("enc.w_val", cfg.n_c, cfg.width, rng),
      ln_pos("enc.ln_pos", cfg.width, cfg.ln_eps),
      ln_val("enc.ln_val", cfg.width, cfg.ln_eps),
      queries("enc.L", nn::gaussian(cfg.latents, cfg.width, 1.0, rng)),
      aggregate("enc.aggregate", cfg.width, cfg.heads, rng),
      enrich("enc.enrich", cfg.width, cfg.heads, rng),
      cfg_(cfg) {
    cfg_.validate();
}

ad::Var Encoder::fourier_embed(ad::Tape& t, const Mat& x) {
    require_shape(x, x.rows(), cfg_.n_d, "fourier_embed coords");
    return w_pos(t, ad::fourier_features(x, t.param(freq)));
}

ad::Var Encoder::embed(ad::Tape& t, const Mat& x, const Mat& u) {
    if (x.rows() == 0) throw std::invalid_argument("encoder: empty sensor set");
    require_shape(u, x.rows(), cfg_.n_c, "sensor values");
    ad::Var e_pos = fourier_embed(t, x);
    ad::Var e_val = w_val(t, t.constant(u));
    return ad::add(ln_pos(t, e_pos), ln_val(t, e_val));
}

LatentVars Encoder::encode(ad::Tape& t, ad::Var h) {
    if (h.rows() == 0) throw std::invalid_argument("encoder: no observation (N = 0)");
    ad::Var l = t.param(queries);
    ad::Var l_prime = aggregate(t, l, h);
    ad::Var z_local = ad::add(enrich(t, h, l_prime), h);
    ad::Var z_global = ad::slice_rows(l_prime, cfg_.latents - 1, cfg_.latents);
    return {z_global, z_local};
}

void Encoder::collect(ParamList& out) {
    out.push_back(&freq);
    w_pos.collect(out);
    w_val.collect(out);
    ln_pos.collect(out);
    ln_val.collect(out);
    out.push_back(&queries);
    aggregate.collect(out);
    enrich.collect(out);
}

}  // namespace glu
