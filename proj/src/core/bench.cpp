#include "glu/bench.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace glu::bench {

using nlohmann::json;

json CostConfig::to_json() const {
    return {{"N", n_sensors}, {"S", latents},   {"D", width},        {"K", k},          {"w", window},
            {"n_q", n_query}, {"N_ref", n_ref}, {"heads", heads},    {"blocks", blocks}, {"hidden", hidden},
            {"n_freq", n_freq}, {"n_d", n_d},   {"n_c", n_c}};
}

namespace {

CostConfig config_from_json(const json& j, CostConfig c) {
    auto get = [&](const char* key, std::uint64_t& v) {
        if (!j.contains(key)) return;
        if (!j.at(key).is_number_unsigned() || j.at(key).get<std::uint64_t>() == 0)
            throw std::invalid_argument(std::string("bench.base.") + key);
        v = j.at(key).get<std::uint64_t>();
    };
    get("N", c.n_sensors), get("S", c.latents), get("D", c.width), get("K", c.k), get("w", c.window);
    get("n_q", c.n_query), get("N_ref", c.n_ref), get("heads", c.heads), get("blocks", c.blocks);
    get("hidden", c.hidden), get("n_freq", c.n_freq), get("n_d", c.n_d), get("n_c", c.n_c);
    return c;
}

std::vector<std::uint64_t> list_from_json(const json& j, const char* key, std::vector<std::uint64_t> def) {
    if (!j.contains(key)) return def;
    if (!j.at(key).is_array() || j.at(key).empty()) throw std::invalid_argument(std::string("bench.") + key);
    std::vector<std::uint64_t> out;
    for (const auto& v : j.at(key)) {
        if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0) throw std::invalid_argument(std::string("bench.") + key);
        out.push_back(v.get<std::uint64_t>());
    }
    return out;
}

}  // namespace

CostReport count_encoder_cost(const CostConfig& c) {
    CostReport r{"encoder", c};
    const std::uint64_t N = c.n_sensors, S = c.latents, D = c.width;
    // Latents attend to tokens, then tokens attend to the summary.
    r.attention_scores = 2 * c.heads * N * S;
    const std::uint64_t embed = N * (c.n_d * c.n_freq + 2 * c.n_freq * D + c.n_c * D);
    const std::uint64_t proj = 4 * (N + S) * D * D;
    r.macs = embed + proj + 4 * N * S * D;
    r.peak_live = N * D + r.attention_scores + S * D;
    return r;
}

CostReport count_decode_cost(const CostConfig& c) {
    if (c.k > c.n_sensors) throw std::invalid_argument("count_decode_cost: K exceeds N");
    CostReport r{"decoder", c};
    const std::uint64_t nq = c.n_query, K = c.k, N = c.n_sensors, D = c.width, H = c.hidden;
    r.selection = nq * N;
    r.aggregation = nq * K;
    r.macs = nq * N * c.n_d + nq * K * D + nq * (2 * D * H + H * H + 2 * H * c.n_c);
    r.peak_live = N + nq * (3 * K + D);
    return r;
}

CostReport count_dense_reference_cost(const CostConfig& c) {
    CostReport r{"dense_reference", c};
    const std::uint64_t nq = c.n_query, R = c.n_ref, D = c.width;
    r.attention_scores = c.heads * nq * R;
    r.macs = 2 * nq * R * D + nq * D * D;
    r.peak_live = r.attention_scores + nq * D + R * D;
    return r;
}

CostReport count_lfd_cost(const CostConfig& c) {
    CostReport r{"lfd", c};
    const std::uint64_t N = c.n_sensors, w = c.window, D = c.width, H = c.hidden;
    r.attention_scores = c.heads * (w * w + 2 * N * w);
    r.macs = 2 * D * r.attention_scores + (N + 1) * 2 * D * H + 4 * (2 * w + N) * D * D;
    r.peak_live = r.attention_scores + (w + N) * D;
    return r;
}

CostReport count_causal_cost(const CostConfig& c) {
    CostReport r{"causal", c};
    const std::uint64_t T = (c.n_sensors + 1) * c.window, D = c.width, H = c.hidden;
    r.attention_scores = c.blocks * c.heads * T * T;
    r.macs = 2 * D * r.attention_scores + c.blocks * T * (4 * D * D + 2 * D * H);
    r.peak_live = c.heads * T * T + T * D;
    return r;
}

SlopeFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need >= 2 paired points");
    const double n = double(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
    mx /= n, my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0)) throw std::invalid_argument("fit_line: x has no spread");
    SlopeFit f;
    f.n = x.size();
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (f.intercept + f.slope * x[i]);
        sse += e * e;
    }
    f.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
    double half = 0.0;
    if (x.size() > 2) {
        const double se = std::sqrt(sse / (n - 2.0) / sxx);
        boost::math::students_t dist(n - 2.0);
        half = boost::math::quantile(boost::math::complement(dist, 0.025)) * se;
    }
    f.ci_low = f.slope - half;
    f.ci_high = f.slope + half;
    return f;
}

SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0 && y[i] > 0)) throw std::invalid_argument("fit_loglog: values must be positive");
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    return fit_line(lx, ly);
}

SweepGrid SweepGrid::from_json(const json& j) {
    SweepGrid g;
    if (j.contains("base")) g.base = config_from_json(j.at("base"), g.base);
    g.sensors = list_from_json(j, "sensors", g.sensors);
    g.queries = list_from_json(j, "queries", g.queries);
    g.ks = list_from_json(j, "ks", g.ks);
    g.windows = list_from_json(j, "windows", g.windows);
    return g;
}

json SweepGrid::to_json() const {
    return {{"base", base.to_json()}, {"sensors", sensors}, {"queries", queries}, {"ks", ks}, {"windows", windows}};
}

namespace {

json fit_json(const SlopeFit& f) {
    return {{"slope", f.slope}, {"intercept", f.intercept}, {"ci95", {f.ci_low, f.ci_high}}, {"r2", f.r2}, {"n", f.n}};
}

}  // namespace

SweepResult sweep(const SweepGrid& g) {
    if (g.sensors.size() < 2 || g.queries.size() < 2) throw std::invalid_argument("sweep: grid needs >= 2 N and n_q values");
    SweepResult res;
    std::vector<double> xn, enc, lfd, causal, xq, dec_agg, dec_peak, dense_peak;
    for (auto N : g.sensors) {
        CostConfig c = g.base;
        c.n_sensors = N;
        auto e = count_encoder_cost(c), l = count_lfd_cost(c), t = count_causal_cost(c);
        xn.push_back(double(N));
        enc.push_back(double(e.attention_scores));
        lfd.push_back(double(l.attention_scores));
        causal.push_back(double(t.attention_scores));
        res.rows.push_back(e), res.rows.push_back(l), res.rows.push_back(t);
    }
    for (auto q : g.queries) {
        CostConfig c = g.base;
        c.n_query = q;
        auto d = count_decode_cost(c), r = count_dense_reference_cost(c);
        xq.push_back(double(q));
        dec_agg.push_back(double(d.aggregation));
        dec_peak.push_back(double(d.peak_live));
        dense_peak.push_back(double(r.peak_live));
        res.rows.push_back(d), res.rows.push_back(r);
    }
    std::vector<double> xk, k_agg;
    for (auto k : g.ks) {
        CostConfig c = g.base;
        c.k = k;
        if (k > c.n_sensors) continue;
        auto d = count_decode_cost(c);
        xk.push_back(double(k));
        k_agg.push_back(double(d.aggregation));
        res.rows.push_back(d);
    }
    std::vector<double> xw, w_lfd, w_causal;
    for (auto w : g.windows) {
        CostConfig c = g.base;
        c.window = w;
        auto l = count_lfd_cost(c), t = count_causal_cost(c);
        xw.push_back(double(w));
        w_lfd.push_back(double(l.attention_scores));
        w_causal.push_back(double(t.attention_scores));
        res.rows.push_back(l), res.rows.push_back(t);
    }
    json s;
    s["proxy"] = "counted attention-score elements and analytic live-array elements; device memory not measured";
    s["base"] = g.base.to_json();
    s["encoder_vs_N"] = {{"loglog", fit_json(fit_loglog(xn, enc))}, {"linear", fit_json(fit_line(xn, enc))}};
    s["lfd_vs_N"] = {{"loglog", fit_json(fit_loglog(xn, lfd))}, {"linear", fit_json(fit_line(xn, lfd))}};
    s["causal_vs_N"] = {{"loglog", fit_json(fit_loglog(xn, causal))}};
    s["decoder_aggregation_vs_nq"] = {{"loglog", fit_json(fit_loglog(xq, dec_agg))}};
    s["decoder_peak_vs_nq"] = {{"linear", fit_json(fit_line(xq, dec_peak))}};
    s["dense_reference_peak_vs_nq"] = {{"linear", fit_json(fit_line(xq, dense_peak))}};
    if (xk.size() >= 2) s["decoder_aggregation_vs_K"] = {{"loglog", fit_json(fit_loglog(xk, k_agg))}};
    if (xw.size() >= 2) {
        s["lfd_vs_w"] = {{"loglog", fit_json(fit_loglog(xw, w_lfd))}};
        s["causal_vs_w"] = {{"loglog", fit_json(fit_loglog(xw, w_causal))}};
    }
    res.summary = s;
    return res;
}

std::string csv_header() {
    return "component,N,S,D,K,w,n_q,N_ref,heads,blocks,attention_scores,macs,peak_live,selection,aggregation";
}

std::string csv_row(const CostReport& r) {
    const auto& c = r.config;
    std::ostringstream o;
    o << r.component << "," << c.n_sensors << "," << c.latents << "," << c.width << "," << c.k << "," << c.window << ","
      << c.n_query << "," << c.n_ref << "," << c.heads << "," << c.blocks << "," << r.attention_scores << "," << r.macs
      << "," << r.peak_live << "," << r.selection << "," << r.aggregation;
    return o.str();
}

void write_csv(const std::string& path, const std::vector<CostReport>& rows) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << csv_header() << "\n";
    for (const auto& r : rows) f << csv_row(r) << "\n";
}

}  // namespace glu::bench
