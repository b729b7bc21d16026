#include "glu/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "glu/binio.hpp"
#include "glu/errors.hpp"

namespace glu::dataio {

namespace fs = std::filesystem;
using nlohmann::json;

void FieldDataset::validate() const {
    if (fields.size() != n_cases * n_t * n_p * n_c)
        throw std::invalid_argument("fields size does not match [n_cases,n_t,n_p,n_c]");
    if (coords.size() != n_p * n_d) throw std::invalid_argument("coords row count does not match n_p");
    for (std::size_t i = 0; i < fields.size(); ++i)
        if (!std::isfinite(fields[i]))
            throw std::invalid_argument("non-finite field value in channel " + std::to_string(i % n_c));
    for (float c : coords)
        if (!(c >= -1.0f && c <= 1.0f)) throw std::invalid_argument("coordinate outside [-1,1]");
    if (!channel_names.empty() && channel_names.size() != n_c)
        throw std::invalid_argument("channel_names length does not match n_c");
    if (!grid_shape.empty()) {
        std::size_t prod = 1;
        for (auto g : grid_shape) prod *= g;
        if (prod != n_p) throw std::invalid_argument("grid_shape product does not match n_p");
    }
}

NormalizeResult normalize_fields(FieldDataset& ds, std::span<const std::size_t> stat_cases) {
    std::vector<std::size_t> cases(stat_cases.begin(), stat_cases.end());
    if (cases.empty()) {
        cases.resize(ds.n_cases);
        std::iota(cases.begin(), cases.end(), 0);
    }
    const std::size_t nc = ds.n_c;
    for (std::size_t i = 0; i < ds.fields.size(); ++i)
        if (!std::isfinite(ds.fields[i]))
            throw std::invalid_argument("normalize_fields: non-finite value in channel " + std::to_string(i % nc));

    NormalizeResult res;
    res.stats = ds.norm;
    res.stats.mean.assign(nc, 0.0);
    res.stats.stddev.assign(nc, 0.0);
    std::vector<double> count(nc, 0.0);
    const std::size_t per_case = ds.n_t * ds.n_p;
    for (std::size_t c : cases)
        for (std::size_t k = 0; k < per_case; ++k)
            for (std::size_t ch = 0; ch < nc; ++ch) {
                res.stats.mean[ch] += ds.fields[(c * per_case + k) * nc + ch];
                count[ch] += 1.0;
            }
    for (std::size_t ch = 0; ch < nc; ++ch) res.stats.mean[ch] /= count[ch];
    for (std::size_t c : cases)
        for (std::size_t k = 0; k < per_case; ++k)
            for (std::size_t ch = 0; ch < nc; ++ch) {
                const double d = ds.fields[(c * per_case + k) * nc + ch] - res.stats.mean[ch];
                res.stats.stddev[ch] += d * d;
            }
    for (std::size_t ch = 0; ch < nc; ++ch) {
        res.stats.stddev[ch] = std::sqrt(res.stats.stddev[ch] / count[ch]);
        if (res.stats.stddev[ch] < kStdFloor) {
            res.warnings.push_back("channel " + std::to_string(ch) + " has zero variance; std clamped to floor");
            res.stats.stddev[ch] = kStdFloor;
        }
    }
    for (std::size_t i = 0; i < ds.fields.size(); ++i) {
        const std::size_t ch = i % nc;
        ds.fields[i] = float((ds.fields[i] - res.stats.mean[ch]) / res.stats.stddev[ch]);
    }
    ds.norm = res.stats;
    ds.normalized = true;
    return res;
}

void denormalize_fields(FieldDataset& ds) {
    if (!ds.normalized) return;
    for (std::size_t i = 0; i < ds.fields.size(); ++i) ds.fields[i] = float(denormalize(ds.fields[i], ds.norm, i % ds.n_c));
    ds.normalized = false;
}

CoordRescale rescale_coords(std::span<const double> raw, std::size_t n_p, std::size_t n_d) {
    if (raw.size() != n_p * n_d) throw std::invalid_argument("rescale_coords: size mismatch");
    CoordRescale r;
    r.min.assign(n_d, INFINITY);
    r.max.assign(n_d, -INFINITY);
    for (std::size_t p = 0; p < n_p; ++p)
        for (std::size_t d = 0; d < n_d; ++d) {
            r.min[d] = std::min(r.min[d], raw[p * n_d + d]);
            r.max[d] = std::max(r.max[d], raw[p * n_d + d]);
        }
    for (std::size_t d = 0; d < n_d; ++d)
        if (!(r.max[d] > r.min[d]))
            throw std::invalid_argument("rescale_coords: degenerate coordinate dimension " + std::to_string(d));
    r.coords.resize(raw.size());
    for (std::size_t p = 0; p < n_p; ++p)
        for (std::size_t d = 0; d < n_d; ++d)
            r.coords[p * n_d + d] = 2.0 * (raw[p * n_d + d] - r.min[d]) / (r.max[d] - r.min[d]) - 1.0;
    return r;
}

Split split_cases(std::size_t n_cases, double train_frac, std::uint64_t seed) {
    if (n_cases < 2) throw std::invalid_argument("split_cases: need at least 2 cases");
    if (!(train_frac > 0.0 && train_frac < 1.0)) throw std::invalid_argument("split_cases: train_frac must be in (0,1)");
    std::size_t n_train = std::size_t(std::llround(train_frac * double(n_cases)));
    n_train = std::clamp<std::size_t>(n_train, 1, n_cases - 1);
    std::vector<std::size_t> perm(n_cases);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    // Fisher-Yates with an explicit draw so the partition is library-independent.
    for (std::size_t i = n_cases - 1; i > 0; --i) {
        const std::size_t j = std::size_t(rng() % (i + 1));
        std::swap(perm[i], perm[j]);
    }
    Split s;
    s.train.assign(perm.begin(), perm.begin() + std::ptrdiff_t(n_train));
    s.test.assign(perm.begin() + std::ptrdiff_t(n_train), perm.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

void save_dataset(const FieldDataset& ds, const fs::path& dir) {
    ds.validate();
    fs::create_directories(dir);
    binio::write_le<float>(dir / "fields.f32", ds.fields);
    binio::write_le<float>(dir / "coords.f32", ds.coords);
    json m;
    m["format_version"] = kFormatVersion;
    m["kind"] = "field_dataset";
    m["dtype"] = "float32";
    m["endianness"] = "little";
    m["shapes"] = {{"fields", {ds.n_cases, ds.n_t, ds.n_p, ds.n_c}}, {"coords", {ds.n_p, ds.n_d}}};
    m["dt"] = ds.dt;
    m["channel_names"] = ds.channel_names;
    m["normalized"] = ds.normalized;
    m["norm"] = {{"mean", ds.norm.mean},
                 {"std", ds.norm.stddev},
                 {"coord_min", ds.norm.coord_min},
                 {"coord_max", ds.norm.coord_max},
                 {"std_floor", kStdFloor}};
    m["split"] = {{"seed", ds.split_seed}, {"train_frac", ds.train_frac}};
    m["grid_shape"] = ds.grid_shape;
    m["generator"] = ds.generator;
    std::ofstream(dir / "manifest.json") << m.dump(2) << "\n";
}

namespace {

json read_manifest(const fs::path& dir) {
    const fs::path mp = dir / "manifest.json";
    if (!fs::exists(dir)) throw NotFoundError("dataset directory not found: " + dir.string());
    if (!fs::exists(mp)) throw NotFoundError("manifest not found: " + mp.string());
    try {
        std::ifstream f(mp);
        return json::parse(f);
    } catch (const json::exception& e) {
        throw FormatError("corrupt manifest " + mp.string() + ": " + e.what());
    }
}

}  // namespace

FieldDataset load_dataset(const fs::path& dir) {
    const json m = read_manifest(dir);
    try {
        if (m.at("format_version").get<int>() != kFormatVersion)
            throw FormatError("unknown dataset format version " + m.at("format_version").dump());
        if (m.at("dtype").get<std::string>() != "float32") throw FormatError("unsupported dtype");
        FieldDataset ds;
        const auto fshape = m.at("shapes").at("fields").get<std::vector<std::size_t>>();
        const auto cshape = m.at("shapes").at("coords").get<std::vector<std::size_t>>();
        if (fshape.size() != 4 || cshape.size() != 2) throw FormatError("manifest shapes have wrong rank");
        if (fshape[2] != cshape[0]) throw FormatError("manifest n_p disagrees between fields and coords");
        ds.n_cases = fshape[0], ds.n_t = fshape[1], ds.n_p = fshape[2], ds.n_c = fshape[3], ds.n_d = cshape[1];
        ds.fields = binio::read_le<float>(dir / "fields.f32", ds.n_cases * ds.n_t * ds.n_p * ds.n_c);
        ds.coords = binio::read_le<float>(dir / "coords.f32", ds.n_p * ds.n_d);
        ds.dt = m.at("dt").get<double>();
        ds.channel_names = m.at("channel_names").get<std::vector<std::string>>();
        ds.normalized = m.at("normalized").get<bool>();
        const json& n = m.at("norm");
        ds.norm.mean = n.at("mean").get<std::vector<double>>();
        ds.norm.stddev = n.at("std").get<std::vector<double>>();
        ds.norm.coord_min = n.at("coord_min").get<std::vector<double>>();
        ds.norm.coord_max = n.at("coord_max").get<std::vector<double>>();
        ds.split_seed = m.at("split").at("seed").get<std::uint64_t>();
        ds.train_frac = m.at("split").at("train_frac").get<double>();
        ds.grid_shape = m.at("grid_shape").get<std::vector<std::size_t>>();
        ds.generator = m.value("generator", json::object());
        try {
            ds.validate();
        } catch (const std::invalid_argument& e) {
            throw FormatError(std::string("dataset failed validation: ") + e.what());
        }
        return ds;
    } catch (const json::exception& e) {
        throw FormatError("malformed manifest in " + dir.string() + ": " + e.what());
    }
}

void save_arrays(const fs::path& dir, const std::string& kind,
                 const std::vector<std::pair<std::string, std::pair<std::vector<std::size_t>, std::vector<float>>>>& arrays,
                 const json& meta) {
    fs::create_directories(dir);
    json m;
    m["format_version"] = kFormatVersion;
    m["kind"] = kind;
    m["dtype"] = "float32";
    m["endianness"] = "little";
    m["meta"] = meta;
    m["arrays"] = json::array();
    for (const auto& [name, payload] : arrays) {
        std::size_t n = 1;
        for (auto s : payload.first) n *= s;
        if (n != payload.second.size()) throw std::invalid_argument("save_arrays: shape mismatch for " + name);
        binio::write_le<float>(dir / (name + ".f32"), payload.second);
        m["arrays"].push_back({{"name", name}, {"file", name + ".f32"}, {"shape", payload.first}});
    }
    std::ofstream(dir / "manifest.json") << m.dump(2) << "\n";
}

std::vector<std::pair<std::string, NamedArray>> load_arrays(const fs::path& dir) {
    const json m = read_manifest(dir);
    if (m.value("format_version", 0) != kFormatVersion) throw FormatError("unknown array format version");
    std::vector<std::pair<std::string, NamedArray>> out;
    for (const auto& a : m.at("arrays")) {
        NamedArray na;
        na.shape = a.at("shape").get<std::vector<std::size_t>>();
        std::size_t n = 1;
        for (auto s : na.shape) n *= s;
        na.data = binio::read_le<float>(dir / a.at("file").get<std::string>(), n);
        out.emplace_back(a.at("name").get<std::string>(), std::move(na));
    }
    return out;
}

}  // namespace glu::dataio
