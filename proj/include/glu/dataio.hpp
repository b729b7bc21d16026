#pragma once
// Unified dataset container: fields [n_cases, n_t, n_p, n_c] plus
// coordinates [n_p, n_d], with normalization statistics and split metadata.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace glu::dataio {

inline constexpr double kStdFloor = 1e-8;
inline constexpr int kFormatVersion = 1;

struct NormStats {
    std::vector<double> mean;       // per channel
    std::vector<double> stddev;     // per channel, >= kStdFloor
    std::vector<double> coord_min;  // per spatial dimension (raw units)
    std::vector<double> coord_max;
};

struct FieldDataset {
    std::size_t n_cases = 0, n_t = 0, n_p = 0, n_c = 0, n_d = 0;
    std::vector<float> fields;  // C-order [n_cases, n_t, n_p, n_c]
    std::vector<float> coords;  // C-order [n_p, n_d], in [-1, 1]
    double dt = 1.0;
    std::vector<std::string> channel_names;
    NormStats norm;
    bool normalized = false;
    std::uint64_t split_seed = 0;
    double train_frac = 0.85;
    // Row-major grid extents when the points form a regular periodic grid
    // (product == n_p); empty for scattered points.
    std::vector<std::size_t> grid_shape;
    nlohmann::json generator = nlohmann::json::object();

    std::size_t index(std::size_t c, std::size_t t, std::size_t p, std::size_t ch) const {
        return ((c * n_t + t) * n_p + p) * n_c + ch;
    }
    float at(std::size_t c, std::size_t t, std::size_t p, std::size_t ch) const { return fields[index(c, t, p, ch)]; }
    double coord(std::size_t p, std::size_t d) const { return coords[p * n_d + d]; }

    /// Throws std::invalid_argument describing the first violated invariant.
    void validate() const;
};

struct NormalizeResult {
    NormStats stats;
    std::vector<std::string> warnings;
};

/// Computes per-channel mean/std over `stat_cases` (all cases when empty) and
/// normalizes every case in place. Coordinates bounds in `ds.norm` are kept.
NormalizeResult normalize_fields(FieldDataset& ds, std::span<const std::size_t> stat_cases = {});

/// Inverse of normalize_fields for a single value.
inline double denormalize(double v, const NormStats& s, std::size_t ch) { return v * s.stddev[ch] + s.mean[ch]; }
void denormalize_fields(FieldDataset& ds);

struct CoordRescale {
    std::vector<double> coords;  // [n_p, n_d] in [-1,1]
    std::vector<double> min, max;
};

/// Per-dimension affine map of raw coordinates onto [-1, 1].
CoordRescale rescale_coords(std::span<const double> raw, std::size_t n_p, std::size_t n_d);

struct Split {
    std::vector<std::size_t> train, test;
};

/// Seeded case-level partition; train count is round(frac * n) clamped so
/// both sides are nonempty.
Split split_cases(std::size_t n_cases, double train_frac, std::uint64_t seed);
inline Split split_cases(const FieldDataset& ds) { return split_cases(ds.n_cases, ds.train_frac, ds.split_seed); }

void save_dataset(const FieldDataset& ds, const std::filesystem::path& dir);
FieldDataset load_dataset(const std::filesystem::path& dir);

// Generic named-array export in the same convention (float32 payloads).
void save_arrays(const std::filesystem::path& dir, const std::string& kind,
                 const std::vector<std::pair<std::string, std::pair<std::vector<std::size_t>, std::vector<float>>>>& arrays,
                 const nlohmann::json& meta = nlohmann::json::object());

struct NamedArray {
    std::vector<std::size_t> shape;
    std::vector<float> data;
};
std::vector<std::pair<std::string, NamedArray>> load_arrays(const std::filesystem::path& dir);

}  // namespace glu::dataio
