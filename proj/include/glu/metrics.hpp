#pragma once
// Evaluation quantities: relative L2, isotropic energy spectra, log-spectral
// distance, joint histograms with Jensen-Shannon divergence, correlation
// lengths and error densities.

#include <span>
#include <string>
#include <vector>

namespace glu::metrics {

/// ||pred - truth|| / ||truth|| over all entries; throws on a zero-norm truth.
double rel_l2(std::span<const double> pred, std::span<const double> truth);

struct SpectrumReport {
    std::vector<double> k;       // shell index 0..k_max
    std::vector<double> power;   // summed |F|^2 / n^2 per shell
    std::vector<std::size_t> count;
    double total_power = 0.0;    // sum over all non-DC modes
};

/// Isotropic shell-binned power of a field on a regular periodic grid
/// (`shape` holds 1 or 2 extents, row-major). Shell = round(|k|) in integer
/// wavenumbers. With this normalization the non-DC power sums to the
/// field's population variance.
SpectrumReport energy_spectrum(std::span<const double> field, const std::vector<std::size_t>& shape);

struct LsdResult {
    double value = 0.0;
    std::size_t floored_bins = 0;  // bins clamped to the floor before the log
};

inline constexpr double kSpectralFloor = 1e-30;

/// sqrt(mean_k (log10 P - log10 P_hat)^2) over the given bins.
LsdResult lsd(std::span<const double> p, std::span<const double> p_hat);
/// LSD over shells 1..k_max of two spectra (DC excluded).
LsdResult lsd(const SpectrumReport& a, const SpectrumReport& b);

struct Histogram2d {
    std::size_t bins_a = 0, bins_b = 0;
    double a_lo = 0, a_hi = 1, b_lo = 0, b_hi = 1;
    std::vector<double> p;  // probabilities summing to 1, [bins_a, bins_b]
};

/// Joint histogram of paired samples over fixed ranges (values outside are clipped into the edge bins).
Histogram2d joint_pdf(std::span<const double> a, std::span<const double> b, std::size_t bins_a, std::size_t bins_b,
                      double a_lo, double a_hi, double b_lo, double b_hi);
/// Jensen-Shannon divergence in nats; throws if the bin grids differ.
double jsd(const Histogram2d& p, const Histogram2d& q);
double jsd(std::span<const double> p, std::span<const double> q);

struct CorrLength {
    double length = 0.0;  // in grid spacings (or time steps)
    bool saturated = false;
    std::vector<double> correlation;  // normalized autocorrelation by lag / radius
};

/// Radially averaged normalized autocorrelation of a periodic field
/// (1-D or 2-D) and its first 1/e crossing.
CorrLength spatial_corr_length(std::span<const double> field, const std::vector<std::size_t>& shape);
/// Per-point temporal autocorrelation of series [n_t, n_points] averaged over points.
CorrLength temporal_corr_length(std::span<const double> series, std::size_t n_t, std::size_t n_points);

struct ErrorPdf {
    std::vector<double> edges;    // bins + 1
    std::vector<double> density;  // integrates to 1
    double tail_threshold = 0.0;
    double tail_mass = 0.0;       // fraction of |e| > threshold
};

ErrorPdf error_pdf(std::span<const double> errors, std::size_t bins, double tail_threshold);

}  // namespace glu::metrics
