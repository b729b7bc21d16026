#include "glu/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "glu/fft.hpp"

namespace glu::metrics {

double rel_l2(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size()) throw std::invalid_argument("rel_l2: size mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - truth[i];
        num += d * d;
        den += truth[i] * truth[i];
    }
    if (!(den > 0.0)) throw std::invalid_argument("rel_l2: truth has zero norm");
    return std::sqrt(num / den);
}

namespace {

std::size_t grid_size(std::span<const double> field, const std::vector<std::size_t>& shape) {
    if (shape.empty() || shape.size() > 2) throw std::invalid_argument("metric defined on 1-D or 2-D grids only");
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    if (n != field.size() || n == 0) throw std::invalid_argument("field size does not match grid shape");
    return n;
}

std::vector<fft::cplx> forward_transform(std::span<const double> field, const std::vector<std::size_t>& shape) {
    fft::ComplexPlan plan(shape);
    std::vector<fft::cplx> in(field.begin(), field.end()), out(field.size());
    plan.forward(in, out);
    return out;
}

// Integer wavenumber magnitude for flat FFT index i.
double wavenumber(std::size_t i, const std::vector<std::size_t>& shape) {
    if (shape.size() == 1) return std::abs(double(fft::freq_index(i, shape[0])));
    const double ky = double(fft::freq_index(i / shape[1], shape[0]));
    const double kx = double(fft::freq_index(i % shape[1], shape[1]));
    return std::sqrt(kx * kx + ky * ky);
}

}  // namespace

SpectrumReport energy_spectrum(std::span<const double> field, const std::vector<std::size_t>& shape) {
    const std::size_t n = grid_size(field, shape);
    const auto f = forward_transform(field, shape);
    SpectrumReport r;
    std::size_t kmax = 0;
    for (std::size_t i = 0; i < n; ++i) kmax = std::max(kmax, std::size_t(std::lround(wavenumber(i, shape))));
    r.k.resize(kmax + 1);
    std::iota(r.k.begin(), r.k.end(), 0.0);
    r.power.assign(kmax + 1, 0.0);
    r.count.assign(kmax + 1, 0);
    const double norm = 1.0 / (double(n) * double(n));
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t shell = std::size_t(std::lround(wavenumber(i, shape)));
        const double p = std::norm(f[i]) * norm;
        r.power[shell] += p;
        r.count[shell] += 1;
        if (i != 0) r.total_power += p;
    }
    return r;
}

LsdResult lsd(std::span<const double> p, std::span<const double> p_hat) {
    if (p.size() != p_hat.size() || p.empty()) throw std::invalid_argument("lsd: spectra must be nonempty and equally binned");
    LsdResult r;
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double a = p[i], b = p_hat[i];
        if (!(a > kSpectralFloor)) a = kSpectralFloor, ++r.floored_bins;
        if (!(b > kSpectralFloor)) b = kSpectralFloor, ++r.floored_bins;
        const double d = std::log10(a) - std::log10(b);
        acc += d * d;
    }
    r.value = std::sqrt(acc / double(p.size()));
    return r;
}

LsdResult lsd(const SpectrumReport& a, const SpectrumReport& b) {
    if (a.power.size() != b.power.size() || a.power.size() < 2) throw std::invalid_argument("lsd: spectra bins differ");
    return lsd(std::span<const double>(a.power).subspan(1), std::span<const double>(b.power).subspan(1));
}

Histogram2d joint_pdf(std::span<const double> a, std::span<const double> b, std::size_t bins_a, std::size_t bins_b,
                      double a_lo, double a_hi, double b_lo, double b_hi) {
    if (a.size() != b.size() || a.empty()) throw std::invalid_argument("joint_pdf: paired samples required");
    if (bins_a == 0 || bins_b == 0 || !(a_hi > a_lo) || !(b_hi > b_lo)) throw std::invalid_argument("joint_pdf: bad bins");
    Histogram2d h{bins_a, bins_b, a_lo, a_hi, b_lo, b_hi, std::vector<double>(bins_a * bins_b, 0.0)};
    auto bin = [](double v, double lo, double hi, std::size_t nb) {
        const long i = long(std::floor((v - lo) / (hi - lo) * double(nb)));
        return std::size_t(std::clamp<long>(i, 0, long(nb) - 1));
    };
    for (std::size_t i = 0; i < a.size(); ++i) h.p[bin(a[i], a_lo, a_hi, bins_a) * bins_b + bin(b[i], b_lo, b_hi, bins_b)] += 1.0;
    for (auto& v : h.p) v /= double(a.size());
    return h;
}

double jsd(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("jsd: mismatched bin grids");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0.0) acc += 0.5 * p[i] * std::log(p[i] / m);
        if (q[i] > 0.0) acc += 0.5 * q[i] * std::log(q[i] / m);
    }
    return std::max(acc, 0.0);
}

double jsd(const Histogram2d& p, const Histogram2d& q) {
    if (p.bins_a != q.bins_a || p.bins_b != q.bins_b || p.a_lo != q.a_lo || p.a_hi != q.a_hi || p.b_lo != q.b_lo ||
        p.b_hi != q.b_hi)
        throw std::invalid_argument("jsd: mismatched bin grids");
    return jsd(std::span<const double>(p.p), std::span<const double>(q.p));
}

namespace {

CorrLength first_crossing(std::vector<double> corr, double half_extent) {
    CorrLength r;
    r.correlation = corr;
    const double target = std::exp(-1.0);
    for (std::size_t i = 1; i < corr.size(); ++i) {
        if (corr[i] <= target) {
            const double t = (corr[i - 1] - target) / (corr[i - 1] - corr[i]);
            r.length = double(i - 1) + t;
            return r;
        }
    }
    r.length = half_extent;
    r.saturated = true;
    return r;
}

}  // namespace

CorrLength spatial_corr_length(std::span<const double> field, const std::vector<std::size_t>& shape) {
    const std::size_t n = grid_size(field, shape);
    const double mean = std::accumulate(field.begin(), field.end(), 0.0) / double(n);
    std::vector<fft::cplx> in(n);
    for (std::size_t i = 0; i < n; ++i) in[i] = field[i] - mean;
    fft::ComplexPlan plan(shape);
    std::vector<fft::cplx> spec(n), ac(n);
    plan.forward(in, spec);
    for (auto& s : spec) s = std::norm(s);
    plan.inverse(spec, ac);
    const double c0 = ac[0].real();
    if (!(c0 > 0.0)) throw std::invalid_argument("spatial_corr_length: constant field");
    // Radial average over integer-rounded lag distance up to half the smallest extent.
    const std::size_t half = *std::min_element(shape.begin(), shape.end()) / 2;
    std::vector<double> sum(half + 1, 0.0), cnt(half + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = wavenumber(i, shape);  // same index arithmetic gives the signed lag
        const std::size_t b = std::size_t(std::lround(r));
        if (b > half) continue;
        sum[b] += ac[i].real() / c0;
        cnt[b] += 1.0;
    }
    std::vector<double> corr(half + 1);
    for (std::size_t b = 0; b <= half; ++b) corr[b] = cnt[b] > 0 ? sum[b] / cnt[b] : 0.0;
    corr[0] = 1.0;
    return first_crossing(std::move(corr), double(half));
}

CorrLength temporal_corr_length(std::span<const double> series, std::size_t n_t, std::size_t n_points) {
    if (series.size() != n_t * n_points || n_t < 2) throw std::invalid_argument("temporal_corr_length: bad shape");
    const std::size_t half = n_t / 2;
    std::vector<double> corr(half + 1, 0.0);
    std::size_t used = 0;
    for (std::size_t p = 0; p < n_points; ++p) {
        double mean = 0.0;
        for (std::size_t t = 0; t < n_t; ++t) mean += series[t * n_points + p];
        mean /= double(n_t);
        std::vector<double> x(n_t);
        double var = 0.0;
        for (std::size_t t = 0; t < n_t; ++t) {
            x[t] = series[t * n_points + p] - mean;
            var += x[t] * x[t];
        }
        if (!(var > 0.0)) continue;
        ++used;
        for (std::size_t lag = 0; lag <= half; ++lag) {
            double acc = 0.0;
            for (std::size_t t = 0; t + lag < n_t; ++t) acc += x[t] * x[t + lag];
            corr[lag] += acc / var;
        }
    }
    if (used == 0) throw std::invalid_argument("temporal_corr_length: all series constant");
    for (auto& c : corr) c /= double(used);
    corr[0] = 1.0;
    return first_crossing(std::move(corr), double(half));
}

ErrorPdf error_pdf(std::span<const double> errors, std::size_t bins, double tail_threshold) {
    if (errors.empty() || bins == 0) throw std::invalid_argument("error_pdf: need samples and bins");
    ErrorPdf r;
    auto [lo_it, hi_it] = std::minmax_element(errors.begin(), errors.end());
    double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) {
        // Degenerate sample: a single unit-width bin centered on the value.
        lo -= 0.5, hi += 0.5;
        bins = 1;
    }
    const double width = (hi - lo) / double(bins);
    r.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) r.edges[i] = lo + double(i) * width;
    r.density.assign(bins, 0.0);
    std::size_t tail = 0;
    for (double e : errors) {
        const std::size_t b = std::min<std::size_t>(bins - 1, std::size_t((e - lo) / width));
        r.density[b] += 1.0;
        if (std::abs(e) > tail_threshold) ++tail;
    }
    for (auto& d : r.density) d /= double(errors.size()) * width;
    r.tail_threshold = tail_threshold;
    r.tail_mass = double(tail) / double(errors.size());
    return r;
}

}  // namespace glu::metrics
