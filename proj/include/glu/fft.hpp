#pragma once
// Thin RAII wrappers over FFTW plans. Unnormalized transforms: a forward
// followed by an inverse scales by the number of points.

#include <complex>
#include <memory>
#include <span>
#include <vector>

namespace glu::fft {

using cplx = std::complex<double>;

/// Complex-to-complex transform over a row-major array of extents `dims`
/// (1-D or 2-D).
class ComplexPlan {
public:
    explicit ComplexPlan(std::vector<std::size_t> dims);
    ~ComplexPlan();
    ComplexPlan(const ComplexPlan&) = delete;
    ComplexPlan& operator=(const ComplexPlan&) = delete;

    std::size_t size() const { return n_; }
    void forward(std::span<const cplx> in, std::span<cplx> out) const;
    void inverse(std::span<const cplx> in, std::span<cplx> out) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::size_t n_ = 0;
};

/// Real 2-D transform on an ny x nx row-major grid; spectrum has ny x (nx/2+1).
class Real2dPlan {
public:
    Real2dPlan(std::size_t ny, std::size_t nx);
    ~Real2dPlan();
    Real2dPlan(const Real2dPlan&) = delete;
    Real2dPlan& operator=(const Real2dPlan&) = delete;

    std::size_t spectrum_size() const { return ny_ * (nx_ / 2 + 1); }
    void forward(std::span<const double> in, std::span<cplx> out) const;
    // Destroys nothing: input is copied to an internal buffer first.
    void inverse(std::span<const cplx> in, std::span<double> out) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::size_t ny_, nx_;
};

/// Signed integer frequency index for FFT bin i of an n-point transform.
inline long freq_index(std::size_t i, std::size_t n) {
    return i <= n / 2 ? long(i) : long(i) - long(n);
}

}  // namespace glu::fft
