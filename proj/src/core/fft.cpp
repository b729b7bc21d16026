#include "glu/fft.hpp"

#include <algorithm>
#include <mutex>
#include <stdexcept>

#include <fftw3.h>

namespace glu::fft {

namespace {
// FFTW's planner is not thread-safe.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

struct ComplexPlan::Impl {
    fftw_complex* buf_in = nullptr;
    fftw_complex* buf_out = nullptr;
    fftw_plan fwd = nullptr;
    fftw_plan inv = nullptr;
};

ComplexPlan::ComplexPlan(std::vector<std::size_t> dims) : impl_(std::make_unique<Impl>()) {
    if (dims.empty() || dims.size() > 2) throw std::invalid_argument("ComplexPlan: only 1-D and 2-D supported");
    n_ = 1;
    for (auto d : dims) n_ *= d;
    std::lock_guard lock(planner_mutex());
    impl_->buf_in = fftw_alloc_complex(n_);
    impl_->buf_out = fftw_alloc_complex(n_);
    if (dims.size() == 1) {
        impl_->fwd = fftw_plan_dft_1d(int(dims[0]), impl_->buf_in, impl_->buf_out, FFTW_FORWARD, FFTW_ESTIMATE);
        impl_->inv = fftw_plan_dft_1d(int(dims[0]), impl_->buf_in, impl_->buf_out, FFTW_BACKWARD, FFTW_ESTIMATE);
    } else {
        impl_->fwd = fftw_plan_dft_2d(int(dims[0]), int(dims[1]), impl_->buf_in, impl_->buf_out, FFTW_FORWARD,
                                      FFTW_ESTIMATE);
        impl_->inv = fftw_plan_dft_2d(int(dims[0]), int(dims[1]), impl_->buf_in, impl_->buf_out, FFTW_BACKWARD,
                                      FFTW_ESTIMATE);
    }
}

ComplexPlan::~ComplexPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(impl_->fwd);
    fftw_destroy_plan(impl_->inv);
    fftw_free(impl_->buf_in);
    fftw_free(impl_->buf_out);
}

void ComplexPlan::forward(std::span<const cplx> in, std::span<cplx> out) const {
    if (in.size() != n_ || out.size() != n_) throw std::invalid_argument("ComplexPlan: size mismatch");
    std::copy(in.begin(), in.end(), reinterpret_cast<cplx*>(impl_->buf_in));
    fftw_execute(impl_->fwd);
    std::copy_n(reinterpret_cast<const cplx*>(impl_->buf_out), n_, out.begin());
}

void ComplexPlan::inverse(std::span<const cplx> in, std::span<cplx> out) const {
    if (in.size() != n_ || out.size() != n_) throw std::invalid_argument("ComplexPlan: size mismatch");
    std::copy(in.begin(), in.end(), reinterpret_cast<cplx*>(impl_->buf_in));
    fftw_execute(impl_->inv);
    std::copy_n(reinterpret_cast<const cplx*>(impl_->buf_out), n_, out.begin());
}

struct Real2dPlan::Impl {
    double* real = nullptr;
    fftw_complex* spec = nullptr;
    fftw_plan fwd = nullptr;
    fftw_plan inv = nullptr;
};

Real2dPlan::Real2dPlan(std::size_t ny, std::size_t nx) : impl_(std::make_unique<Impl>()), ny_(ny), nx_(nx) {
    std::lock_guard lock(planner_mutex());
    impl_->real = fftw_alloc_real(ny * nx);
    impl_->spec = fftw_alloc_complex(spectrum_size());
    impl_->fwd = fftw_plan_dft_r2c_2d(int(ny), int(nx), impl_->real, impl_->spec, FFTW_ESTIMATE);
    impl_->inv = fftw_plan_dft_c2r_2d(int(ny), int(nx), impl_->spec, impl_->real, FFTW_ESTIMATE);
}

Real2dPlan::~Real2dPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(impl_->fwd);
    fftw_destroy_plan(impl_->inv);
    fftw_free(impl_->real);
    fftw_free(impl_->spec);
}

void Real2dPlan::forward(std::span<const double> in, std::span<cplx> out) const {
    if (in.size() != ny_ * nx_ || out.size() != spectrum_size()) throw std::invalid_argument("Real2dPlan: size mismatch");
    std::copy(in.begin(), in.end(), impl_->real);
    fftw_execute(impl_->fwd);
    std::copy_n(reinterpret_cast<const cplx*>(impl_->spec), spectrum_size(), out.begin());
}

void Real2dPlan::inverse(std::span<const cplx> in, std::span<double> out) const {
    if (out.size() != ny_ * nx_ || in.size() != spectrum_size()) throw std::invalid_argument("Real2dPlan: size mismatch");
    std::copy(in.begin(), in.end(), reinterpret_cast<cplx*>(impl_->spec));
    fftw_execute(impl_->inv);
    std::copy_n(impl_->real, ny_ * nx_, out.begin());
}

}  // namespace glu::fft
