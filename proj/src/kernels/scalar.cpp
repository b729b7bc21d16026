#include <cmath>

#include "glu/kernels.hpp"

namespace glu::kernels {
namespace {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
            c[i * n + j] += s;
        }
    }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    for (std::size_t p = 0; p < k; ++p) {
        const double* ap = a + p * m;
        const double* bp = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double api = ap[i];
            double* ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
        }
    }
}

double dot(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void warped_distance(const double* y, std::size_t dim, const double* coords, const double* scale,
                     std::size_t n, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double diff = y[d] - coords[d * n + i];
            acc = acc + diff * diff;
        }
        out[i] = std::sqrt(acc) / scale[i];
    }
}

void fhn_reaction(double* u, double* v, std::size_t n, double dt, double alpha, double beta) {
    for (std::size_t i = 0; i < n; ++i) {
        const double ui = u[i];
        const double vi = v[i];
        const double du = ((ui - ui * ui * ui) - vi) + alpha;
        const double dv = beta * (ui - vi);
        u[i] = ui + dt * du;
        v[i] = vi + dt * dv;
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable t{Isa::scalar, "scalar", gemm_nn, gemm_nt, gemm_tn, dot,
                               axpy,        warped_distance, fhn_reaction};
    return t;
}

}  // namespace glu::kernels
