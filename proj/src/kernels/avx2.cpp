#include <cmath>
#include <stdexcept>

#include "glu/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#define GLU_HAVE_X86 1
#else
#define GLU_HAVE_X86 0
#endif

namespace glu::kernels {

#if GLU_HAVE_X86

#define GLU_AVX2 __attribute__((target("avx2,fma")))

namespace {

GLU_AVX2 inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

GLU_AVX2 void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256d y0 = _mm256_loadu_pd(y + i);
        __m256d y1 = _mm256_loadu_pd(y + i + 4);
        y0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), y0);
        y1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), y1);
        _mm256_storeu_pd(y + i, y0);
        _mm256_storeu_pd(y + i + 4, y1);
    }
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

GLU_AVX2 double dot(const double* x, const double* y, std::size_t n) {
    __m256d s0 = _mm256_setzero_pd();
    __m256d s1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
        s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), s1);
    }
    for (; i + 4 <= n; i += 4) s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
    double s = hsum(_mm256_add_pd(s0, s1));
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

// 4x8 register tile over C; falls back to row axpy on the edges.
GLU_AVX2 void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                      double* c) {
    std::size_t i = 0;
    const std::size_t n8 = n - n % 8;
    for (; i + 4 <= m; i += 4) {
        const double* a0 = a + (i + 0) * k;
        const double* a1 = a + (i + 1) * k;
        const double* a2 = a + (i + 2) * k;
        const double* a3 = a + (i + 3) * k;
        double* c0 = c + (i + 0) * n;
        double* c1 = c + (i + 1) * n;
        double* c2 = c + (i + 2) * n;
        double* c3 = c + (i + 3) * n;
        for (std::size_t j = 0; j < n8; j += 8) {
            __m256d r00 = _mm256_loadu_pd(c0 + j), r01 = _mm256_loadu_pd(c0 + j + 4);
            __m256d r10 = _mm256_loadu_pd(c1 + j), r11 = _mm256_loadu_pd(c1 + j + 4);
            __m256d r20 = _mm256_loadu_pd(c2 + j), r21 = _mm256_loadu_pd(c2 + j + 4);
            __m256d r30 = _mm256_loadu_pd(c3 + j), r31 = _mm256_loadu_pd(c3 + j + 4);
            for (std::size_t p = 0; p < k; ++p) {
                const __m256d b0 = _mm256_loadu_pd(b + p * n + j);
                const __m256d b1 = _mm256_loadu_pd(b + p * n + j + 4);
                __m256d av = _mm256_broadcast_sd(a0 + p);
                r00 = _mm256_fmadd_pd(av, b0, r00);
                r01 = _mm256_fmadd_pd(av, b1, r01);
                av = _mm256_broadcast_sd(a1 + p);
                r10 = _mm256_fmadd_pd(av, b0, r10);
                r11 = _mm256_fmadd_pd(av, b1, r11);
                av = _mm256_broadcast_sd(a2 + p);
                r20 = _mm256_fmadd_pd(av, b0, r20);
                r21 = _mm256_fmadd_pd(av, b1, r21);
                av = _mm256_broadcast_sd(a3 + p);
                r30 = _mm256_fmadd_pd(av, b0, r30);
                r31 = _mm256_fmadd_pd(av, b1, r31);
            }
            _mm256_storeu_pd(c0 + j, r00), _mm256_storeu_pd(c0 + j + 4, r01);
            _mm256_storeu_pd(c1 + j, r10), _mm256_storeu_pd(c1 + j + 4, r11);
            _mm256_storeu_pd(c2 + j, r20), _mm256_storeu_pd(c2 + j + 4, r21);
            _mm256_storeu_pd(c3 + j, r30), _mm256_storeu_pd(c3 + j + 4, r31);
        }
        if (n8 < n) {
            for (std::size_t r = 0; r < 4; ++r) {
                const double* ar = a + (i + r) * k;
                double* cr = c + (i + r) * n;
                for (std::size_t p = 0; p < k; ++p) {
                    const double s = ar[p];
                    for (std::size_t j = n8; j < n; ++j) cr[j] += s * b[p * n + j];
                }
            }
        }
    }
    for (; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) axpy(a[i * k + p], b + p * n, c + i * n, n);
    }
}

GLU_AVX2 void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                      double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            const double* b0 = b + (j + 0) * k;
            const double* b1 = b + (j + 1) * k;
            const double* b2 = b + (j + 2) * k;
            const double* b3 = b + (j + 3) * k;
            __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
            __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
            std::size_t p = 0;
            for (; p + 4 <= k; p += 4) {
                const __m256d av = _mm256_loadu_pd(ai + p);
                s0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b0 + p), s0);
                s1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + p), s1);
                s2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b2 + p), s2);
                s3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b3 + p), s3);
            }
            double t0 = hsum(s0), t1 = hsum(s1), t2 = hsum(s2), t3 = hsum(s3);
            for (; p < k; ++p) {
                t0 += ai[p] * b0[p];
                t1 += ai[p] * b1[p];
                t2 += ai[p] * b2[p];
                t3 += ai[p] * b3[p];
            }
            c[i * n + j + 0] += t0;
            c[i * n + j + 1] += t1;
            c[i * n + j + 2] += t2;
            c[i * n + j + 3] += t3;
        }
        for (; j < n; ++j) c[i * n + j] += dot(ai, b + j * k, k);
    }
}

GLU_AVX2 void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                      double* c) {
    for (std::size_t p = 0; p < k; ++p) {
        const double* ap = a + p * m;
        const double* bp = b + p * n;
        for (std::size_t i = 0; i < m; ++i) axpy(ap[i], bp, c + i * n, n);
    }
}

// No FMA here: the summation order and rounding must match the scalar kernel.
GLU_AVX2 void warped_distance(const double* y, std::size_t dim, const double* coords, const double* scale,
                              std::size_t n, double* out) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t d = 0; d < dim; ++d) {
            const __m256d diff = _mm256_sub_pd(_mm256_set1_pd(y[d]), _mm256_loadu_pd(coords + d * n + i));
            acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
        }
        _mm256_storeu_pd(out + i, _mm256_div_pd(_mm256_sqrt_pd(acc), _mm256_loadu_pd(scale + i)));
    }
    for (; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double diff = y[d] - coords[d * n + i];
            acc = acc + diff * diff;
        }
        out[i] = std::sqrt(acc) / scale[i];
    }
}

GLU_AVX2 void fhn_reaction(double* u, double* v, std::size_t n, double dt, double alpha, double beta) {
    const __m256d vdt = _mm256_set1_pd(dt);
    const __m256d va = _mm256_set1_pd(alpha);
    const __m256d vb = _mm256_set1_pd(beta);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d ui = _mm256_loadu_pd(u + i);
        const __m256d vi = _mm256_loadu_pd(v + i);
        const __m256d cube = _mm256_mul_pd(_mm256_mul_pd(ui, ui), ui);
        const __m256d du = _mm256_add_pd(_mm256_sub_pd(_mm256_sub_pd(ui, cube), vi), va);
        const __m256d dv = _mm256_mul_pd(vb, _mm256_sub_pd(ui, vi));
        _mm256_storeu_pd(u + i, _mm256_add_pd(ui, _mm256_mul_pd(vdt, du)));
        _mm256_storeu_pd(v + i, _mm256_add_pd(vi, _mm256_mul_pd(vdt, dv)));
    }
    for (; i < n; ++i) {
        const double ui = u[i];
        const double vi = v[i];
        const double du = ((ui - ui * ui * ui) - vi) + alpha;
        const double dv = beta * (ui - vi);
        u[i] = ui + dt * du;
        v[i] = vi + dt * dv;
    }
}

}  // namespace

bool avx2_available() {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

const KernelTable& avx2_table() {
    if (!avx2_available()) throw std::runtime_error("AVX2/FMA kernels requested on a CPU without support");
    static const KernelTable t{Isa::avx2, "avx2", gemm_nn, gemm_nt, gemm_tn, dot,
                               axpy,      warped_distance, fhn_reaction};
    return t;
}

#else

bool avx2_available() { return false; }

const KernelTable& avx2_table() {
    throw std::runtime_error("AVX2 kernels are not built for this architecture");
}

#endif

}  // namespace glu::kernels
