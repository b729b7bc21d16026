#pragma once
// Inner-loop kernels with a scalar reference and an AVX2/FMA variant.
//
// The active table is chosen once at startup from CPUID, and can be forced
// with GLU_ISA=scalar|avx2 or set_isa(). Kernels marked "bit-exact" below
// produce identical results on every ISA; the rest agree to rounding.

#include <cstddef>
#include <string_view>

namespace glu::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
    Isa isa;
    const char* name;

    // C[m,n] += A[m,k] * B[k,n]
    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                    double* c);
    // C[m,n] += A[m,k] * B[n,k]^T
    void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                    double* c);
    // C[m,n] += A[k,m]^T * B[k,n]
    void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                    double* c);

    double (*dot)(const double* x, const double* y, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

    // out[i] = ||y - x_i||_2 / scale[i], coords stored dimension-major
    // (coords[d * n + i]). Bit-exact.
    void (*warped_distance)(const double* y, std::size_t dim, const double* coords, const double* scale,
                            std::size_t n, double* out);

    // One explicit Euler step of the FitzHugh-Nagumo reaction terms,
    //   u += dt (u - u^3 - v + alpha),  v += dt beta (u - v).  Bit-exact.
    void (*fhn_reaction)(double* u, double* v, std::size_t n, double dt, double alpha, double beta);
};

const KernelTable& scalar_table();
// Throws std::runtime_error if the CPU lacks AVX2/FMA.
const KernelTable& avx2_table();

bool avx2_available();
const KernelTable& table(Isa isa);

const KernelTable& active();
void set_isa(Isa isa);
Isa parse_isa(std::string_view name);

/// Restores the previously active ISA on scope exit.
class ScopedIsa {
public:
    explicit ScopedIsa(Isa isa) : prev_(active().isa) { set_isa(isa); }
    ~ScopedIsa() { set_isa(prev_); }
    ScopedIsa(const ScopedIsa&) = delete;
    ScopedIsa& operator=(const ScopedIsa&) = delete;

private:
    Isa prev_;
};

}  // namespace glu::kernels
