#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "glu/kernels.hpp"

namespace glu::kernels {
namespace {

const KernelTable* detect() {
    if (const char* env = std::getenv("GLU_ISA"); env && *env) {
        const Isa want = parse_isa(env);
        if (want == Isa::scalar || !avx2_available()) return &scalar_table();
        return &avx2_table();
    }
    return avx2_available() ? &avx2_table() : &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
    static std::atomic<const KernelTable*> s{detect()};
    return s;
}

}  // namespace

const KernelTable& table(Isa isa) { return isa == Isa::avx2 ? avx2_table() : scalar_table(); }

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void set_isa(Isa isa) { slot().store(&table(isa), std::memory_order_release); }

Isa parse_isa(std::string_view name) {
    if (name == "scalar") return Isa::scalar;
    if (name == "avx2") return Isa::avx2;
    throw std::invalid_argument("unknown ISA '" + std::string(name) + "' (expected scalar or avx2)");
}

}  // namespace glu::kernels
