#include "iasdet/simd/kernels.hpp"

#include <cstdlib>
#include <string>

namespace iasdet::simd {

#if defined(IASDET_BUILD_AVX2)
const KernelTable& avx2_kernels();

static bool cpu_has_avx2() {
#if defined(__GNUC__) || defined(__clang__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}
#endif

namespace {

const KernelTable* lookup(std::string_view name) {
    if (name == "scalar") return &scalar_kernels();
#if defined(IASDET_BUILD_AVX2)
    if (name == "avx2" && cpu_has_avx2()) return &avx2_kernels();
#endif
    return nullptr;
}

const KernelTable* pick_default() {
    if (const char* env = std::getenv("IASDET_SIMD")) {
        if (const KernelTable* t = lookup(env)) return t;
    }
#if defined(IASDET_BUILD_AVX2)
    if (cpu_has_avx2()) return &avx2_kernels();
#endif
    return &scalar_kernels();
}

const KernelTable*& active_slot() {
    static const KernelTable* active = pick_default();
    return active;
}

}  // namespace

const KernelTable& active_kernels() { return *active_slot(); }

bool set_active_kernels(std::string_view name) {
    if (const KernelTable* t = lookup(name)) {
        active_slot() = t;
        return true;
    }
    return false;
}

std::vector<const KernelTable*> available_kernels() {
    std::vector<const KernelTable*> out{&scalar_kernels()};
#if defined(IASDET_BUILD_AVX2)
    if (cpu_has_avx2()) out.push_back(&avx2_kernels());
#endif
    return out;
}

}  // namespace iasdet::simd
