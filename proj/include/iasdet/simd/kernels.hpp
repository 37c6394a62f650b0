#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

// Double-precision inner-loop kernels behind the tensor ops. Every entry has
// a scalar reference implementation and, on x86-64, an AVX2/FMA variant
// selected at runtime. Both paths perform the same per-element operations in
// the same order (matmul accumulates along k with fused multiply-add on both
// paths), so results are bit-identical and the equivalence tests compare
// exactly.

namespace iasdet::simd {

struct KernelTable {
    const char* name;
    // C += A * B, row-major packed, C is m x n, A is m x k, B is k x n.
    // C must not alias A or B.
    void (*matmul_acc)(std::size_t m, std::size_t n, std::size_t k,
                       const double* a, const double* b, double* c);
    void (*add)(std::size_t n, const double* a, const double* b, double* out);
    void (*sub)(std::size_t n, const double* a, const double* b, double* out);
    void (*mul)(std::size_t n, const double* a, const double* b, double* out);
    void (*scale)(std::size_t n, double s, const double* a, double* out);
    // y += alpha * x (single-rounded fma per element)
    void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
    void (*relu)(std::size_t n, const double* a, double* out);
};

const KernelTable& scalar_kernels();

// Table in effect for all tensor math. On first use this picks the widest
// variant the CPU supports, unless the IASDET_SIMD environment variable
// ("scalar" or "avx2") forces a path.
const KernelTable& active_kernels();

// Force a path by name; returns false if that variant is unavailable on this
// build/CPU. Intended for tests and the CLI --simd flag.
bool set_active_kernels(std::string_view name);

// Every variant that can run on this machine (always includes "scalar").
std::vector<const KernelTable*> available_kernels();

}  // namespace iasdet::simd
