#include "iasdet/simd/kernels.hpp"

#include <cmath>

namespace iasdet::simd {
namespace {

// Reference kernels. The i-k-j loop order with std::fma matches the
// accumulation order of the vector variants element for element.
void matmul_acc_scalar(std::size_t m, std::size_t n, std::size_t k,
                       const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = arow[kk];
            const double* brow = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] = std::fma(aik, brow[j], crow[j]);
            }
        }
    }
}

void add_scalar(std::size_t n, const double* a, const double* b, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_scalar(std::size_t n, const double* a, const double* b, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_scalar(std::size_t n, const double* a, const double* b, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_scalar(std::size_t n, double s, const double* a, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = s * a[i];
}

void axpy_scalar(std::size_t n, double alpha, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void relu_scalar(std::size_t n, const double* a, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{
        "scalar",     matmul_acc_scalar, add_scalar,  sub_scalar,
        mul_scalar,   scale_scalar,      axpy_scalar, relu_scalar,
    };
    return table;
}

}  // namespace iasdet::simd
