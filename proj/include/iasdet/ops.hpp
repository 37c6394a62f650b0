#pragma once

#include <vector>

#include "iasdet/rng.hpp"
#include "iasdet/tensor.hpp"

// Differentiable ops over Tensors. Shapes are validated up front and
// mismatches raise Error naming the op and the offending shapes. Rank-2
// tensors are row-major; "rows" below always means the leading axis.

namespace iasdet {

// (m x k) @ (k x n) -> (m x n)
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Same shape, or b rank-1 broadcast across the rows of rank-2 a.
Tensor add(const Tensor& a, const Tensor& b);
// Same shape, or either operand scalar-shaped (broadcast).
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

// Softmax over the last axis of a rank-1 or rank-2 tensor.
Tensor softmax_rows(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
// tanh-form gelu approximation
Tensor gelu(const Tensor& a);

// Normalizes each row of x, then applies per-feature gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// Rows of table gathered by id; ids must be in range.
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);

// Concatenate over the last axis (rank-1 vectors or equal-row rank-2 blocks).
Tensor concat_cols(const std::vector<Tensor>& parts);
// Half-open [begin, end) along axis 0 or 1 of a rank-1/2 tensor.
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);

Tensor mean_all(const Tensor& a);
Tensor sum_all(const Tensor& a);

// Inverted dropout; identity when train is false or rate is 0.
Tensor dropout(const Tensor& a, double rate, bool train, Rng& rng);

// logits rank-1 over classes; returns the scalar loss.
Tensor cross_entropy_with_logits(const Tensor& logits, int target);
// p is a scalar-shaped probability; y may be soft (in [0, 1]).
Tensor binary_cross_entropy(const Tensor& p, double y);

// x: C_in x L, w: C_out x C_in x K, b: C_out -> C_out x (L-K+1).
// Valid padding, stride 1.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor flatten(const Tensor& a);
// Same element count, new shape; row-major data order is preserved.
Tensor reshape(const Tensor& a, const Shape& shape);

namespace detail {
// Elementwise y = f(x) with dy/dx = df(x); hook for domain-specific
// squashing functions defined outside this module.
Tensor unary_map(const Tensor& x, const char* op, double (*f)(double, double),
                 double (*df)(double, double), double attr);
}  // namespace detail

// Uniform entry point over the op catalogue, mainly for property tests that
// sweep every op kind.
enum class OpKind {
    matmul,
    add,
    elementwise_multiply,
    scalar_scale,
    softmax,
    relu,
    sigmoid,
    gelu,
    layer_norm,
    embedding_lookup,
    concat,
    slice,
    mean,
    sum,
    dropout,
    cross_entropy_with_logits,
    binary_cross_entropy,
    conv1d,
    flatten,
    transpose,
};

struct OpAttrs {
    double scale = 1.0;
    double rate = 0.5;
    bool train = true;
    Rng* rng = nullptr;
    std::size_t axis = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::vector<int> ids;
    int target = 0;
    double y = 0.0;
    double eps = 1e-5;
};

Tensor forward_op(OpKind kind, const std::vector<Tensor>& inputs, const OpAttrs& attrs = {});
const char* op_kind_name(OpKind kind);

}  // namespace iasdet
