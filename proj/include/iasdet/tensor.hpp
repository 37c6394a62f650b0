#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "iasdet/common.hpp"

// Dense 64-bit tensors with reverse-mode autodiff. Evaluation is eager; each
// op records a lineage node whenever an input requires grad, and backward()
// runs a topological sweep over those nodes. Tensors share storage through a
// shared_ptr, so copies are cheap handles onto the same buffer.

namespace iasdet {

class Tensor;

namespace detail {

struct TensorImpl;

struct Node {
    const char* op;
    std::vector<Tensor> inputs;
    // Reads the output's grad and accumulates into the inputs' grads.
    std::function<void(const TensorImpl& out)> backprop;
};

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until something accumulates into it
    bool requires_grad = false;
    std::shared_ptr<Node> lineage;
};

}  // namespace detail

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t dim(std::size_t i) const { return impl_->shape[i]; }
    std::size_t numel() const { return impl_->data.size(); }

    std::span<const double> data() const { return impl_->data; }
    std::span<double> mutable_data() { return impl_->data; }
    double item() const;

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool v) { impl_->requires_grad = v; }

    // grad() is zero for a tensor nothing has flowed into yet
    bool grad_populated() const { return !impl_->grad.empty(); }
    double grad_at(std::size_t i) const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();  // allocates a zeroed buffer on first use
    void clear_grad() { impl_->grad.clear(); }

    Tensor detached_copy() const;

    detail::TensorImpl* impl() const { return impl_.get(); }
    const std::shared_ptr<detail::Node>& lineage() const { return impl_->lineage; }

    // Attaches a lineage node; used by the op layer only.
    void set_lineage(std::shared_ptr<detail::Node> node) { impl_->lineage = std::move(node); }

private:
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<detail::TensorImpl> impl_;
};

// Accumulates into t's grad buffer, respecting the requires_grad contract: a
// tensor with requires_grad == false never accumulates gradient.
void accumulate_grad(const Tensor& t, std::span<const double> delta);

// dLoss/dTensor for every tensor reachable from loss, summed over fan-out.
// loss must be scalar-shaped and carry lineage.
void backward(const Tensor& loss);

}  // namespace iasdet
