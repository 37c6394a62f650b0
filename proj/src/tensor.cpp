#include "iasdet/tensor.hpp"

#include <unordered_set>

#include "iasdet/simd/kernels.hpp"

namespace iasdet {

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->data.assign(shape_numel(shape), value);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        fail("tensor: shape ", shape_str(shape), " expects ", shape_numel(shape),
             " values, got ", data.size());
    }
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

double Tensor::item() const {
    if (numel() != 1) fail("item: tensor ", shape_str(shape()), " is not scalar-shaped");
    return impl_->data[0];
}

double Tensor::grad_at(std::size_t i) const {
    return impl_->grad.empty() ? 0.0 : impl_->grad[i];
}

std::span<const double> Tensor::grad() const {
    if (impl_->grad.empty()) fail("grad: no gradient has been accumulated into this tensor");
    return impl_->grad;
}

std::span<double> Tensor::mutable_grad() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
    return impl_->grad;
}

Tensor Tensor::detached_copy() const {
    return from_data(impl_->shape, impl_->data, false);
}

void accumulate_grad(const Tensor& t, std::span<const double> delta) {
    if (!t.requires_grad()) return;
    auto g = const_cast<Tensor&>(t).mutable_grad();
    simd::active_kernels().axpy(g.size(), 1.0, delta.data(), g.data());
}

void backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        fail("backward: loss must be scalar-shaped, got ", shape_str(loss.shape()));
    }
    if (!loss.lineage()) {
        fail("backward: loss has no lineage to differentiate through");
    }

    // Post-order DFS over lineage so parents come after all their inputs.
    std::vector<detail::TensorImpl*> order;
    std::unordered_set<detail::TensorImpl*> seen;
    struct Frame {
        detail::TensorImpl* impl;
        std::size_t next_input;
    };
    std::vector<Frame> stack{{loss.impl(), 0}};
    seen.insert(loss.impl());
    while (!stack.empty()) {
        Frame& f = stack.back();
        const auto& node = f.impl->lineage;
        if (node && f.next_input < node->inputs.size()) {
            detail::TensorImpl* in = node->inputs[f.next_input++].impl();
            if (in->lineage && seen.insert(in).second) {
                stack.push_back({in, 0});
            }
        } else {
            order.push_back(f.impl);
            stack.pop_back();
        }
    }

    const_cast<Tensor&>(loss).mutable_grad()[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::TensorImpl* impl = *it;
        if (impl->grad.empty()) continue;  // nothing flowed into this branch
        impl->lineage->backprop(*impl);
    }
}

}  // namespace iasdet
