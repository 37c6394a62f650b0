#include "iasdet/optim.hpp"

#include <cmath>

#include "iasdet/simd/kernels.hpp"

namespace iasdet {

Optimizer make_sgd(double learning_rate) {
    Optimizer opt;
    opt.kind = Optimizer::Kind::sgd;
    opt.learning_rate = learning_rate;
    return opt;
}

Optimizer make_adam(double learning_rate) {
    Optimizer opt;
    opt.kind = Optimizer::Kind::adam;
    opt.learning_rate = learning_rate;
    return opt;
}

void apply_optimizer(Optimizer& opt, const std::vector<Tensor>& params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].grad_populated()) {
            fail("apply_optimizer: parameter ", i, " of shape ", shape_str(params[i].shape()),
                 " has no populated gradient");
        }
    }
    ++opt.step_count;

    const auto& k = simd::active_kernels();
    if (opt.kind == Optimizer::Kind::sgd) {
        for (Tensor p : params) {
            auto w = p.mutable_data();
            k.axpy(w.size(), -opt.learning_rate, p.grad().data(), w.data());
            p.clear_grad();
        }
        return;
    }

    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));
    for (Tensor p : params) {
        auto& mo = opt.moments[p.impl()];
        if (mo.m.empty()) {
            mo.m.assign(p.numel(), 0.0);
            mo.v.assign(p.numel(), 0.0);
        }
        auto w = p.mutable_data();
        auto g = p.grad();
        for (std::size_t j = 0; j < w.size(); ++j) {
            mo.m[j] = opt.beta1 * mo.m[j] + (1.0 - opt.beta1) * g[j];
            mo.v[j] = opt.beta2 * mo.v[j] + (1.0 - opt.beta2) * g[j] * g[j];
            const double mhat = mo.m[j] / bc1;
            const double vhat = mo.v[j] / bc2;
            w[j] -= opt.learning_rate * mhat / (std::sqrt(vhat) + opt.eps);
        }
        p.clear_grad();
    }
}

}  // namespace iasdet
