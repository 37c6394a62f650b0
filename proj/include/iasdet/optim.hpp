#pragma once

#include <unordered_map>
#include <vector>

#include "iasdet/tensor.hpp"

namespace iasdet {

// SGD / Adam over explicit parameter lists. Adam first/second moments are
// held per parameter tensor; bias correction uses step_count, which advances
// exactly once per apply_optimizer call.
struct Optimizer {
    enum class Kind { sgd, adam };

    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
    };

    Kind kind = Kind::sgd;
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step_count = 0;
    std::unordered_map<const detail::TensorImpl*, Moments> moments;
};

Optimizer make_sgd(double learning_rate);
Optimizer make_adam(double learning_rate);

// Updates params in place from their populated grads, then clears the grads.
// A parameter without a populated grad is rejected.
void apply_optimizer(Optimizer& opt, const std::vector<Tensor>& params);

}  // namespace iasdet
