#pragma once

// Finite-difference gradient checking for the op layer. Each instance owns
// its leaf values and a builder that reconstructs the graph from fresh leaf
// tensors, so central differences can re-evaluate the loss after perturbing
// a single element.

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "iasdet/ops.hpp"
#include "iasdet/rng.hpp"
#include "iasdet/tensor.hpp"

namespace iasdet::testsupport {

struct GradcheckInstance {
    std::string name;
    std::vector<Shape> shapes;
    std::vector<std::vector<double>> values;
    // Must build a scalar loss from exactly shapes.size() leaves.
    std::function<Tensor(const std::vector<Tensor>&)> build;
};

struct GradcheckReport {
    bool ok = true;
    double max_rel_err = 0.0;
    std::string detail;
};

inline double eval_loss(const GradcheckInstance& inst,
                        const std::vector<std::vector<double>>& values) {
    std::vector<Tensor> leaves;
    leaves.reserve(inst.shapes.size());
    for (std::size_t i = 0; i < inst.shapes.size(); ++i) {
        leaves.push_back(Tensor::from_data(inst.shapes[i], values[i], false));
    }
    return inst.build(leaves).item();
}

inline GradcheckReport run_gradcheck(const GradcheckInstance& inst, double h = 1e-3,
                                     double tol = 1e-4) {
    GradcheckReport report;

    std::vector<Tensor> leaves;
    for (std::size_t i = 0; i < inst.shapes.size(); ++i) {
        leaves.push_back(Tensor::from_data(inst.shapes[i], inst.values[i], true));
    }
    Tensor loss = inst.build(leaves);
    backward(loss);

    auto values = inst.values;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        for (std::size_t j = 0; j < values[li].size(); ++j) {
            const double keep = values[li][j];
            values[li][j] = keep + h;
            const double up = eval_loss(inst, values);
            values[li][j] = keep - h;
            const double down = eval_loss(inst, values);
            values[li][j] = keep;

            const double fd = (up - down) / (2.0 * h);
            const double an = leaves[li].grad_at(j);
            const double rel = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
            report.max_rel_err = std::max(report.max_rel_err, rel);
            if (rel > tol) {
                report.ok = false;
                std::ostringstream os;
                os << inst.name << ": leaf " << li << " elem " << j << " analytic " << an
                   << " vs central-difference " << fd << " (rel err " << rel << ")";
                report.detail = os.str();
                return report;
            }
        }
    }
    return report;
}

// --- instance catalogue -----------------------------------------------------

inline std::vector<double> gc_random(Rng& rng, std::size_t n, double lo = -2.0,
                                     double hi = 2.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

// Keeps values away from the relu kink so finite differences stay valid.
inline std::vector<double> gc_random_off_kink(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) {
        const double mag = rng.uniform(0.2, 2.0);
        x = rng.bernoulli(0.5) ? mag : -mag;
    }
    return v;
}

// Reduces any op output to a scalar through a fixed random linear functional
// so the whole jacobian is exercised.
inline Tensor gc_pin(const Tensor& out, Rng& rng) {
    std::vector<double> w(out.numel());
    for (double& x : w) x = rng.uniform(0.5, 1.5) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    Tensor pin = Tensor::from_data(out.shape(), std::move(w), false);
    return sum_all(mul(out, pin));
}

// One gradcheck instance for the given op kind; `salt` varies the shapes and
// values between repetitions.
inline GradcheckInstance make_instance(OpKind kind, std::uint64_t salt) {
    Rng rng(mix_seed(0x9e3779b97f4a7c15ull, salt) ^ static_cast<std::uint64_t>(kind));
    GradcheckInstance inst;
    inst.name = op_kind_name(kind);

    const std::size_t m = 2 + rng.uniform_index(3);   // 2..4
    const std::size_t n = 2 + rng.uniform_index(4);   // 2..5
    const std::size_t k = 2 + rng.uniform_index(3);   // 2..4
    const std::uint64_t pin_seed = rng.next_u64();

    auto pin = [pin_seed](const Tensor& out) {
        Rng r(pin_seed);
        return gc_pin(out, r);
    };

    switch (kind) {
        case OpKind::matmul:
            inst.shapes = {{m, k}, {k, n}};
            inst.values = {gc_random(rng, m * k), gc_random(rng, k * n)};
            inst.build = [pin](const std::vector<Tensor>& in) {
                return pin(matmul(in[0], in[1]));
            };
            break;
        case OpKind::transpose:
            inst.shapes = {{m, n}};
            inst.values = {gc_random(rng, m * n)};
            inst.build = [pin](const std::vector<Tensor>& in) { return pin(transpose(in[0])); };
            break;
        case OpKind::add:
            if (salt % 2 == 0) {
                inst.shapes = {{m, n}, {m, n}};
                inst.values = {gc_random(rng, m * n), gc_random(rng, m * n)};
            } else {
                inst.shapes = {{m, n}, {n}};  // row broadcast
                inst.values = {gc_random(rng, m * n), gc_random(rng, n)};
            }
            inst.build = [pin](const std::vector<Tensor>& in) { return pin(add(in[0], in[1])); };
            break;
        case OpKind::elementwise_multiply:
            if (salt % 2 == 0) {
                inst.shapes = {{m, n}, {m, n}};
                inst.values = {gc_random(rng, m * n), gc_random(rng, m * n)};
            } else {
                inst.shapes = {{m, n}, {1}};  // scalar broadcast
                inst.values = {gc_random(rng, m * n), gc_random(rng, 1)};
            }
            inst.build = [pin](const std::vector<Tensor>& in) { return pin(mul(in[0], in[1])); };
            break;
        case OpKind::scalar_scale: {
            const double s = rng.uniform(-2.0, 2.0);
            inst.shapes = {{m, n}};
            inst.values = {gc_random(rng, m * n)};
            inst.build = [pin, s](const std::vector<Tensor>& in) { return pin(scale(in[0], s)); };
            break;
        }
        case OpKind::softmax:
            inst.shapes = {{m, n}};
            inst.values = {gc_random(rng, m * n)};
            inst.build = [pin](const std::vector<Tensor>& in) {
                return pin(softmax_rows(in[0]));
            };
            break;
        case OpKind::relu:
            inst.shapes = {{m, n}};
            inst.values = {gc_random_off_kink(rng, m * n)};
            inst.build = [pin](const std::vector<Tensor>& in) { return pin(relu(in[0])); };
            break;
        case OpKind::sigmoid:
            inst.shapes = {{m, n}};
            inst.values = {gc_random(rng, m * n)};
            inst.build = [pin](const std::vector<Tensor>& in) { return pin(sigmoid(in[0])); };
            break;
        case OpKind::gelu:
            inst.shapes = {{m, n}};
            inst.values = {gc_random(rng, m * n)};
            inst.build = [pin](const std::vector<Tensor>& in) { return pin(gelu(in[0])); };
            break;
        case OpKind::layer_norm:
            inst.shapes = {{m, n}, {n}, {n}};
            inst.values = {gc_random(rng, m * n), gc_random(rng, n, 0.5, 1.5),
                           gc_random(rng, n, -0.5, 0.5)};
            inst.build = [pin](const std::vector<Tensor>& in) {
                return pin(layer_norm(in[0], in[1], in[2]));
            };
            break;
        case OpKind::embedding_lookup: {
            const std::size_t vocab = 5 + rng.uniform_index(4);
            std::vector<int> ids(m + 2);
            for (int& id : ids) id = static_cast<int>(rng.uniform_index(vocab));
            inst.shapes = {{vocab, n}};
            inst.values = {gc_random(rng, vocab * n)};
            inst.build = [pin, ids](const std::vector<Tensor>& in) {
                return pin(embedding_lookup(in[0], ids));
            };
            break;
        }
        case OpKind::concat: {
            const std::size_t w2 = 1 + rng.uniform_index(3);
            inst.shapes = {{m, n}, {m, w2}, {m, 1}};
            inst.values = {gc_random(rng, m * n), gc_random(rng, m * w2), gc_random(rng, m)};
            inst.build = [pin](const std::vector<Tensor>& in) {
                return pin(concat_cols({in[0], in[1], in[2]}));
            };
            break;
        }
        case OpKind::slice: {
            const std::size_t axis = salt % 2;
            const std::size_t extent = axis == 0 ? m : n;
            const std::size_t begin = rng.uniform_index(extent);
            const std::size_t end = begin + 1 + rng.uniform_index(extent - begin);
            inst.shapes = {{m, n}};
            inst.values = {gc_random(rng, m * n)};
            inst.build = [pin, axis, begin, end](const std::vector<Tensor>& in) {
                return pin(slice(in[0], axis, begin, end));
            };
            break;
        }
        case OpKind::mean:
            inst.shapes = {{m, n}};
            inst.values = {gc_random(rng, m * n)};
            inst.build = [](const std::vector<Tensor>& in) { return mean_all(in[0]); };
            break;
        case OpKind::sum:
            inst.shapes = {{m, n}};
            inst.values = {gc_random(rng, m * n)};
            inst.build = [](const std::vector<Tensor>& in) { return sum_all(in[0]); };
            break;
        case OpKind::dropout: {
            // Same Rng seed on every rebuild keeps the mask fixed, which makes
            // the op differentiable for finite-difference purposes.
            const std::uint64_t seed = rng.next_u64();
            inst.shapes = {{m, n}};
            inst.values = {gc_random(rng, m * n)};
            inst.build = [pin, seed](const std::vector<Tensor>& in) {
                Rng r(seed);
                return pin(dropout(in[0], 0.3, true, r));
            };
            break;
        }
        case OpKind::cross_entropy_with_logits: {
            const int target = static_cast<int>(rng.uniform_index(n));
            inst.shapes = {{n}};
            inst.values = {gc_random(rng, n)};
            inst.build = [target](const std::vector<Tensor>& in) {
                return cross_entropy_with_logits(in[0], target);
            };
            break;
        }
        case OpKind::binary_cross_entropy: {
            const double y = rng.uniform(0.0, 1.0);
            inst.shapes = {{1}};
            inst.values = {{rng.uniform(0.1, 0.9)}};
            inst.build = [y](const std::vector<Tensor>& in) {
                return binary_cross_entropy(in[0], y);
            };
            break;
        }
        case OpKind::conv1d: {
            const std::size_t cin = 1 + rng.uniform_index(2);
            const std::size_t cout = 1 + rng.uniform_index(3);
            const std::size_t len = 5 + rng.uniform_index(4);
            const std::size_t ksz = 2 + rng.uniform_index(2);
            inst.shapes = {{cin, len}, {cout, cin, ksz}, {cout}};
            inst.values = {gc_random(rng, cin * len), gc_random(rng, cout * cin * ksz),
                           gc_random(rng, cout)};
            inst.build = [pin](const std::vector<Tensor>& in) {
                return pin(conv1d(in[0], in[1], in[2]));
            };
            break;
        }
        case OpKind::flatten:
            inst.shapes = {{m, n}};
            inst.values = {gc_random(rng, m * n)};
            inst.build = [pin](const std::vector<Tensor>& in) { return pin(flatten(in[0])); };
            break;
    }
    return inst;
}

inline const std::vector<OpKind>& all_op_kinds() {
    static const std::vector<OpKind> kinds = {
        OpKind::matmul,
        OpKind::add,
        OpKind::elementwise_multiply,
        OpKind::scalar_scale,
        OpKind::softmax,
        OpKind::relu,
        OpKind::sigmoid,
        OpKind::gelu,
        OpKind::layer_norm,
        OpKind::embedding_lookup,
        OpKind::concat,
        OpKind::slice,
        OpKind::mean,
        OpKind::sum,
        OpKind::dropout,
        OpKind::cross_entropy_with_logits,
        OpKind::binary_cross_entropy,
        OpKind::conv1d,
        OpKind::flatten,
        OpKind::transpose,
    };
    return kinds;
}

}  // namespace iasdet::testsupport
