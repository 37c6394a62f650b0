#include "iasdet/ops.hpp"

#include <cmath>
#include <numbers>

#include "iasdet/simd/kernels.hpp"

namespace iasdet {
namespace {

using detail::TensorImpl;

const simd::KernelTable& K() { return simd::active_kernels(); }

Tensor make_result(Shape shape, std::vector<double> data, const char* op,
                   std::vector<Tensor> inputs,
                   std::function<void(const TensorImpl&)> backprop) {
    bool needs_grad = false;
    for (const Tensor& t : inputs) needs_grad |= t.requires_grad();
    Tensor out = Tensor::from_data(std::move(shape), std::move(data), needs_grad);
    if (needs_grad) {
        auto node = std::make_shared<detail::Node>();
        node->op = op;
        node->inputs = std::move(inputs);
        node->backprop = std::move(backprop);
        out.set_lineage(std::move(node));
    }
    return out;
}

std::vector<double> transpose_raw(const double* a, std::size_t rows, std::size_t cols) {
    std::vector<double> out(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = a[r * cols + c];
    }
    return out;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
    if (t.rank() != rank) {
        fail(op, ": expected rank-", rank, " tensor, got ", shape_str(t.shape()));
    }
}

// Scatter-style backwards write into a tensor's grad directly; respects the
// requires_grad contract like accumulate_grad.
std::span<double> grad_sink(const Tensor& t, bool& enabled) {
    enabled = t.requires_grad();
    if (!enabled) return {};
    return const_cast<Tensor&>(t).mutable_grad();
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        fail("matmul: incompatible shapes ", shape_str(a.shape()), " and ", shape_str(b.shape()));
    }
    const std::size_t m = a.dim(0), kk = a.dim(1), n = b.dim(1);
    std::vector<double> out(m * n, 0.0);
    K().matmul_acc(m, n, kk, a.data().data(), b.data().data(), out.data());
    return make_result({m, n}, std::move(out), "matmul", {a, b}, [a, b, m, kk, n](const TensorImpl& o) {
        if (a.requires_grad()) {
            auto bt = transpose_raw(b.data().data(), kk, n);  // n x k
            auto ga = const_cast<Tensor&>(a).mutable_grad();
            K().matmul_acc(m, kk, n, o.grad.data(), bt.data(), ga.data());
        }
        if (b.requires_grad()) {
            auto at = transpose_raw(a.data().data(), m, kk);  // k x m
            auto gb = const_cast<Tensor&>(b).mutable_grad();
            K().matmul_acc(kk, n, m, at.data(), o.grad.data(), gb.data());
        }
    });
}

Tensor transpose(const Tensor& a) {
    require_rank(a, 2, "transpose");
    const std::size_t m = a.dim(0), n = a.dim(1);
    auto out = transpose_raw(a.data().data(), m, n);
    return make_result({n, m}, std::move(out), "transpose", {a}, [a, m, n](const TensorImpl& o) {
        bool on;
        auto ga = grad_sink(a, on);
        if (!on) return;
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < m; ++c) ga[c * n + r] += o.grad[r * m + c];
        }
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) {
        std::vector<double> out(a.numel());
        K().add(out.size(), a.data().data(), b.data().data(), out.data());
        return make_result(a.shape(), std::move(out), "add", {a, b}, [a, b](const TensorImpl& o) {
            accumulate_grad(a, o.grad);
            accumulate_grad(b, o.grad);
        });
    }
    if (a.rank() == 2 && b.rank() == 1 && a.dim(1) == b.dim(0)) {
        const std::size_t rows = a.dim(0), cols = a.dim(1);
        std::vector<double> out(a.numel());
        for (std::size_t r = 0; r < rows; ++r) {
            K().add(cols, a.data().data() + r * cols, b.data().data(), out.data() + r * cols);
        }
        return make_result(a.shape(), std::move(out), "add", {a, b},
                           [a, b, rows, cols](const TensorImpl& o) {
                               accumulate_grad(a, o.grad);
                               bool on;
                               auto gb = grad_sink(b, on);
                               if (!on) return;
                               for (std::size_t r = 0; r < rows; ++r) {
                                   K().axpy(cols, 1.0, o.grad.data() + r * cols, gb.data());
                               }
                           });
    }
    fail("add: incompatible shapes ", shape_str(a.shape()), " and ", shape_str(b.shape()));
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) {
        std::vector<double> out(a.numel());
        K().mul(out.size(), a.data().data(), b.data().data(), out.data());
        return make_result(a.shape(), std::move(out), "elementwise-multiply", {a, b},
                           [a, b](const TensorImpl& o) {
                               if (a.requires_grad()) {
                                   std::vector<double> d(o.grad.size());
                                   K().mul(d.size(), o.grad.data(), b.data().data(), d.data());
                                   accumulate_grad(a, d);
                               }
                               if (b.requires_grad()) {
                                   std::vector<double> d(o.grad.size());
                                   K().mul(d.size(), o.grad.data(), a.data().data(), d.data());
                                   accumulate_grad(b, d);
                               }
                           });
    }
    const bool a_scalar = a.numel() == 1, b_scalar = b.numel() == 1;
    if (a_scalar || b_scalar) {
        const Tensor& vec = a_scalar ? b : a;
        const Tensor& sc = a_scalar ? a : b;
        const double sv = sc.data()[0];
        std::vector<double> out(vec.numel());
        K().scale(out.size(), sv, vec.data().data(), out.data());
        return make_result(vec.shape(), std::move(out), "elementwise-multiply", {a, b},
                           [vec, sc, sv](const TensorImpl& o) {
                               if (vec.requires_grad()) {
                                   std::vector<double> d(o.grad.size());
                                   K().scale(d.size(), sv, o.grad.data(), d.data());
                                   accumulate_grad(vec, d);
                               }
                               if (sc.requires_grad()) {
                                   double acc = 0.0;
                                   for (std::size_t i = 0; i < o.grad.size(); ++i) {
                                       acc += o.grad[i] * vec.data()[i];
                                   }
                                   accumulate_grad(sc, std::span<const double>(&acc, 1));
                               }
                           });
    }
    fail("elementwise-multiply: incompatible shapes ", shape_str(a.shape()), " and ",
         shape_str(b.shape()));
}

Tensor scale(const Tensor& a, double s) {
    std::vector<double> out(a.numel());
    K().scale(out.size(), s, a.data().data(), out.data());
    return make_result(a.shape(), std::move(out), "scalar-scale", {a}, [a, s](const TensorImpl& o) {
        if (!a.requires_grad()) return;
        auto ga = const_cast<Tensor&>(a).mutable_grad();
        K().axpy(ga.size(), s, o.grad.data(), ga.data());
    });
}

Tensor softmax_rows(const Tensor& a) {
    if (a.rank() < 1 || a.rank() > 2) {
        fail("softmax: expected rank-1 or rank-2 tensor, got ", shape_str(a.shape()));
    }
    const std::size_t cols = a.dim(a.rank() - 1);
    const std::size_t rows = a.numel() / cols;
    std::vector<double> out(a.numel());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = a.data().data() + r * cols;
        double* y = out.data() + r * cols;
        double mx = x[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        const double inv = 1.0 / sum;
        K().scale(cols, inv, y, y);
    }
    auto saved = out;
    return make_result(a.shape(), std::move(out), "softmax", {a},
                       [a, saved, rows, cols](const TensorImpl& o) {
                           bool on;
                           auto ga = grad_sink(a, on);
                           if (!on) return;
                           for (std::size_t r = 0; r < rows; ++r) {
                               const double* y = saved.data() + r * cols;
                               const double* dy = o.grad.data() + r * cols;
                               double dot = 0.0;
                               for (std::size_t j = 0; j < cols; ++j) dot += dy[j] * y[j];
                               for (std::size_t j = 0; j < cols; ++j) {
                                   ga[r * cols + j] += y[j] * (dy[j] - dot);
                               }
                           }
                       });
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.numel());
    K().relu(out.size(), a.data().data(), out.data());
    return make_result(a.shape(), std::move(out), "relu", {a}, [a](const TensorImpl& o) {
        bool on;
        auto ga = grad_sink(a, on);
        if (!on) return;
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            if (a.data()[i] > 0.0) ga[i] += o.grad[i];
        }
    });
}

Tensor sigmoid(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a.data()[i]));
    auto saved = out;
    return make_result(a.shape(), std::move(out), "sigmoid", {a}, [a, saved](const TensorImpl& o) {
        bool on;
        auto ga = grad_sink(a, on);
        if (!on) return;
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            ga[i] += o.grad[i] * saved[i] * (1.0 - saved[i]);
        }
    });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Tensor gelu(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = a.data()[i];
        out[i] = 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
    }
    return make_result(a.shape(), std::move(out), "gelu", {a}, [a](const TensorImpl& o) {
        bool on;
        auto ga = grad_sink(a, on);
        if (!on) return;
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            const double x = a.data()[i];
            const double u = kGeluC * (x + kGeluA * x * x * x);
            const double t = std::tanh(u);
            const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
            ga[i] += o.grad[i] * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du);
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    if (x.rank() < 1 || x.rank() > 2) {
        fail("layer-normalization: expected rank-1 or rank-2 input, got ", shape_str(x.shape()));
    }
    const std::size_t cols = x.dim(x.rank() - 1);
    const std::size_t rows = x.numel() / cols;
    if (gain.rank() != 1 || gain.dim(0) != cols || bias.rank() != 1 || bias.dim(0) != cols) {
        fail("layer-normalization: gain/bias ", shape_str(gain.shape()), "/",
             shape_str(bias.shape()), " do not match feature width ", cols);
    }
    std::vector<double> out(x.numel());
    std::vector<double> xhat(x.numel());
    std::vector<double> inv_std(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data().data() + r * cols;
        double mean = 0.0;
        for (std::size_t j = 0; j < cols; ++j) mean += xr[j];
        mean /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            const double d = xr[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(cols);
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_std[r] = inv;
        for (std::size_t j = 0; j < cols; ++j) {
            const double h = (xr[j] - mean) * inv;
            xhat[r * cols + j] = h;
            out[r * cols + j] = h * gain.data()[j] + bias.data()[j];
        }
    }
    return make_result(x.shape(), std::move(out), "layer-normalization", {x, gain, bias},
                       [x, gain, bias, xhat, inv_std, rows, cols](const TensorImpl& o) {
                           for (std::size_t r = 0; r < rows; ++r) {
                               const double* dy = o.grad.data() + r * cols;
                               const double* xh = xhat.data() + r * cols;
                               if (x.requires_grad()) {
                                   // dx = inv_std * (g - mean(g) - xhat * mean(g*xhat)),
                                   // g = dy * gain
                                   double mean_g = 0.0, mean_gx = 0.0;
                                   for (std::size_t j = 0; j < cols; ++j) {
                                       const double g = dy[j] * gain.data()[j];
                                       mean_g += g;
                                       mean_gx += g * xh[j];
                                   }
                                   mean_g /= static_cast<double>(cols);
                                   mean_gx /= static_cast<double>(cols);
                                   auto gx = const_cast<Tensor&>(x).mutable_grad();
                                   for (std::size_t j = 0; j < cols; ++j) {
                                       const double g = dy[j] * gain.data()[j];
                                       gx[r * cols + j] += inv_std[r] * (g - mean_g - xh[j] * mean_gx);
                                   }
                               }
                               if (gain.requires_grad()) {
                                   auto gg = const_cast<Tensor&>(gain).mutable_grad();
                                   for (std::size_t j = 0; j < cols; ++j) gg[j] += dy[j] * xh[j];
                               }
                               if (bias.requires_grad()) {
                                   auto gb = const_cast<Tensor&>(bias).mutable_grad();
                                   for (std::size_t j = 0; j < cols; ++j) gb[j] += dy[j];
                               }
                           }
                       });
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
    require_rank(table, 2, "embedding-lookup");
    const std::size_t vocab = table.dim(0), width = table.dim(1);
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
            fail("embedding-lookup: id ", id, " out of range for table ", shape_str(table.shape()));
        }
    }
    std::vector<double> out(ids.size() * width);
    for (std::size_t t = 0; t < ids.size(); ++t) {
        const double* src = table.data().data() + static_cast<std::size_t>(ids[t]) * width;
        std::copy(src, src + width, out.data() + t * width);
    }
    return make_result({ids.size(), width}, std::move(out), "embedding-lookup", {table},
                       [table, ids, width](const TensorImpl& o) {
                           bool on;
                           auto gt = grad_sink(table, on);
                           if (!on) return;
                           for (std::size_t t = 0; t < ids.size(); ++t) {
                               K().axpy(width, 1.0, o.grad.data() + t * width,
                                        gt.data() + static_cast<std::size_t>(ids[t]) * width);
                           }
                       });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) fail("concatenate: no inputs");
    const std::size_t rank = parts[0].rank();
    if (rank != 1 && rank != 2) {
        fail("concatenate: expected rank-1 or rank-2 inputs, got ", shape_str(parts[0].shape()));
    }
    const std::size_t rows = rank == 2 ? parts[0].dim(0) : 1;
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != rank || (rank == 2 && p.dim(0) != rows)) {
            fail("concatenate: mismatched part ", shape_str(p.shape()), " against ",
                 shape_str(parts[0].shape()));
        }
        total += p.dim(rank - 1);
    }
    std::vector<double> out(rows * total);
    std::size_t off = 0;
    for (const Tensor& p : parts) {
        const std::size_t w = p.dim(rank - 1);
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy(p.data().data() + r * w, p.data().data() + (r + 1) * w,
                      out.data() + r * total + off);
        }
        off += w;
    }
    Shape shape = rank == 2 ? Shape{rows, total} : Shape{total};
    return make_result(std::move(shape), std::move(out), "concatenate", {parts},
                       [parts, rows, total, rank](const TensorImpl& o) {
                           std::size_t off = 0;
                           for (const Tensor& p : parts) {
                               const std::size_t w = p.dim(rank - 1);
                               if (p.requires_grad()) {
                                   auto gp = const_cast<Tensor&>(p).mutable_grad();
                                   for (std::size_t r = 0; r < rows; ++r) {
                                       K().axpy(w, 1.0, o.grad.data() + r * total + off,
                                                gp.data() + r * w);
                                   }
                               }
                               off += w;
                           }
                       });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
    if (a.rank() < 1 || a.rank() > 2 || axis >= a.rank()) {
        fail("slice: axis ", axis, " invalid for tensor ", shape_str(a.shape()));
    }
    if (begin >= end || end > a.dim(axis)) {
        fail("slice: range [", begin, ", ", end, ") invalid for axis ", axis, " of ",
             shape_str(a.shape()));
    }
    const std::size_t cols = a.rank() == 2 ? a.dim(1) : 1;
    const std::size_t width = end - begin;
    Shape shape;
    std::vector<double> out;
    if (axis == 0) {
        shape = a.rank() == 2 ? Shape{width, cols} : Shape{width};
        out.assign(a.data().begin() + begin * cols, a.data().begin() + end * cols);
    } else {
        shape = {a.dim(0), width};
        out.resize(a.dim(0) * width);
        for (std::size_t r = 0; r < a.dim(0); ++r) {
            std::copy(a.data().data() + r * cols + begin, a.data().data() + r * cols + end,
                      out.data() + r * width);
        }
    }
    return make_result(std::move(shape), std::move(out), "slice", {a},
                       [a, axis, begin, width, cols](const TensorImpl& o) {
                           bool on;
                           auto ga = grad_sink(a, on);
                           if (!on) return;
                           if (axis == 0) {
                               K().axpy(o.grad.size(), 1.0, o.grad.data(), ga.data() + begin * cols);
                           } else {
                               for (std::size_t r = 0; r < a.dim(0); ++r) {
                                   K().axpy(width, 1.0, o.grad.data() + r * width,
                                            ga.data() + r * cols + begin);
                               }
                           }
                       });
}

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return make_result({1}, {s}, "sum", {a}, [a](const TensorImpl& o) {
        bool on;
        auto ga = grad_sink(a, on);
        if (!on) return;
        for (double& g : ga) g += o.grad[0];
    });
}

Tensor mean_all(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    const double inv = 1.0 / static_cast<double>(a.numel());
    return make_result({1}, {s * inv}, "mean", {a}, [a, inv](const TensorImpl& o) {
        bool on;
        auto ga = grad_sink(a, on);
        if (!on) return;
        for (double& g : ga) g += o.grad[0] * inv;
    });
}

Tensor dropout(const Tensor& a, double rate, bool train, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) fail("dropout: rate ", rate, " outside [0, 1)");
    if (!train || rate == 0.0) return a;
    std::vector<double> mask(a.numel());
    const double keep = 1.0 / (1.0 - rate);
    for (double& m : mask) m = rng.uniform() >= rate ? keep : 0.0;
    std::vector<double> out(a.numel());
    K().mul(out.size(), a.data().data(), mask.data(), out.data());
    return make_result(a.shape(), std::move(out), "dropout", {a}, [a, mask](const TensorImpl& o) {
        if (!a.requires_grad()) return;
        std::vector<double> d(o.grad.size());
        K().mul(d.size(), o.grad.data(), mask.data(), d.data());
        accumulate_grad(a, d);
    });
}

Tensor cross_entropy_with_logits(const Tensor& logits, int target) {
    require_rank(logits, 1, "cross-entropy-with-logits");
    const std::size_t c = logits.dim(0);
    if (target < 0 || static_cast<std::size_t>(target) >= c) {
        fail("cross-entropy-with-logits: target ", target, " out of range for ", c, " classes");
    }
    const double* x = logits.data().data();
    double mx = x[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    std::vector<double> probs(c);
    for (std::size_t j = 0; j < c; ++j) {
        probs[j] = std::exp(x[j] - mx);
        sum += probs[j];
    }
    const double inv = 1.0 / sum;
    for (double& p : probs) p *= inv;
    const double loss = std::log(sum) + mx - x[target];
    return make_result({1}, {loss}, "cross-entropy-with-logits", {logits},
                       [logits, probs, target](const TensorImpl& o) {
                           bool on;
                           auto g = grad_sink(logits, on);
                           if (!on) return;
                           for (std::size_t j = 0; j < probs.size(); ++j) {
                               const double onehot = static_cast<int>(j) == target ? 1.0 : 0.0;
                               g[j] += o.grad[0] * (probs[j] - onehot);
                           }
                       });
}

Tensor binary_cross_entropy(const Tensor& p, double y) {
    if (p.numel() != 1) {
        fail("binary-cross-entropy: expected scalar probability, got ", shape_str(p.shape()));
    }
    if (y < 0.0 || y > 1.0) fail("binary-cross-entropy: label ", y, " outside [0, 1]");
    const double pv = std::min(std::max(p.data()[0], 1e-12), 1.0 - 1e-12);
    const double loss = -(y * std::log(pv) + (1.0 - y) * std::log(1.0 - pv));
    return make_result({1}, {loss}, "binary-cross-entropy", {p}, [p, y, pv](const TensorImpl& o) {
        bool on;
        auto g = grad_sink(p, on);
        if (!on) return;
        g[0] += o.grad[0] * (pv - y) / (pv * (1.0 - pv));
    });
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 2 || w.rank() != 3 || b.rank() != 1) {
        fail("conv1d: expected input [C_in x L], kernel [C_out x C_in x K], bias [C_out]; got ",
             shape_str(x.shape()), ", ", shape_str(w.shape()), ", ", shape_str(b.shape()));
    }
    const std::size_t cin = x.dim(0), len = x.dim(1);
    const std::size_t cout = w.dim(0), ksz = w.dim(2);
    if (w.dim(1) != cin || b.dim(0) != cout || len < ksz) {
        fail("conv1d: incompatible shapes ", shape_str(x.shape()), ", ", shape_str(w.shape()),
             ", ", shape_str(b.shape()));
    }
    const std::size_t olen = len - ksz + 1;
    std::vector<double> out(cout * olen);
    for (std::size_t o = 0; o < cout; ++o) {
        for (std::size_t t = 0; t < olen; ++t) {
            double acc = b.data()[o];
            for (std::size_t ci = 0; ci < cin; ++ci) {
                const double* xr = x.data().data() + ci * len + t;
                const double* wr = w.data().data() + (o * cin + ci) * ksz;
                for (std::size_t k = 0; k < ksz; ++k) acc += wr[k] * xr[k];
            }
            out[o * olen + t] = acc;
        }
    }
    return make_result({cout, olen}, std::move(out), "conv1d", {x, w, b},
                       [x, w, b, cin, len, cout, ksz, olen](const TensorImpl& og) {
                           for (std::size_t o = 0; o < cout; ++o) {
                               const double* dy = og.grad.data() + o * olen;
                               if (b.requires_grad()) {
                                   auto gb = const_cast<Tensor&>(b).mutable_grad();
                                   for (std::size_t t = 0; t < olen; ++t) gb[o] += dy[t];
                               }
                               for (std::size_t ci = 0; ci < cin; ++ci) {
                                   const double* xr = x.data().data() + ci * len;
                                   const double* wr = w.data().data() + (o * cin + ci) * ksz;
                                   if (w.requires_grad()) {
                                       auto gw = const_cast<Tensor&>(w).mutable_grad();
                                       double* gwr = gw.data() + (o * cin + ci) * ksz;
                                       for (std::size_t k = 0; k < ksz; ++k) {
                                           double acc = 0.0;
                                           for (std::size_t t = 0; t < olen; ++t) {
                                               acc += dy[t] * xr[t + k];
                                           }
                                           gwr[k] += acc;
                                       }
                                   }
                                   if (x.requires_grad()) {
                                       auto gx = const_cast<Tensor&>(x).mutable_grad();
                                       double* gxr = gx.data() + ci * len;
                                       for (std::size_t t = 0; t < olen; ++t) {
                                           for (std::size_t k = 0; k < ksz; ++k) {
                                               gxr[t + k] += dy[t] * wr[k];
                                           }
                                       }
                                   }
                               }
                           }
                       });
}

Tensor flatten(const Tensor& a) {
    std::vector<double> out(a.data().begin(), a.data().end());
    return make_result({a.numel()}, std::move(out), "flatten", {a}, [a](const TensorImpl& o) {
        accumulate_grad(a, o.grad);
    });
}

Tensor reshape(const Tensor& a, const Shape& shape) {
    std::size_t numel = 1;
    for (std::size_t d : shape) numel *= d;
    if (shape.empty() || numel != a.numel()) {
        fail("reshape: cannot view ", shape_str(a.shape()), " as ", shape_str(shape));
    }
    std::vector<double> out(a.data().begin(), a.data().end());
    return make_result(shape, std::move(out), "reshape", {a}, [a](const TensorImpl& o) {
        accumulate_grad(a, o.grad);
    });
}

namespace detail {

Tensor unary_map(const Tensor& x, const char* op, double (*f)(double, double),
                 double (*df)(double, double), double attr) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x.data()[i], attr);
    return make_result(x.shape(), std::move(out), op, {x}, [x, df, attr](const TensorImpl& o) {
        bool on;
        auto gx = grad_sink(x, on);
        if (!on) return;
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            gx[i] += o.grad[i] * df(x.data()[i], attr);
        }
    });
}

}  // namespace detail

const char* op_kind_name(OpKind kind) {
    switch (kind) {
        case OpKind::matmul: return "matmul";
        case OpKind::add: return "add";
        case OpKind::elementwise_multiply: return "elementwise-multiply";
        case OpKind::scalar_scale: return "scalar-scale";
        case OpKind::softmax: return "softmax";
        case OpKind::relu: return "relu";
        case OpKind::sigmoid: return "sigmoid";
        case OpKind::gelu: return "gelu";
        case OpKind::layer_norm: return "layer-normalization";
        case OpKind::embedding_lookup: return "embedding-lookup";
        case OpKind::concat: return "concatenate";
        case OpKind::slice: return "slice";
        case OpKind::mean: return "mean";
        case OpKind::sum: return "sum";
        case OpKind::dropout: return "dropout";
        case OpKind::cross_entropy_with_logits: return "cross-entropy-with-logits";
        case OpKind::binary_cross_entropy: return "binary-cross-entropy";
        case OpKind::conv1d: return "conv1d";
        case OpKind::flatten: return "flatten";
        case OpKind::transpose: return "transpose";
    }
    return "?";
}

Tensor forward_op(OpKind kind, const std::vector<Tensor>& inputs, const OpAttrs& attrs) {
    auto arity = [&](std::size_t n) {
        if (inputs.size() != n) {
            fail(op_kind_name(kind), ": expected ", n, " inputs, got ", inputs.size());
        }
    };
    switch (kind) {
        case OpKind::matmul: arity(2); return matmul(inputs[0], inputs[1]);
        case OpKind::add: arity(2); return add(inputs[0], inputs[1]);
        case OpKind::elementwise_multiply: arity(2); return mul(inputs[0], inputs[1]);
        case OpKind::scalar_scale: arity(1); return scale(inputs[0], attrs.scale);
        case OpKind::softmax: arity(1); return softmax_rows(inputs[0]);
        case OpKind::relu: arity(1); return relu(inputs[0]);
        case OpKind::sigmoid: arity(1); return sigmoid(inputs[0]);
        case OpKind::gelu: arity(1); return gelu(inputs[0]);
        case OpKind::layer_norm:
            arity(3);
            return layer_norm(inputs[0], inputs[1], inputs[2], attrs.eps);
        case OpKind::embedding_lookup: arity(1); return embedding_lookup(inputs[0], attrs.ids);
        case OpKind::concat: return concat_cols(inputs);
        case OpKind::slice:
            arity(1);
            return slice(inputs[0], attrs.axis, attrs.begin, attrs.end);
        case OpKind::mean: arity(1); return mean_all(inputs[0]);
        case OpKind::sum: arity(1); return sum_all(inputs[0]);
        case OpKind::dropout:
            arity(1);
            if (!attrs.rng) fail("dropout: rng required");
            return dropout(inputs[0], attrs.rate, attrs.train, *attrs.rng);
        case OpKind::cross_entropy_with_logits:
            arity(1);
            return cross_entropy_with_logits(inputs[0], attrs.target);
        case OpKind::binary_cross_entropy: arity(1); return binary_cross_entropy(inputs[0], attrs.y);
        case OpKind::conv1d: arity(3); return conv1d(inputs[0], inputs[1], inputs[2]);
        case OpKind::flatten: arity(1); return flatten(inputs[0]);
        case OpKind::transpose: arity(1); return transpose(inputs[0]);
    }
    fail("forward_op: unknown op kind");
}

}  // namespace iasdet
