#pragma once

// Plain loop-based reference forward for the encoder, written without the
// tensor library. Gate values equal to 1.0 are skipped outright, so an
// all-ones gate vector exercises a genuinely gate-free code path. Reductions
// mirror the scalar kernel accumulation order, so agreement with the graph
// implementation is expected at (nearly) full precision.

#include <cmath>
#include <cstddef>
#include <vector>

#include "iasdet/encoder.hpp"

namespace oracle {

struct Mat {
    std::size_t rows = 0, cols = 0;
    std::vector<double> v;
};

inline Mat from_tensor(const iasdet::Tensor& t) {
    Mat m;
    if (t.rank() == 2) {
        m.rows = t.dim(0);
        m.cols = t.dim(1);
    } else {
        m.rows = 1;
        m.cols = t.dim(0);
    }
    m.v.assign(t.data().begin(), t.data().end());
    return m;
}

inline Mat matmul(const Mat& a, const Mat& b) {
    Mat c{a.rows, b.cols, std::vector<double>(a.rows * b.cols, 0.0)};
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            for (std::size_t j = 0; j < b.cols; ++j) {
                c.v[i * c.cols + j] =
                    std::fma(a.v[i * a.cols + k], b.v[k * b.cols + j], c.v[i * c.cols + j]);
            }
        }
    }
    return c;
}

inline Mat transpose(const Mat& a) {
    Mat t{a.cols, a.rows, std::vector<double>(a.v.size())};
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < a.cols; ++j) t.v[j * a.rows + i] = a.v[i * a.cols + j];
    }
    return t;
}

inline void softmax_rows_inplace(Mat& a) {
    for (std::size_t r = 0; r < a.rows; ++r) {
        double* y = a.v.data() + r * a.cols;
        double mx = y[0];
        for (std::size_t j = 1; j < a.cols; ++j) mx = std::max(mx, y[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) {
            y[j] = std::exp(y[j] - mx);
            sum += y[j];
        }
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < a.cols; ++j) y[j] = inv * y[j];
    }
}

inline void layer_norm_inplace(Mat& x, const Mat& gain, const Mat& bias, double eps = 1e-5) {
    for (std::size_t r = 0; r < x.rows; ++r) {
        double* xr = x.v.data() + r * x.cols;
        double mean = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) mean += xr[j];
        mean /= static_cast<double>(x.cols);
        double var = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            const double d = xr[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(x.cols);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < x.cols; ++j) {
            xr[j] = (xr[j] - mean) * inv * gain.v[j] + bias.v[j];
        }
    }
}

inline void gelu_inplace(Mat& x) {
    constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double kA = 0.044715;
    for (double& e : x.v) e = 0.5 * e * (1.0 + std::tanh(kC * (e + kA * e * e * e)));
}

inline void add_inplace(Mat& a, const Mat& b) {
    if (b.rows == a.rows) {
        for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
    } else {  // row broadcast
        for (std::size_t r = 0; r < a.rows; ++r) {
            for (std::size_t j = 0; j < a.cols; ++j) a.v[r * a.cols + j] += b.v[j];
        }
    }
}

struct DenseResult {
    std::vector<double> logits;
    std::vector<std::vector<double>> layer_first_token;
};

inline DenseResult dense_forward(const iasdet::EncoderParams& p, const std::vector<int>& ids,
                                 const std::vector<double>& gates) {
    const iasdet::ModelConfig& cfg = p.config;
    const std::size_t T = ids.size();

    const Mat tok = from_tensor(p.tok_embed);
    const Mat pos = from_tensor(p.pos_embed);
    Mat x{T, cfg.d_model, std::vector<double>(T * cfg.d_model)};
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < cfg.d_model; ++j) {
            x.v[t * cfg.d_model + j] =
                tok.v[static_cast<std::size_t>(ids[t]) * cfg.d_model + j] +
                pos.v[t * cfg.d_model + j];
        }
    }

    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(cfg.d_k));
    DenseResult res;
    for (std::size_t layer = 0; layer < cfg.n; ++layer) {
        const iasdet::EncoderParams::Layer& lp = p.layers[layer];

        Mat concat{T, cfg.m * cfg.d_k, std::vector<double>(T * cfg.m * cfg.d_k)};
        for (std::size_t head = 0; head < cfg.m; ++head) {
            const Mat q = matmul(x, from_tensor(lp.heads[head].wq));
            const Mat k = matmul(x, from_tensor(lp.heads[head].wk));
            const Mat v = matmul(x, from_tensor(lp.heads[head].wv));
            Mat scores = matmul(q, transpose(k));
            for (double& s : scores.v) s = inv_sqrt_dk * s;
            softmax_rows_inplace(scores);
            Mat h = matmul(scores, v);
            const double g = gates[layer * cfg.m + head];
            if (g != 1.0) {
                for (double& e : h.v) e = g * e;
            }
            for (std::size_t t = 0; t < T; ++t) {
                for (std::size_t j = 0; j < cfg.d_k; ++j) {
                    concat.v[t * concat.cols + head * cfg.d_k + j] = h.v[t * cfg.d_k + j];
                }
            }
        }
        const Mat proj = matmul(concat, from_tensor(lp.wo));
        add_inplace(x, proj);
        layer_norm_inplace(x, from_tensor(lp.ln1_gain), from_tensor(lp.ln1_bias));

        Mat ff = matmul(x, from_tensor(lp.ff_w1));
        add_inplace(ff, from_tensor(lp.ff_b1));
        gelu_inplace(ff);
        Mat ff2 = matmul(ff, from_tensor(lp.ff_w2));
        add_inplace(ff2, from_tensor(lp.ff_b2));
        add_inplace(x, ff2);
        layer_norm_inplace(x, from_tensor(lp.ln2_gain), from_tensor(lp.ln2_bias));

        res.layer_first_token.emplace_back(x.v.begin(), x.v.begin() + cfg.d_model);
    }

    Mat pooled{1, cfg.d_model, std::vector<double>(x.v.begin(), x.v.begin() + cfg.d_model)};
    Mat logits = matmul(pooled, from_tensor(p.cls_w));
    add_inplace(logits, from_tensor(p.cls_b));
    res.logits = logits.v;
    return res;
}

}  // namespace oracle
