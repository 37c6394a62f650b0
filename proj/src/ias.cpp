#include "iasdet/ias.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "iasdet/ops.hpp"
#include "iasdet/optim.hpp"

namespace iasdet {

using nlohmann::json;

namespace {

constexpr double kClampLo = 1e-6;
constexpr double kClampHi = 1.0 - 1e-6;

double hc_value(double p, double alpha) {
    const double c = std::clamp(p, kClampLo, kClampHi);
    const double a = std::pow(c, alpha);
    const double b = std::pow(1.0 - c, alpha);
    return a / (a + b);
}

double hc_derivative(double p, double alpha) {
    if (p < kClampLo || p > kClampHi) return 0.0;  // clamped region is flat
    const double a = std::pow(p, alpha);
    const double b = std::pow(1.0 - p, alpha);
    const double denom = (a + b) * (a + b);
    return alpha * std::pow(p, alpha - 1.0) * std::pow(1.0 - p, alpha - 1.0) / denom;
}

int argmax_class(const Tensor& logits) {
    const auto d = logits.data();
    return static_cast<int>(std::max_element(d.begin(), d.end()) - d.begin());
}

}  // namespace

double hard_concrete(double p, double alpha) { return hc_value(p, alpha); }

Tensor hard_concrete(const Tensor& p, double alpha) {
    return detail::unary_map(p, "hard-concrete", &hc_value, &hc_derivative, alpha);
}

GatingState optimize_gating(const EncoderParams& params, const std::vector<int>& ids,
                            int target_class, const GatingOptions& options) {
    const ModelConfig& cfg = params.config;
    if (target_class < 0 || target_class >= cfg.num_classes) {
        fail("optimize_gating: target class ", target_class, " outside 0..",
             cfg.num_classes - 1);
    }
    for (const Tensor& t : params.parameters()) {
        if (t.requires_grad()) {
            fail("optimize_gating: encoder must be frozen, found a parameter with "
                 "requires_grad set");
        }
    }

    GatingState state;
    state.alpha = options.alpha;
    state.eta = options.eta;
    state.beta = options.beta;
    state.target_class = target_class;

    Tensor p = Tensor::full({cfg.n * cfg.m}, 0.5, /*requires_grad=*/true);
    Optimizer opt = make_adam(options.learning_rate);

    auto record = [&] {
        std::vector<double> g(p.numel());
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] = hc_value(p.data()[i], options.alpha);
        }
        state.trajectory.push_back(std::move(g));
    };
    record();

    for (std::size_t step = 0; step < options.eta; ++step) {
        Tensor gates = hard_concrete(p, options.alpha);
        Tensor logits = encoder_forward(params, ids, gates).logits;
        Tensor loss = cross_entropy_with_logits(logits, target_class);
        if (!std::isfinite(loss.item())) {
            state.flagged = true;
            break;
        }
        backward(loss);
        apply_optimizer(opt, {p});
        for (double& v : p.mutable_data()) v = std::clamp(v, kClampLo, kClampHi);
        record();
    }

    state.p.assign(p.data().begin(), p.data().end());
    state.g = state.trajectory.back();
    return state;
}

std::vector<double> binarize(const std::vector<double>& g, double beta) {
    if (g.empty()) fail("binarize: empty gate vector");
    if (!(beta > 0.0 && beta <= 1.0)) fail("binarize: beta ", beta, " outside (0, 1]");
    const double mx = *std::max_element(g.begin(), g.end());
    if (mx <= 0.0) fail("binarize: all-zero gate vector cannot be thresholded");
    const double threshold = beta * mx;
    std::vector<double> out(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] >= threshold ? 1.0 : 0.0;
    return out;
}

std::vector<double> repair_empty_layers(std::vector<double> g_b, const std::vector<double>& g,
                                        std::size_t n, std::size_t m) {
    if (g_b.size() != n * m || g.size() != n * m) {
        fail("repair_empty_layers: expected ", n * m, " gates, got ", g_b.size(), " and ",
             g.size());
    }
    for (std::size_t layer = 0; layer < n; ++layer) {
        const std::size_t base = layer * m;
        bool any = false;
        for (std::size_t h = 0; h < m; ++h) any = any || g_b[base + h] == 1.0;
        if (any) continue;
        std::size_t best = 0;
        for (std::size_t h = 1; h < m; ++h) {
            if (g[base + h] > g[base + best]) best = h;  // ties keep the lowest index
        }
        g_b[base + best] = 1.0;
    }
    return g_b;
}

GatingState compute_ias(const EncoderParams& params, const std::vector<int>& ids,
                        int target_class, const GatingOptions& options) {
    const ModelConfig& cfg = params.config;
    GatingState state = optimize_gating(params, ids, target_class, options);

    if (!state.flagged) {
        for (double beta = options.beta; beta >= 0.2 - 1e-9; beta -= 0.2) {
            const double rounded = std::round(beta * 10.0) / 10.0;
            std::vector<double> mask =
                repair_empty_layers(binarize(state.g, rounded), state.g, cfg.n, cfg.m);
            Tensor gates = Tensor::from_data({cfg.n * cfg.m}, mask);
            if (argmax_class(encoder_forward(params, ids, gates).logits) == target_class) {
                state.g_b = std::move(mask);
                state.beta_used = rounded;
                return state;
            }
        }
        state.flagged = true;
    }

    // unrecoverable: fall back to the all-ones mask so the pipeline never
    // drops the sample
    state.g_b.assign(cfg.n * cfg.m, 1.0);
    state.beta_used = 0.0;
    return state;
}

FlippedGating flip_middle(const std::vector<double>& g_b, std::size_t n, std::size_t m) {
    if (n == 0 || m == 0 || g_b.size() != n * m) {
        fail("flip_middle: expected ", n * m, " gates for ", n, " layers x ", m, " heads, got ",
             g_b.size());
    }
    for (double v : g_b) {
        if (v != 0.0 && v != 1.0) fail("flip_middle: non-binary gate value ", v);
    }
    const std::size_t lo = (n + 2) / 3;  // ceil(n/3), 1-based
    const std::size_t hi = 2 * lo - 1;

    FlippedGating out;
    out.g_f = g_b;
    for (std::size_t layer = lo; layer <= hi && layer <= n; ++layer) {
        out.flip_window.push_back(layer);
        const std::size_t base = (layer - 1) * m;
        for (std::size_t h = 0; h < m; ++h) out.g_f[base + h] = 1.0 - g_b[base + h];
    }
    return out;
}

void save_mask_cache(const std::filesystem::path& path, const std::vector<MaskRecord>& records) {
    std::ofstream out(path);
    if (!out) fail("mask cache: cannot open ", path.string(), " for writing");
    for (const MaskRecord& r : records) {
        const json j = {{"sample_id", r.sample_id}, {"p", r.p},
                        {"g_b", r.g_b},             {"beta_used", r.beta_used},
                        {"flagged", r.flagged},     {"target_class", r.target_class}};
        out << j.dump() << '\n';
    }
    if (!out) fail("mask cache: write to ", path.string(), " failed");
}

std::vector<MaskRecord> load_mask_cache(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail("mask cache: cannot open ", path.string());
    std::vector<MaskRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            fail("mask cache: invalid json at ", path.string(), ":", line_no);
        }
        try {
            MaskRecord r;
            r.sample_id = j.at("sample_id").get<std::string>();
            r.p = j.at("p").get<std::vector<double>>();
            r.g_b = j.at("g_b").get<std::vector<double>>();
            r.beta_used = j.at("beta_used").get<double>();
            r.flagged = j.at("flagged").get<bool>();
            r.target_class = j.at("target_class").get<int>();
            records.push_back(std::move(r));
        } catch (const json::exception& e) {
            fail("mask cache: bad record at ", path.string(), ":", line_no, " (", e.what(), ")");
        }
    }
    return records;
}

}  // namespace iasdet
