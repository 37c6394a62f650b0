#include "iasdet/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "iasdet/ops.hpp"

namespace iasdet {

using nlohmann::json;

std::vector<double> extract_fmask(const GatingState& state) { return state.p; }

std::vector<double> extract_fflip(const EncoderParams& params, const std::vector<int>& ids,
                                  const std::vector<double>& g_f, int target_class,
                                  double* target_prob) {
    const ModelConfig& cfg = params.config;
    if (target_class < 0 || target_class >= cfg.num_classes) {
        fail("extract_fflip: target class ", target_class, " outside 0..", cfg.num_classes - 1);
    }
    Tensor gates = Tensor::from_data({cfg.n * cfg.m}, g_f);
    Tensor probs = softmax_rows(encoder_forward(params, ids, gates).logits);
    const auto pr = probs.data();
    const int predicted = static_cast<int>(std::max_element(pr.begin(), pr.end()) - pr.begin());
    if (target_prob) *target_prob = pr[static_cast<std::size_t>(target_class)];
    return {static_cast<double>(predicted), static_cast<double>(target_class),
            pr[static_cast<std::size_t>(predicted)],
            predicted == target_class ? 1.0 : 0.0};
}

std::vector<double> extract_flw(const EncoderParams& params, const AuxHeads& aux,
                                const std::vector<int>& ids, const std::vector<double>& g_f,
                                int target_class) {
    const ModelConfig& cfg = params.config;
    if (target_class < 0 || target_class >= cfg.num_classes) {
        fail("extract_flw: target class ", target_class, " outside 0..", cfg.num_classes - 1);
    }
    Tensor gates = Tensor::from_data({cfg.n * cfg.m}, g_f);
    const std::vector<int> labels = predict_layerwise(params, aux, ids, gates);

    std::vector<double> out;
    out.reserve(labels.size() + 2);
    double match = 0.0, switches = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out.push_back(static_cast<double>(labels[i]));
        if (labels[i] == target_class) match += 1.0;
        if (i > 0 && labels[i] != labels[i - 1]) switches += 1.0;
    }
    out.push_back(match);
    out.push_back(switches);
    return out;
}

FeatureVector assemble_features(const EncoderParams& params, const AuxHeads& aux,
                                const std::vector<int>& ids, const GatingState& state) {
    const ModelConfig& cfg = params.config;
    const std::size_t count = cfg.n * cfg.m;
    if (state.p.size() != count || state.g_b.size() != count) {
        fail("assemble_features: gating state has ", state.p.size(), "/", state.g_b.size(),
             " entries, expected ", count);
    }

    const FlippedGating flip = flip_middle(state.g_b, cfg.n, cfg.m);

    FeatureVector fv;
    fv.flagged = state.flagged;
    fv.f_mask = extract_fmask(state);
    fv.f_bmask = state.g_b;
    fv.f_flip = extract_fflip(params, ids, flip.g_f, state.target_class, &fv.flip_target_prob);
    fv.f_lw = extract_flw(params, aux, ids, flip.g_f, state.target_class);

    if (fv.f_lw.size() != cfg.n + 1) {
        fail("assemble_features: layer-wise feature has ", fv.f_lw.size(), " entries, expected ",
             cfg.n + 1);
    }
    fv.assembled.reserve(count + cfg.n + 5);
    fv.assembled.insert(fv.assembled.end(), fv.f_mask.begin(), fv.f_mask.end());
    fv.assembled.insert(fv.assembled.end(), fv.f_flip.begin(), fv.f_flip.end());
    fv.assembled.insert(fv.assembled.end(), fv.f_lw.begin(), fv.f_lw.end());
    return fv;
}

FeatureView parse_feature_view(const std::string& name) {
    if (name == "full") return FeatureView::full;
    if (name == "mask") return FeatureView::mask_only;
    if (name == "flip") return FeatureView::flip_only;
    if (name == "lw") return FeatureView::lw_only;
    if (name == "bin") return FeatureView::bin_full;
    fail("unknown feature view '", name, "' (expected full|mask|flip|lw|bin)");
}

const char* feature_view_name(FeatureView view) {
    switch (view) {
        case FeatureView::full: return "full";
        case FeatureView::mask_only: return "mask";
        case FeatureView::flip_only: return "flip";
        case FeatureView::lw_only: return "lw";
        case FeatureView::bin_full: return "bin";
    }
    fail("unknown feature view");
}

std::size_t feature_length(FeatureView view, std::size_t n, std::size_t m) {
    switch (view) {
        case FeatureView::full:
        case FeatureView::bin_full: return n * m + n + 5;
        case FeatureView::mask_only: return n * m;
        case FeatureView::flip_only: return 4;
        case FeatureView::lw_only: return n + 1;
    }
    fail("unknown feature view");
}

std::vector<double> project_features(const std::vector<double>& assembled,
                                     const std::vector<double>& g_b, FeatureView view,
                                     std::size_t n, std::size_t m) {
    const std::size_t nm = n * m;
    if (assembled.size() != nm + n + 5) {
        fail("project_features: assembled vector has ", assembled.size(), " entries, expected ",
             nm + n + 5);
    }
    switch (view) {
        case FeatureView::full: return assembled;
        case FeatureView::mask_only:
            return {assembled.begin(), assembled.begin() + static_cast<std::ptrdiff_t>(nm)};
        case FeatureView::flip_only:
            return {assembled.begin() + static_cast<std::ptrdiff_t>(nm),
                    assembled.begin() + static_cast<std::ptrdiff_t>(nm + 4)};
        case FeatureView::lw_only:
            return {assembled.begin() + static_cast<std::ptrdiff_t>(nm + 4), assembled.end()};
        case FeatureView::bin_full: {
            if (g_b.size() != nm) {
                fail("project_features: bin view needs a binary mask of ", nm, " entries, got ",
                     g_b.size());
            }
            std::vector<double> out = g_b;
            out.insert(out.end(), assembled.begin() + static_cast<std::ptrdiff_t>(nm),
                       assembled.end());
            return out;
        }
    }
    fail("unknown feature view");
}

Standardizer Standardizer::fit(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) fail("standardizer: no rows to fit");
    const std::size_t width = rows.front().size();
    Standardizer s;
    s.mean.assign(width, 0.0);
    s.stddev.assign(width, 0.0);
    for (const auto& row : rows) {
        if (row.size() != width) {
            fail("standardizer: ragged rows (", row.size(), " vs ", width, ")");
        }
        for (std::size_t i = 0; i < width; ++i) s.mean[i] += row[i];
    }
    for (double& v : s.mean) v /= static_cast<double>(rows.size());
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < width; ++i) {
            const double d = row[i] - s.mean[i];
            s.stddev[i] += d * d;
        }
    }
    for (double& v : s.stddev) {
        v = std::sqrt(v / static_cast<double>(rows.size()));
        if (v < 1e-12) v = 1.0;  // constant dimension: leave it centered only
    }
    return s;
}

std::vector<double> Standardizer::apply(const std::vector<double>& row) const {
    if (row.size() != mean.size()) {
        fail("standardizer: row of ", row.size(), " entries, fitted on ", mean.size());
    }
    std::vector<double> out(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) out[i] = (row[i] - mean[i]) / stddev[i];
    return out;
}

void save_feature_cache(const std::filesystem::path& path,
                        const std::vector<FeatureRecord>& records) {
    std::ofstream out(path);
    if (!out) fail("feature cache: cannot open ", path.string(), " for writing");
    for (const FeatureRecord& r : records) {
        const json j = {{"sample_id", r.sample_id},
                        {"attack_type", r.attack_type},
                        {"split", r.split},
                        {"assembled", r.assembled},
                        {"label", r.label},
                        {"flagged", r.flagged},
                        {"flip_target_prob", r.flip_target_prob}};
        out << j.dump() << '\n';
    }
    if (!out) fail("feature cache: write to ", path.string(), " failed");
}

std::vector<FeatureRecord> load_feature_cache(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail("feature cache: cannot open ", path.string());
    std::vector<FeatureRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            fail("feature cache: invalid json at ", path.string(), ":", line_no);
        }
        try {
            FeatureRecord r;
            r.sample_id = j.at("sample_id").get<std::string>();
            r.attack_type = j.at("attack_type").get<std::string>();
            r.split = j.at("split").get<std::string>();
            r.assembled = j.at("assembled").get<std::vector<double>>();
            r.label = j.at("label").get<double>();
            r.flagged = j.at("flagged").get<bool>();
            r.flip_target_prob = j.at("flip_target_prob").get<double>();
            records.push_back(std::move(r));
        } catch (const json::exception& e) {
            fail("feature cache: bad record at ", path.string(), ":", line_no, " (", e.what(),
                 ")");
        }
    }
    return records;
}

}  // namespace iasdet
