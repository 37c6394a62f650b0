#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "iasdet/encoder.hpp"
#include "iasdet/ias.hpp"

namespace iasdet {

// The three detector feature families for one sample, plus their
// concatenation (length n*m + n + 5).
struct FeatureVector {
    std::vector<double> f_mask;     // n*m gate pre-activations p
    std::vector<double> f_bmask;    // n*m binary mask (ablation alternative to f_mask)
    std::vector<double> f_flip;     // predicted id, target id, confidence, equality flag
    std::vector<double> f_lw;       // n-1 layer-wise labels, match count, switch count
    std::vector<double> assembled;  // f_mask ++ f_flip ++ f_lw
    double label = 0.0;             // authentic 0 / adversarial 1; soft after CutMix
    bool flagged = false;
    double flip_target_prob = 0.0;  // softmax probability of the target class under g_f
};

std::vector<double> extract_fmask(const GatingState& state);

// Forward under the flipped gates g_f. confidence = softmax probability of
// the predicted class; if target_prob is given it receives the target
// class's probability (used for the confidence-CDF analysis).
std::vector<double> extract_fflip(const EncoderParams& params, const std::vector<int>& ids,
                                  const std::vector<double>& g_f, int target_class,
                                  double* target_prob = nullptr);

// n-1 auxiliary labels under g_f, then match count vs the target class, then
// the number of label switches across consecutive layers.
std::vector<double> extract_flw(const EncoderParams& params, const AuxHeads& aux,
                                const std::vector<int>& ids, const std::vector<double>& g_f,
                                int target_class);

// compute_ias -> flip_middle -> the three families -> concatenation. label is
// left for the caller to set.
FeatureVector assemble_features(const EncoderParams& params, const AuxHeads& aux,
                                const std::vector<int>& ids, const GatingState& state);

// Ablation views are pure selections of the cached data.
enum class FeatureView { full, mask_only, flip_only, lw_only, bin_full };

FeatureView parse_feature_view(const std::string& name);
const char* feature_view_name(FeatureView view);
std::size_t feature_length(FeatureView view, std::size_t n, std::size_t m);

// g_b is consulted only by the bin_full view (binary mask substituted for
// the pre-activations); pass {} otherwise.
std::vector<double> project_features(const std::vector<double>& assembled,
                                     const std::vector<double>& g_b, FeatureView view,
                                     std::size_t n, std::size_t m);

// Optional per-dimension z-scoring for experiments (off by default).
struct Standardizer {
    std::vector<double> mean, stddev;

    static Standardizer fit(const std::vector<std::vector<double>>& rows);
    std::vector<double> apply(const std::vector<double>& row) const;
};

// Line-delimited feature cache.
struct FeatureRecord {
    std::string sample_id;
    std::string attack_type;  // "authentic" or an attack name
    std::string split;        // train | val | test
    std::vector<double> assembled;
    double label = 0.0;
    bool flagged = false;
    double flip_target_prob = 0.0;
};

void save_feature_cache(const std::filesystem::path& path,
                        const std::vector<FeatureRecord>& records);
std::vector<FeatureRecord> load_feature_cache(const std::filesystem::path& path);

}  // namespace iasdet
