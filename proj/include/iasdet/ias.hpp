#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "iasdet/encoder.hpp"
#include "iasdet/tensor.hpp"

namespace iasdet {

// Deterministic hard-concrete squashing map p^alpha / (p^alpha + (1-p)^alpha).
// Inputs are clamped to [1e-6, 1-1e-6] to dodge the 0/1 singularities.
double hard_concrete(double p, double alpha = 6.0);
Tensor hard_concrete(const Tensor& p, double alpha = 6.0);  // differentiable, elementwise

struct GatingOptions {
    double alpha = 6.0;         // squashing sharpness
    std::size_t eta = 10;       // optimizer steps on the free variables
    double learning_rate = 0.1; // Adam
    double beta = 0.8;          // initial binarization threshold
};

// Free gating variables for one input, their relaxed and binary forms, and
// the bookkeeping the detector features need.
struct GatingState {
    std::vector<double> p;    // length n*m, in (0,1)
    std::vector<double> g;    // relaxed gates f_HC(p)
    std::vector<double> g_b;  // binary mask after threshold + repair
    double alpha = 6.0;
    std::size_t eta = 10;
    double beta = 0.8;
    double beta_used = 0.0;  // threshold that reproduced the target class; 0 when flagged
    bool flagged = false;    // no threshold worked (mask fell back to all ones)
    int target_class = -1;
    std::vector<std::vector<double>> trajectory;  // g after each step, eta+1 rows
};

// eta Adam steps on p (init 0.5) against cross-entropy of the gated forward
// toward target_class. The encoder must be frozen (no parameter may require
// grad) and is left untouched. A non-finite loss stops the optimization and
// flags the state.
GatingState optimize_gating(const EncoderParams& params, const std::vector<int>& ids,
                            int target_class, const GatingOptions& options = {});

// g_b_i = 1 iff g_i >= beta * max(g). beta in (0, 1]; all-zero g is rejected.
std::vector<double> binarize(const std::vector<double>& g, double beta);

// Any layer left with no active head gets its largest relaxed gate promoted
// to 1 (ties to the lowest head index).
std::vector<double> repair_empty_layers(std::vector<double> g_b, const std::vector<double>& g,
                                        std::size_t n, std::size_t m);

// Full protocol: optimize, then binarize at beta, 0.6, 0.4, 0.2 until the
// masked forward reproduces target_class; otherwise flag and fall back to the
// all-ones mask.
GatingState compute_ias(const EncoderParams& params, const std::vector<int>& ids,
                        int target_class, const GatingOptions& options = {});

struct FlippedGating {
    std::vector<double> g_f;                // length n*m
    std::vector<std::size_t> flip_window;   // 1-based layer indices, size ceil(n/3)
};

// Complements g_b inside the middle layers {ceil(n/3) .. 2*ceil(n/3)-1}
// (1-based) and copies it elsewhere. An involution.
FlippedGating flip_middle(const std::vector<double>& g_b, std::size_t n, std::size_t m);

// Line-delimited mask cache.
struct MaskRecord {
    std::string sample_id;
    std::vector<double> p;
    std::vector<double> g_b;
    double beta_used = 0.0;
    bool flagged = false;
    int target_class = -1;
};

void save_mask_cache(const std::filesystem::path& path, const std::vector<MaskRecord>& records);
std::vector<MaskRecord> load_mask_cache(const std::filesystem::path& path);

}  // namespace iasdet
