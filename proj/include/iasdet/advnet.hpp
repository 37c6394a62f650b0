#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "iasdet/checkpoint.hpp"
#include "iasdet/rng.hpp"
#include "iasdet/tensor.hpp"

namespace iasdet {

// The adversarial detector: a fixed 1-D CNN over assembled feature vectors.
// conv(k3, 1->32) relu -> conv(k3, 32->16) relu -> flatten ->
// fc 32 sigmoid dropout 0.1 -> fc 16 sigmoid dropout 0.1 -> fc 2 softmax.
// Convolutions use valid padding and stride 1, so an input of length L
// flattens to 16 * (L - 4) activations.
struct AdvNetParams {
    std::size_t input_length = 0;  // L = n*m + n + 5 for the assembled features

    Tensor conv1_w;  // [32 x 1 x 3]
    Tensor conv1_b;  // [32]
    Tensor conv2_w;  // [16 x 32 x 3]
    Tensor conv2_b;  // [16]
    Tensor fc1_w;    // [16*(L-4) x 32]
    Tensor fc1_b;    // [32]
    Tensor fc2_w;    // [32 x 16]
    Tensor fc2_b;    // [16]
    Tensor cls_w;    // [16 x 2]
    Tensor cls_b;    // [2]

    static AdvNetParams init(std::size_t input_length, Rng& rng);

    std::vector<Tensor> parameters() const;
    void set_requires_grad(bool value);
    std::uint64_t checksum() const;

    Checkpoint to_checkpoint() const;
    static AdvNetParams from_checkpoint(const Checkpoint& ckpt);
};

// One detector training/evaluation sample. Labels are 0 (authentic) or
// 1 (adversarial) for real samples; CutMix produces fractional labels.
struct DetectorSample {
    std::vector<double> features;
    double label = 0.0;
    std::string attack_type;  // "authentic", an attack kind name, or "cutmix"
};

// Two-class logits [1 x 2]; class 1 is "adversarial". rng is required when
// train is true (dropout).
Tensor advnet_logits(const AdvNetParams& params, const std::vector<double>& features, bool train,
                     Rng* rng, double dropout_rate = 0.1);

// Probability that the input is adversarial (softmax class 1), in eval mode.
double advnet_forward(const AdvNetParams& params, const std::vector<double>& features);

// CutMix over feature vectors: each augmented sample concatenates patches of
// `sources` real vectors, and its label is the length-weighted average of the
// source labels.
struct CutMixSpec {
    std::size_t sources = 2;  // R
    double ratio = 1.0;       // augmented : real; 0 disables augmentation
};

// Deterministic patch assembly: cut_points = 0 = p_1 < ... < p_{R+1} = L;
// patch i (positions [p_i, p_{i+1})) is copied from sources[i]. The mixed
// label is sum_i y_i * (p_{i+1} - p_i) / L.
DetectorSample mix_patches(const std::vector<DetectorSample>& sources,
                           const std::vector<std::size_t>& cut_points);

// Samples round(ratio * batch.size()) augmented vectors; for each, R distinct
// batch members and R-1 distinct interior cut points are drawn uniformly.
std::vector<DetectorSample> cutmix(const std::vector<DetectorSample>& batch,
                                   const CutMixSpec& spec, Rng& rng);

struct DetectorTrainOptions {
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 100;
    std::size_t patience = 10;
    double min_delta = 1e-4;
    double dropout = 0.1;
    CutMixSpec cutmix;  // ratio 0 trains without augmentation
};

struct DetectorTrainMetrics {
    std::vector<double> train_loss;  // mean per epoch, augmented samples included
    std::vector<double> val_loss;    // mean per epoch
    std::size_t best_epoch = 0;      // 1-based epoch of the restored checkpoint
    double best_val_loss = 0.0;
    std::size_t epochs_run = 0;
};

// Binary cross-entropy on the adversarial-class probability (soft targets
// allowed), Adam, per-epoch CutMix augmentation, early stopping on validation
// loss with best-checkpoint restore. Returns frozen parameters.
AdvNetParams train_advnet(const std::vector<DetectorSample>& train,
                          const std::vector<DetectorSample>& val,
                          const DetectorTrainOptions& options, std::uint64_t seed,
                          DetectorTrainMetrics* metrics = nullptr);

// Threshold-0.5 detection metrics; "adversarial" is the positive class.
struct DetectionReport {
    std::size_t total = 0;
    std::size_t true_positive = 0;
    std::size_t false_positive = 0;
    std::size_t true_negative = 0;
    std::size_t false_negative = 0;
    double accuracy = 0.0;
    double precision = 0.0;  // 0 when no positive predictions exist
    double recall = 0.0;     // 0 when no positive labels exist
    std::map<std::string, std::size_t> per_type_count;
    std::map<std::string, double> per_type_accuracy;
    std::vector<double> authentic_scores;    // sorted adversarial-class probabilities
    std::vector<double> adversarial_scores;  // sorted adversarial-class probabilities
};

// Labels must be hard (0 or 1); the split must be non-empty.
DetectionReport evaluate_detector(const AdvNetParams& params,
                                  const std::vector<DetectorSample>& samples);

void save_detection_report(const std::filesystem::path& path, const DetectionReport& report);
DetectionReport load_detection_report(const std::filesystem::path& path);

// Input-layer saliency of the predicted detection class and the refereeing
// heads derived from it: indices inside the mask segment [0, n*m) whose
// saliency reaches half of the segment maximum, plus the fraction of
// refereeing heads per depth quartile of the encoder.
struct GradCamResult {
    int predicted_class = 0;                // 0 authentic / 1 adversarial
    std::vector<double> saliency;           // |d class_score / d v_i|, length L
    std::vector<std::size_t> refereeing;    // head indices in [0, n*m)
    std::vector<double> quartile_fractions; // 4 entries summing to 1 (or all 0)
};

GradCamResult gradcam_refereeing(const AdvNetParams& params, const std::vector<double>& features,
                                 std::size_t n, std::size_t m);

}  // namespace iasdet
