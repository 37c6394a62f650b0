#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iasdet/checkpoint.hpp"
#include "iasdet/dataset.hpp"
#include "iasdet/rng.hpp"
#include "iasdet/tensor.hpp"

namespace iasdet {

struct ModelConfig {
    std::size_t n = 4;         // layers
    std::size_t m = 4;         // heads per layer
    std::size_t d_model = 128;
    std::size_t d_k = 32;      // = d_model / m
    std::size_t d_ff = 256;
    std::size_t vocab_size = 0;
    std::size_t max_len = 16;
    int num_classes = 2;
    std::string size_tag = "small";

    static ModelConfig preset(const std::string& size_tag, std::size_t vocab_size,
                              int num_classes, std::size_t max_len = 16);
    void validate() const;
    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

// BERT-style post-LN encoder with per-head gating. One vector of n*m gates in
// [0,1] scales each head's output before the W^O projection; all-ones gating
// is exactly the ungated network.
struct EncoderParams {
    struct Head {
        Tensor wq, wk, wv;  // d_model x d_k
    };
    struct Layer {
        std::vector<Head> heads;
        Tensor wo;  // d_model x d_model
        Tensor ln1_gain, ln1_bias;
        Tensor ff_w1, ff_b1;  // d_model x d_ff, d_ff
        Tensor ff_w2, ff_b2;  // d_ff x d_model, d_model
        Tensor ln2_gain, ln2_bias;
    };

    ModelConfig config;
    Tensor tok_embed;  // vocab_size x d_model
    Tensor pos_embed;  // max_len x d_model
    std::vector<Layer> layers;
    Tensor cls_w, cls_b;  // d_model x num_classes, num_classes

    static EncoderParams init(const ModelConfig& config, Rng& rng);

    std::vector<Tensor> parameters() const;
    void set_requires_grad(bool value);
    std::uint64_t checksum() const;  // order-sensitive digest over all parameter data

    Checkpoint to_checkpoint() const;
    static EncoderParams from_checkpoint(const Checkpoint& ckpt);
};

struct ForwardResult {
    Tensor logits;                          // rank-1, num_classes
    std::vector<Tensor> layer_first_token;  // n entries, rank-1 d_model
};

Tensor ones_gates(const ModelConfig& config);

// ids: [CLS] + tokens, 1..max_len entries, all < vocab_size. gates: rank-1
// n*m vector with entries in [0,1]. Pass train=true with an rng for dropout.
ForwardResult encoder_forward(const EncoderParams& params, const std::vector<int>& ids,
                              const Tensor& gates, bool train = false, Rng* rng = nullptr,
                              double dropout_rate = 0.1);

int predict_class(const EncoderParams& params, const Vocab& vocab, const std::string& text);

struct SplitMetrics {
    double loss = 0.0;
    double accuracy = 0.0;
};

SplitMetrics evaluate_split(const EncoderParams& params, const Vocab& vocab,
                            const std::vector<LabeledSample>& samples);

struct TrainOptions {
    double learning_rate = 3e-4;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 100;
    std::size_t patience = 5;
    double min_delta = 1e-3;  // required val-loss improvement to reset patience
    double dropout = 0.1;
};

struct TrainMetrics {
    std::size_t epochs_run = 0;
    SplitMetrics train;
    SplitMetrics val;
};

// Adam fine-tuning with early stopping on validation loss; restores the best
// validation snapshot. Aborts if the loss goes non-finite.
TrainMetrics fine_tune(EncoderParams& params, const Vocab& vocab,
                       const std::vector<LabeledSample>& train,
                       const std::vector<LabeledSample>& val, std::uint64_t seed,
                       const TrainOptions& options = {});

// Linear classification heads over the first-token output of layers 1..n-1,
// trained with the encoder frozen and all-ones gating.
struct AuxHeads {
    std::vector<Tensor> w;  // each d_model x num_classes
    std::vector<Tensor> b;  // each num_classes

    std::size_t count() const { return w.size(); }
    Checkpoint to_checkpoint() const;
    static AuxHeads from_checkpoint(const Checkpoint& ckpt);
};

struct AuxTrainOptions {
    double learning_rate = 1e-2;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 100;
    std::size_t patience = 5;
    double min_delta = 1e-3;
};

// gates must be all ones (the contract for aux training); anything else is
// rejected. The encoder itself is left bit-identical.
AuxHeads train_aux_heads(const EncoderParams& params, const Vocab& vocab,
                         const std::vector<LabeledSample>& train,
                         const std::vector<LabeledSample>& val, std::uint64_t seed,
                         const Tensor& gates, const AuxTrainOptions& options = {});
AuxHeads train_aux_heads(const EncoderParams& params, const Vocab& vocab,
                         const std::vector<LabeledSample>& train,
                         const std::vector<LabeledSample>& val, std::uint64_t seed);

// Per-layer accuracy of each aux head over a split (all-ones gating).
std::vector<double> aux_head_accuracies(const EncoderParams& params, const AuxHeads& aux,
                                        const Vocab& vocab,
                                        const std::vector<LabeledSample>& samples);

// Labels from the n-1 layer-wise heads under gating g.
std::vector<int> predict_layerwise(const EncoderParams& params, const AuxHeads& aux,
                                   const std::vector<int>& ids, const Tensor& gates);

}  // namespace iasdet
