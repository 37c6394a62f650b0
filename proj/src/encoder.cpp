#include "iasdet/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "iasdet/ops.hpp"
#include "iasdet/optim.hpp"

namespace iasdet {

using nlohmann::json;

// --- config ---------------------------------------------------------------

ModelConfig ModelConfig::preset(const std::string& size_tag, std::size_t vocab_size,
                                int num_classes, std::size_t max_len) {
    ModelConfig c;
    if (size_tag == "small") {
        c.n = 4; c.m = 4; c.d_model = 128; c.d_ff = 256;
    } else if (size_tag == "base") {
        c.n = 6; c.m = 8; c.d_model = 256; c.d_ff = 512;
    } else {
        fail("model config: unknown size tag '", size_tag, "' (expected small or base)");
    }
    c.size_tag = size_tag;
    c.d_k = c.d_model / c.m;
    c.vocab_size = vocab_size;
    c.num_classes = num_classes;
    c.max_len = max_len;
    c.validate();
    return c;
}

void ModelConfig::validate() const {
    if (n == 0 || m == 0 || d_model == 0 || d_ff == 0 || max_len == 0) {
        fail("model config: zero-sized dimension");
    }
    if (d_model % m != 0) {
        fail("model config: d_model ", d_model, " not divisible by m ", m);
    }
    if (d_k != d_model / m) {
        fail("model config: d_k ", d_k, " != d_model/m ", d_model / m);
    }
    if (vocab_size < 4) fail("model config: vocab_size ", vocab_size, " below the specials");
    if (num_classes < 2) fail("model config: num_classes ", num_classes, " < 2");
}

std::string ModelConfig::to_json() const {
    json j{{"n", n},
           {"m", m},
           {"d_model", d_model},
           {"d_k", d_k},
           {"d_ff", d_ff},
           {"vocab_size", vocab_size},
           {"max_len", max_len},
           {"num_classes", num_classes},
           {"size_tag", size_tag}};
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) fail("model config: invalid json");
    ModelConfig c;
    try {
        c.n = j.at("n").get<std::size_t>();
        c.m = j.at("m").get<std::size_t>();
        c.d_model = j.at("d_model").get<std::size_t>();
        c.d_k = j.at("d_k").get<std::size_t>();
        c.d_ff = j.at("d_ff").get<std::size_t>();
        c.vocab_size = j.at("vocab_size").get<std::size_t>();
        c.max_len = j.at("max_len").get<std::size_t>();
        c.num_classes = j.at("num_classes").get<int>();
        c.size_tag = j.at("size_tag").get<std::string>();
    } catch (const json::exception& e) {
        fail("model config: ", e.what());
    }
    c.validate();
    return c;
}

// --- parameters -------------------------------------------------------------

namespace {

Tensor init_weight(Rng& rng, Shape shape) {
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = rng.normal(0.0, 0.02);
    return Tensor::from_data(std::move(shape), std::move(data));
}

}  // namespace

EncoderParams EncoderParams::init(const ModelConfig& config, Rng& rng) {
    config.validate();
    EncoderParams p;
    p.config = config;
    p.tok_embed = init_weight(rng, {config.vocab_size, config.d_model});
    p.pos_embed = init_weight(rng, {config.max_len, config.d_model});
    p.layers.resize(config.n);
    for (auto& layer : p.layers) {
        layer.heads.resize(config.m);
        for (auto& head : layer.heads) {
            head.wq = init_weight(rng, {config.d_model, config.d_k});
            head.wk = init_weight(rng, {config.d_model, config.d_k});
            head.wv = init_weight(rng, {config.d_model, config.d_k});
        }
        layer.wo = init_weight(rng, {config.d_model, config.d_model});
        layer.ln1_gain = Tensor::full({config.d_model}, 1.0);
        layer.ln1_bias = Tensor::zeros({config.d_model});
        layer.ff_w1 = init_weight(rng, {config.d_model, config.d_ff});
        layer.ff_b1 = Tensor::zeros({config.d_ff});
        layer.ff_w2 = init_weight(rng, {config.d_ff, config.d_model});
        layer.ff_b2 = Tensor::zeros({config.d_model});
        layer.ln2_gain = Tensor::full({config.d_model}, 1.0);
        layer.ln2_bias = Tensor::zeros({config.d_model});
    }
    p.cls_w = init_weight(rng, {config.d_model, static_cast<std::size_t>(config.num_classes)});
    p.cls_b = Tensor::zeros({static_cast<std::size_t>(config.num_classes)});
    return p;
}

std::vector<Tensor> EncoderParams::parameters() const {
    std::vector<Tensor> out{tok_embed, pos_embed};
    for (const Layer& layer : layers) {
        for (const Head& head : layer.heads) {
            out.push_back(head.wq);
            out.push_back(head.wk);
            out.push_back(head.wv);
        }
        out.push_back(layer.wo);
        out.push_back(layer.ln1_gain);
        out.push_back(layer.ln1_bias);
        out.push_back(layer.ff_w1);
        out.push_back(layer.ff_b1);
        out.push_back(layer.ff_w2);
        out.push_back(layer.ff_b2);
        out.push_back(layer.ln2_gain);
        out.push_back(layer.ln2_bias);
    }
    out.push_back(cls_w);
    out.push_back(cls_b);
    return out;
}

void EncoderParams::set_requires_grad(bool value) {
    for (Tensor t : parameters()) t.set_requires_grad(value);
}

std::uint64_t EncoderParams::checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const Tensor& t : parameters()) {
        h = fnv1a(t.data().data(), t.numel() * sizeof(double), h);
    }
    return h;
}

Checkpoint EncoderParams::to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.metadata["model_config"] = config.to_json();
    ckpt.tensors["embed.tok"] = tok_embed;
    ckpt.tensors["embed.pos"] = pos_embed;
    for (std::size_t j = 0; j < layers.size(); ++j) {
        const Layer& layer = layers[j];
        const std::string base = "layer" + std::to_string(j) + ".";
        for (std::size_t i = 0; i < layer.heads.size(); ++i) {
            const std::string hb = base + "head" + std::to_string(i) + ".";
            ckpt.tensors[hb + "wq"] = layer.heads[i].wq;
            ckpt.tensors[hb + "wk"] = layer.heads[i].wk;
            ckpt.tensors[hb + "wv"] = layer.heads[i].wv;
        }
        ckpt.tensors[base + "attn.wo"] = layer.wo;
        ckpt.tensors[base + "ln1.gain"] = layer.ln1_gain;
        ckpt.tensors[base + "ln1.bias"] = layer.ln1_bias;
        ckpt.tensors[base + "ff.w1"] = layer.ff_w1;
        ckpt.tensors[base + "ff.b1"] = layer.ff_b1;
        ckpt.tensors[base + "ff.w2"] = layer.ff_w2;
        ckpt.tensors[base + "ff.b2"] = layer.ff_b2;
        ckpt.tensors[base + "ln2.gain"] = layer.ln2_gain;
        ckpt.tensors[base + "ln2.bias"] = layer.ln2_bias;
    }
    ckpt.tensors["cls.w"] = cls_w;
    ckpt.tensors["cls.b"] = cls_b;
    return ckpt;
}

EncoderParams EncoderParams::from_checkpoint(const Checkpoint& ckpt) {
    auto meta = ckpt.metadata.find("model_config");
    if (meta == ckpt.metadata.end()) {
        fail("encoder checkpoint: missing model_config metadata");
    }
    EncoderParams p;
    p.config = ModelConfig::from_json(meta->second);

    auto grab = [&ckpt](const std::string& name) {
        auto it = ckpt.tensors.find(name);
        if (it == ckpt.tensors.end()) fail("encoder checkpoint: missing tensor '", name, "'");
        // Materialize an independent, frozen tensor so the loaded model never
        // aliases storage with the source of the checkpoint.
        return it->second.detached_copy();
    };
    p.tok_embed = grab("embed.tok");
    p.pos_embed = grab("embed.pos");
    p.layers.resize(p.config.n);
    for (std::size_t j = 0; j < p.config.n; ++j) {
        Layer& layer = p.layers[j];
        const std::string base = "layer" + std::to_string(j) + ".";
        layer.heads.resize(p.config.m);
        for (std::size_t i = 0; i < p.config.m; ++i) {
            const std::string hb = base + "head" + std::to_string(i) + ".";
            layer.heads[i] = {grab(hb + "wq"), grab(hb + "wk"), grab(hb + "wv")};
        }
        layer.wo = grab(base + "attn.wo");
        layer.ln1_gain = grab(base + "ln1.gain");
        layer.ln1_bias = grab(base + "ln1.bias");
        layer.ff_w1 = grab(base + "ff.w1");
        layer.ff_b1 = grab(base + "ff.b1");
        layer.ff_w2 = grab(base + "ff.w2");
        layer.ff_b2 = grab(base + "ff.b2");
        layer.ln2_gain = grab(base + "ln2.gain");
        layer.ln2_bias = grab(base + "ln2.bias");
    }
    p.cls_w = grab("cls.w");
    p.cls_b = grab("cls.b");
    return p;
}

// --- forward ----------------------------------------------------------------

Tensor ones_gates(const ModelConfig& config) {
    return Tensor::full({config.n * config.m}, 1.0);
}

ForwardResult encoder_forward(const EncoderParams& params, const std::vector<int>& ids,
                              const Tensor& gates, bool train, Rng* rng, double dropout_rate) {
    const ModelConfig& cfg = params.config;
    if (ids.empty() || ids.size() > cfg.max_len) {
        fail("encoder forward: sequence of ", ids.size(), " tokens outside 1..", cfg.max_len);
    }
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size) {
            fail("encoder forward: token id ", id, " outside the vocabulary of ", cfg.vocab_size);
        }
    }
    if (gates.rank() != 1 || gates.dim(0) != cfg.n * cfg.m) {
        fail("encoder forward: gate vector ", shape_str(gates.shape()), " != [", cfg.n * cfg.m,
             "]");
    }
    for (double g : gates.data()) {
        if (!(g >= 0.0 && g <= 1.0)) fail("encoder forward: gate value ", g, " outside [0, 1]");
    }
    if (train && !rng) fail("encoder forward: train mode requires an rng for dropout");

    const bool use_dropout = train && dropout_rate > 0.0;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(cfg.d_k));
    const std::size_t T = ids.size();

    Tensor x = add(embedding_lookup(params.tok_embed, ids), slice(params.pos_embed, 0, 0, T));

    ForwardResult result;
    result.layer_first_token.reserve(cfg.n);

    for (std::size_t j = 0; j < cfg.n; ++j) {
        const EncoderParams::Layer& layer = params.layers[j];

        std::vector<Tensor> head_outputs;
        head_outputs.reserve(cfg.m);
        for (std::size_t i = 0; i < cfg.m; ++i) {
            const EncoderParams::Head& head = layer.heads[i];
            Tensor q = matmul(x, head.wq);
            Tensor k = matmul(x, head.wk);
            Tensor v = matmul(x, head.wv);
            Tensor attn = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt_dk));
            Tensor out = matmul(attn, v);
            const std::size_t gate_index = j * cfg.m + i;
            head_outputs.push_back(mul(out, slice(gates, 0, gate_index, gate_index + 1)));
        }
        Tensor attn_out = matmul(concat_cols(head_outputs), layer.wo);
        if (use_dropout) attn_out = dropout(attn_out, dropout_rate, true, *rng);
        x = layer_norm(add(x, attn_out), layer.ln1_gain, layer.ln1_bias);

        Tensor ff = matmul(gelu(add(matmul(x, layer.ff_w1), layer.ff_b1)), layer.ff_w2);
        ff = add(ff, layer.ff_b2);
        if (use_dropout) ff = dropout(ff, dropout_rate, true, *rng);
        x = layer_norm(add(x, ff), layer.ln2_gain, layer.ln2_bias);

        result.layer_first_token.push_back(flatten(slice(x, 0, 0, 1)));
    }

    Tensor pooled = slice(x, 0, 0, 1);  // 1 x d_model
    result.logits = flatten(add(matmul(pooled, params.cls_w), params.cls_b));
    return result;
}

int predict_class(const EncoderParams& params, const Vocab& vocab, const std::string& text) {
    const auto ids = encode(vocab, text, params.config.max_len);
    Tensor logits = encoder_forward(params, ids, ones_gates(params.config)).logits;
    const auto data = logits.data();
    return static_cast<int>(std::max_element(data.begin(), data.end()) - data.begin());
}

SplitMetrics evaluate_split(const EncoderParams& params, const Vocab& vocab,
                            const std::vector<LabeledSample>& samples) {
    if (samples.empty()) fail("evaluate_split: empty sample list");
    const Tensor gates = ones_gates(params.config);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (const LabeledSample& s : samples) {
        const auto ids = encode(vocab, s.text, params.config.max_len);
        Tensor logits = encoder_forward(params, ids, gates).logits;
        loss_sum += cross_entropy_with_logits(logits, s.label).item();
        const auto data = logits.data();
        const auto pred = std::max_element(data.begin(), data.end()) - data.begin();
        if (static_cast<int>(pred) == s.label) ++correct;
    }
    return {loss_sum / static_cast<double>(samples.size()),
            static_cast<double>(correct) / static_cast<double>(samples.size())};
}

// --- fine-tuning --------------------------------------------------------------

namespace {

std::vector<std::vector<double>> snapshot_params(const std::vector<Tensor>& params) {
    std::vector<std::vector<double>> snap;
    snap.reserve(params.size());
    for (const Tensor& t : params) snap.emplace_back(t.data().begin(), t.data().end());
    return snap;
}

void restore_params(const std::vector<Tensor>& params,
                    const std::vector<std::vector<double>>& snap) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto dst = const_cast<Tensor&>(params[i]).mutable_data();
        std::copy(snap[i].begin(), snap[i].end(), dst.begin());
    }
}

}  // namespace

TrainMetrics fine_tune(EncoderParams& params, const Vocab& vocab,
                       const std::vector<LabeledSample>& train,
                       const std::vector<LabeledSample>& val, std::uint64_t seed,
                       const TrainOptions& options) {
    if (train.empty()) fail("fine_tune: empty training set");
    if (val.empty()) fail("fine_tune: empty validation set");
    for (const LabeledSample& s : train) {
        if (s.label < 0 || s.label >= params.config.num_classes) {
            fail("fine_tune: label ", s.label, " outside 0..", params.config.num_classes - 1);
        }
    }

    const std::vector<Tensor> plist = params.parameters();
    for (Tensor t : plist) t.set_requires_grad(true);

    Optimizer opt = make_adam(options.learning_rate);
    Rng order_rng(mix_seed(seed, "encoder.order"));
    Rng dropout_rng(mix_seed(seed, "encoder.dropout"));
    const Tensor gates = ones_gates(params.config);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    double best_val_loss = std::numeric_limits<double>::infinity();
    auto best_snapshot = snapshot_params(plist);
    std::size_t epochs_since_best = 0;
    TrainMetrics metrics;

    for (std::size_t epoch = 0; epoch < options.max_epochs; ++epoch) {
        order_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t end = std::min(order.size(), start + options.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            double batch_loss = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                const LabeledSample& s = train[order[k]];
                const auto ids = encode(vocab, s.text, params.config.max_len);
                Tensor logits =
                    encoder_forward(params, ids, gates, true, &dropout_rng, options.dropout)
                        .logits;
                Tensor loss = scale(cross_entropy_with_logits(logits, s.label), inv_batch);
                batch_loss += loss.item();
                backward(loss);
            }
            if (!std::isfinite(batch_loss)) {
                fail("fine_tune: training diverged (non-finite loss at epoch ", epoch, ")");
            }
            apply_optimizer(opt, plist);
        }
        metrics.epochs_run = epoch + 1;

        const SplitMetrics vm = evaluate_split(params, vocab, val);
        if (!std::isfinite(vm.loss)) {
            fail("fine_tune: training diverged (non-finite validation loss)");
        }
        if (vm.loss < best_val_loss - options.min_delta) {
            best_val_loss = vm.loss;
            best_snapshot = snapshot_params(plist);
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
            if (epochs_since_best >= options.patience) break;
        }
    }

    restore_params(plist, best_snapshot);
    for (Tensor t : plist) {
        t.clear_grad();
        t.set_requires_grad(false);
    }
    metrics.train = evaluate_split(params, vocab, train);
    metrics.val = evaluate_split(params, vocab, val);
    return metrics;
}

// --- auxiliary heads -----------------------------------------------------------

Checkpoint AuxHeads::to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.metadata["aux_head_count"] = std::to_string(w.size());
    for (std::size_t l = 0; l < w.size(); ++l) {
        ckpt.tensors["aux" + std::to_string(l) + ".w"] = w[l];
        ckpt.tensors["aux" + std::to_string(l) + ".b"] = b[l];
    }
    return ckpt;
}

AuxHeads AuxHeads::from_checkpoint(const Checkpoint& ckpt) {
    auto meta = ckpt.metadata.find("aux_head_count");
    if (meta == ckpt.metadata.end()) fail("aux checkpoint: missing aux_head_count");
    const std::size_t count = std::stoul(meta->second);
    AuxHeads aux;
    for (std::size_t l = 0; l < count; ++l) {
        const std::string base = "aux" + std::to_string(l) + ".";
        auto wi = ckpt.tensors.find(base + "w");
        auto bi = ckpt.tensors.find(base + "b");
        if (wi == ckpt.tensors.end() || bi == ckpt.tensors.end()) {
            fail("aux checkpoint: missing tensors for head ", l);
        }
        aux.w.push_back(wi->second.detached_copy());
        aux.b.push_back(bi->second.detached_copy());
    }
    return aux;
}

namespace {

bool is_all_ones(const Tensor& gates) {
    for (double g : gates.data()) {
        if (g != 1.0) return false;
    }
    return true;
}

// First-token activations of layers 1..n-1 for every sample, computed once
// with the encoder frozen (deterministic, so caching is sound).
std::vector<std::vector<Tensor>> cache_layer_vectors(const EncoderParams& params,
                                                     const Vocab& vocab,
                                                     const std::vector<LabeledSample>& samples) {
    const Tensor gates = ones_gates(params.config);
    std::vector<std::vector<Tensor>> cache;
    cache.reserve(samples.size());
    for (const LabeledSample& s : samples) {
        const auto ids = encode(vocab, s.text, params.config.max_len);
        ForwardResult fwd = encoder_forward(params, ids, gates);
        std::vector<Tensor> rows;
        rows.reserve(params.config.n - 1);
        for (std::size_t l = 0; l + 1 < params.config.n; ++l) {
            Tensor row = Tensor::from_data(
                {1, params.config.d_model},
                {fwd.layer_first_token[l].data().begin(), fwd.layer_first_token[l].data().end()});
            rows.push_back(std::move(row));
        }
        cache.push_back(std::move(rows));
    }
    return cache;
}

}  // namespace

AuxHeads train_aux_heads(const EncoderParams& params, const Vocab& vocab,
                         const std::vector<LabeledSample>& train,
                         const std::vector<LabeledSample>& val, std::uint64_t seed,
                         const Tensor& gates, const AuxTrainOptions& options) {
    if (!is_all_ones(gates) || gates.numel() != params.config.n * params.config.m) {
        fail("train_aux_heads: gating must be all ones over ", params.config.n * params.config.m,
             " heads");
    }
    if (train.empty()) fail("train_aux_heads: empty training set");

    const std::uint64_t before = params.checksum();
    const std::size_t n_heads = params.config.n - 1;
    const std::size_t classes = static_cast<std::size_t>(params.config.num_classes);

    Rng init_rng(mix_seed(seed, "aux.init"));
    AuxHeads aux;
    for (std::size_t l = 0; l < n_heads; ++l) {
        aux.w.push_back(init_weight(init_rng, {params.config.d_model, classes}));
        aux.b.push_back(Tensor::zeros({classes}));
    }
    std::vector<Tensor> plist;
    for (std::size_t l = 0; l < n_heads; ++l) {
        aux.w[l].set_requires_grad(true);
        aux.b[l].set_requires_grad(true);
        plist.push_back(aux.w[l]);
        plist.push_back(aux.b[l]);
    }

    const auto train_cache = cache_layer_vectors(params, vocab, train);
    const auto val_cache = cache_layer_vectors(params, vocab, val);

    auto head_loss = [&](const std::vector<Tensor>& rows, int label) {
        Tensor total = Tensor::zeros({1});
        for (std::size_t l = 0; l < n_heads; ++l) {
            Tensor logits = flatten(add(matmul(rows[l], aux.w[l]), aux.b[l]));
            total = add(total, cross_entropy_with_logits(logits, label));
        }
        return scale(total, 1.0 / static_cast<double>(n_heads));
    };

    auto val_loss = [&] {
        double sum = 0.0;
        for (std::size_t i = 0; i < val.size(); ++i) {
            sum += head_loss(val_cache[i], val[i].label).item();
        }
        return sum / static_cast<double>(val.size());
    };

    Optimizer opt = make_adam(options.learning_rate);
    Rng order_rng(mix_seed(seed, "aux.order"));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    double best = std::numeric_limits<double>::infinity();
    auto best_snapshot = snapshot_params(plist);
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < options.max_epochs; ++epoch) {
        order_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t end = std::min(order.size(), start + options.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            double batch_loss = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                Tensor loss =
                    scale(head_loss(train_cache[order[k]], train[order[k]].label), inv_batch);
                batch_loss += loss.item();
                backward(loss);
            }
            if (!std::isfinite(batch_loss)) {
                fail("train_aux_heads: training diverged at epoch ", epoch);
            }
            apply_optimizer(opt, plist);
        }
        const double v = val_loss();
        if (v < best - options.min_delta) {
            best = v;
            best_snapshot = snapshot_params(plist);
            since_best = 0;
        } else if (++since_best >= options.patience) {
            break;
        }
    }

    restore_params(plist, best_snapshot);
    for (Tensor t : plist) {
        t.clear_grad();
        t.set_requires_grad(false);
    }
    if (params.checksum() != before) {
        fail("train_aux_heads: encoder parameters changed during aux training");
    }
    return aux;
}

AuxHeads train_aux_heads(const EncoderParams& params, const Vocab& vocab,
                         const std::vector<LabeledSample>& train,
                         const std::vector<LabeledSample>& val, std::uint64_t seed) {
    return train_aux_heads(params, vocab, train, val, seed, ones_gates(params.config));
}

std::vector<double> aux_head_accuracies(const EncoderParams& params, const AuxHeads& aux,
                                        const Vocab& vocab,
                                        const std::vector<LabeledSample>& samples) {
    if (samples.empty()) fail("aux_head_accuracies: empty sample list");
    std::vector<std::size_t> correct(aux.count(), 0);
    for (const LabeledSample& s : samples) {
        const auto ids = encode(vocab, s.text, params.config.max_len);
        const auto labels = predict_layerwise(params, aux, ids, ones_gates(params.config));
        for (std::size_t l = 0; l < labels.size(); ++l) {
            if (labels[l] == s.label) ++correct[l];
        }
    }
    std::vector<double> acc(aux.count());
    for (std::size_t l = 0; l < acc.size(); ++l) {
        acc[l] = static_cast<double>(correct[l]) / static_cast<double>(samples.size());
    }
    return acc;
}

std::vector<int> predict_layerwise(const EncoderParams& params, const AuxHeads& aux,
                                   const std::vector<int>& ids, const Tensor& gates) {
    if (aux.count() + 1 != params.config.n) {
        fail("predict_layerwise: ", aux.count(), " aux heads for ", params.config.n, " layers");
    }
    ForwardResult fwd = encoder_forward(params, ids, gates);
    std::vector<int> labels;
    labels.reserve(aux.count());
    for (std::size_t l = 0; l < aux.count(); ++l) {
        Tensor row = Tensor::from_data(
            {1, params.config.d_model},
            {fwd.layer_first_token[l].data().begin(), fwd.layer_first_token[l].data().end()});
        Tensor logits = flatten(add(matmul(row, aux.w[l]), aux.b[l]));
        const auto data = logits.data();
        labels.push_back(
            static_cast<int>(std::max_element(data.begin(), data.end()) - data.begin()));
    }
    return labels;
}

}  // namespace iasdet
