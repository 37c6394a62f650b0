#include "iasdet/advnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "iasdet/ops.hpp"
#include "iasdet/optim.hpp"

namespace iasdet {

using nlohmann::json;

// --- parameters -------------------------------------------------------------

namespace {

constexpr std::size_t kConv1Out = 32;
constexpr std::size_t kConv2Out = 16;
constexpr std::size_t kKernel = 3;
constexpr std::size_t kFc1Out = 32;
constexpr std::size_t kFc2Out = 16;
constexpr std::size_t kClasses = 2;

// Two valid k=3 convolutions shave 4 positions off the input.
std::size_t flat_size(std::size_t input_length) { return kConv2Out * (input_length - 4); }

Tensor init_weight(Rng& rng, Shape shape, std::size_t fan_in) {
    const double stddev = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = rng.normal(0.0, stddev);
    return Tensor::from_data(std::move(shape), std::move(data));
}

void check_input_length(std::size_t input_length) {
    if (input_length < 5) {
        fail("advnet: input length ", input_length, " too short for two valid k=3 convolutions");
    }
}

}  // namespace

AdvNetParams AdvNetParams::init(std::size_t input_length, Rng& rng) {
    check_input_length(input_length);
    AdvNetParams p;
    p.input_length = input_length;
    p.conv1_w = init_weight(rng, {kConv1Out, 1, kKernel}, 1 * kKernel);
    p.conv1_b = Tensor::zeros({kConv1Out});
    p.conv2_w = init_weight(rng, {kConv2Out, kConv1Out, kKernel}, kConv1Out * kKernel);
    p.conv2_b = Tensor::zeros({kConv2Out});
    const std::size_t flat = flat_size(input_length);
    p.fc1_w = init_weight(rng, {flat, kFc1Out}, flat);
    p.fc1_b = Tensor::zeros({kFc1Out});
    p.fc2_w = init_weight(rng, {kFc1Out, kFc2Out}, kFc1Out);
    p.fc2_b = Tensor::zeros({kFc2Out});
    p.cls_w = init_weight(rng, {kFc2Out, kClasses}, kFc2Out);
    p.cls_b = Tensor::zeros({kClasses});
    return p;
}

std::vector<Tensor> AdvNetParams::parameters() const {
    return {conv1_w, conv1_b, conv2_w, conv2_b, fc1_w, fc1_b, fc2_w, fc2_b, cls_w, cls_b};
}

void AdvNetParams::set_requires_grad(bool value) {
    for (Tensor t : parameters()) t.set_requires_grad(value);
}

std::uint64_t AdvNetParams::checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const Tensor& t : parameters()) {
        h = fnv1a(t.data().data(), t.numel() * sizeof(double), h);
    }
    return h;
}

Checkpoint AdvNetParams::to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.metadata["input_length"] = std::to_string(input_length);
    ckpt.tensors["conv1.w"] = conv1_w;
    ckpt.tensors["conv1.b"] = conv1_b;
    ckpt.tensors["conv2.w"] = conv2_w;
    ckpt.tensors["conv2.b"] = conv2_b;
    ckpt.tensors["fc1.w"] = fc1_w;
    ckpt.tensors["fc1.b"] = fc1_b;
    ckpt.tensors["fc2.w"] = fc2_w;
    ckpt.tensors["fc2.b"] = fc2_b;
    ckpt.tensors["cls.w"] = cls_w;
    ckpt.tensors["cls.b"] = cls_b;
    return ckpt;
}

AdvNetParams AdvNetParams::from_checkpoint(const Checkpoint& ckpt) {
    auto meta = ckpt.metadata.find("input_length");
    if (meta == ckpt.metadata.end()) fail("advnet checkpoint: missing input_length metadata");
    AdvNetParams p;
    try {
        p.input_length = std::stoul(meta->second);
    } catch (const std::exception&) {
        fail("advnet checkpoint: invalid input_length '", meta->second, "'");
    }
    check_input_length(p.input_length);

    auto grab = [&ckpt](const std::string& name, const Shape& shape) {
        auto it = ckpt.tensors.find(name);
        if (it == ckpt.tensors.end()) fail("advnet checkpoint: missing tensor '", name, "'");
        if (it->second.shape() != shape) {
            fail("advnet checkpoint: tensor '", name, "' has shape ",
                 shape_str(it->second.shape()), ", expected ", shape_str(shape));
        }
        // Materialize an independent, frozen tensor so the loaded model never
        // aliases storage with the source of the checkpoint.
        return it->second.detached_copy();
    };
    const std::size_t flat = flat_size(p.input_length);
    p.conv1_w = grab("conv1.w", {kConv1Out, 1, kKernel});
    p.conv1_b = grab("conv1.b", {kConv1Out});
    p.conv2_w = grab("conv2.w", {kConv2Out, kConv1Out, kKernel});
    p.conv2_b = grab("conv2.b", {kConv2Out});
    p.fc1_w = grab("fc1.w", {flat, kFc1Out});
    p.fc1_b = grab("fc1.b", {kFc1Out});
    p.fc2_w = grab("fc2.w", {kFc1Out, kFc2Out});
    p.fc2_b = grab("fc2.b", {kFc2Out});
    p.cls_w = grab("cls.w", {kFc2Out, kClasses});
    p.cls_b = grab("cls.b", {kClasses});
    return p;
}

// --- forward ----------------------------------------------------------------

namespace {

Tensor logits_from_input(const AdvNetParams& params, const Tensor& x, bool train, Rng* rng,
                         double dropout_rate) {
    const bool use_dropout = train && dropout_rate > 0.0;
    Tensor h = relu(conv1d(x, params.conv1_w, params.conv1_b));
    h = relu(conv1d(h, params.conv2_w, params.conv2_b));
    h = reshape(h, {1, h.numel()});
    h = sigmoid(add(matmul(h, params.fc1_w), params.fc1_b));
    if (use_dropout) h = dropout(h, dropout_rate, true, *rng);
    h = sigmoid(add(matmul(h, params.fc2_w), params.fc2_b));
    if (use_dropout) h = dropout(h, dropout_rate, true, *rng);
    return add(matmul(h, params.cls_w), params.cls_b);
}

}  // namespace

Tensor advnet_logits(const AdvNetParams& params, const std::vector<double>& features, bool train,
                     Rng* rng, double dropout_rate) {
    if (features.size() != params.input_length) {
        fail("advnet: feature vector of length ", features.size(), " != expected ",
             params.input_length);
    }
    if (train && !rng) fail("advnet: train mode requires an rng for dropout");
    Tensor x = Tensor::from_data({1, params.input_length}, std::vector<double>(features));
    return logits_from_input(params, x, train, rng, dropout_rate);
}

double advnet_forward(const AdvNetParams& params, const std::vector<double>& features) {
    return softmax_rows(advnet_logits(params, features, false, nullptr)).data()[1];
}

// --- cutmix -----------------------------------------------------------------

DetectorSample mix_patches(const std::vector<DetectorSample>& sources,
                           const std::vector<std::size_t>& cut_points) {
    if (sources.empty()) fail("cutmix: no source samples");
    const std::size_t length = sources.front().features.size();
    if (length == 0) fail("cutmix: empty feature vectors");
    for (const DetectorSample& s : sources) {
        if (s.features.size() != length) fail("cutmix: inconsistent feature lengths");
        if (s.label < 0.0 || s.label > 1.0) fail("cutmix: label ", s.label, " outside [0, 1]");
    }
    if (cut_points.size() != sources.size() + 1 || cut_points.front() != 0 ||
        cut_points.back() != length) {
        fail("cutmix: expected ", sources.size() + 1, " cut points spanning 0..", length);
    }

    DetectorSample out;
    out.features.resize(length);
    out.attack_type = "cutmix";
    for (std::size_t i = 0; i + 1 < cut_points.size(); ++i) {
        if (cut_points[i + 1] <= cut_points[i]) {
            fail("cutmix: cut points must be strictly increasing");
        }
        const auto begin = static_cast<std::ptrdiff_t>(cut_points[i]);
        const auto end = static_cast<std::ptrdiff_t>(cut_points[i + 1]);
        std::copy(sources[i].features.begin() + begin, sources[i].features.begin() + end,
                  out.features.begin() + begin);
        out.label += sources[i].label * static_cast<double>(end - begin) /
                     static_cast<double>(length);
    }
    return out;
}

std::vector<DetectorSample> cutmix(const std::vector<DetectorSample>& batch,
                                   const CutMixSpec& spec, Rng& rng) {
    if (spec.ratio < 0.0) fail("cutmix: negative ratio");
    const auto count =
        static_cast<std::size_t>(std::llround(spec.ratio * static_cast<double>(batch.size())));
    if (count == 0) return {};
    if (spec.sources < 2) fail("cutmix: needs at least two sources per mix");
    if (batch.size() < spec.sources) {
        fail("cutmix: batch of ", batch.size(), " cannot supply ", spec.sources,
             " distinct sources");
    }
    const std::size_t length = batch.front().features.size();
    for (const DetectorSample& s : batch) {
        if (s.features.size() != length) fail("cutmix: inconsistent feature lengths");
    }
    if (length < spec.sources) {
        fail("cutmix: feature length ", length, " cannot host ", spec.sources, " patches");
    }

    std::vector<DetectorSample> out;
    out.reserve(count);
    for (std::size_t c = 0; c < count; ++c) {
        std::vector<std::size_t> chosen;
        while (chosen.size() < spec.sources) {
            const std::size_t idx = rng.uniform_index(batch.size());
            if (std::find(chosen.begin(), chosen.end(), idx) == chosen.end()) {
                chosen.push_back(idx);
            }
        }
        std::vector<std::size_t> cuts{0, length};
        while (cuts.size() < spec.sources + 1) {
            const std::size_t cut = 1 + rng.uniform_index(length - 1);
            if (std::find(cuts.begin(), cuts.end(), cut) == cuts.end()) cuts.push_back(cut);
        }
        std::sort(cuts.begin(), cuts.end());

        std::vector<DetectorSample> sources;
        sources.reserve(chosen.size());
        for (std::size_t idx : chosen) sources.push_back(batch[idx]);
        out.push_back(mix_patches(sources, cuts));
    }
    return out;
}

// --- training ---------------------------------------------------------------

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

AdvNetParams train_advnet(const std::vector<DetectorSample>& train,
                          const std::vector<DetectorSample>& val,
                          const DetectorTrainOptions& options, std::uint64_t seed,
                          DetectorTrainMetrics* metrics) {
    if (train.empty()) fail("train_advnet: empty training set");
    if (val.empty()) fail("train_advnet: empty validation set");
    if (options.batch_size == 0) fail("train_advnet: batch size must be positive");
    const std::size_t length = train.front().features.size();
    auto check_split = [length](const std::vector<DetectorSample>& split, const char* name) {
        for (const DetectorSample& s : split) {
            if (s.features.size() != length) {
                fail("train_advnet: inconsistent feature length in the ", name, " split");
            }
            if (s.label < 0.0 || s.label > 1.0) {
                fail("train_advnet: label ", s.label, " outside [0, 1]");
            }
        }
    };
    check_split(train, "train");
    check_split(val, "val");

    Rng init_rng(mix_seed(seed, "advnet.init"));
    AdvNetParams params = AdvNetParams::init(length, init_rng);
    const std::vector<Tensor> plist = params.parameters();
    for (Tensor t : plist) t.set_requires_grad(true);

    Optimizer opt = make_adam(options.learning_rate);
    Rng order_rng(mix_seed(seed, "advnet.order"));
    Rng dropout_rng(mix_seed(seed, "advnet.dropout"));
    Rng cutmix_rng(mix_seed(seed, "advnet.cutmix"));

    auto loss_tensor = [&](const DetectorSample& s, bool train_mode) {
        Tensor logits = advnet_logits(params, s.features, train_mode,
                                      train_mode ? &dropout_rng : nullptr, options.dropout);
        return binary_cross_entropy(slice(softmax_rows(logits), 1, 1, 2), s.label);
    };
    auto val_loss = [&] {
        double sum = 0.0;
        for (const DetectorSample& s : val) sum += loss_tensor(s, false).item();
        return sum / static_cast<double>(val.size());
    };

    DetectorTrainMetrics local;
    DetectorTrainMetrics& m = metrics ? *metrics : local;
    m = {};

    double best_val_loss = std::numeric_limits<double>::infinity();
    auto best_snapshot = snapshot_params(plist);
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < options.max_epochs; ++epoch) {
        std::vector<DetectorSample> epoch_samples = train;
        if (options.cutmix.ratio > 0.0) {
            auto mixed = cutmix(train, options.cutmix, cutmix_rng);
            epoch_samples.insert(epoch_samples.end(), std::make_move_iterator(mixed.begin()),
                                 std::make_move_iterator(mixed.end()));
        }
        std::vector<std::size_t> order(epoch_samples.size());
        std::iota(order.begin(), order.end(), 0);
        order_rng.shuffle(order);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t end = std::min(order.size(), start + options.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            double batch_loss = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                Tensor loss = scale(loss_tensor(epoch_samples[order[k]], true), inv_batch);
                batch_loss += loss.item();
                backward(loss);
            }
            if (!std::isfinite(batch_loss)) {
                fail("train_advnet: training diverged (non-finite loss at epoch ", epoch, ")");
            }
            apply_optimizer(opt, plist);
            epoch_loss += batch_loss * static_cast<double>(end - start);
        }
        m.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
        m.epochs_run = epoch + 1;

        const double v = val_loss();
        if (!std::isfinite(v)) {
            fail("train_advnet: training diverged (non-finite validation loss)");
        }
        m.val_loss.push_back(v);
        if (v < best_val_loss - options.min_delta) {
            best_val_loss = v;
            best_snapshot = snapshot_params(plist);
            m.best_epoch = epoch + 1;
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
    m.best_val_loss = best_val_loss;
    return params;
}

// --- evaluation ---------------------------------------------------------------

DetectionReport evaluate_detector(const AdvNetParams& params,
                                  const std::vector<DetectorSample>& samples) {
    if (samples.empty()) fail("evaluate_detector: empty sample list");
    DetectionReport r;
    std::map<std::string, std::size_t> per_type_correct;
    for (const DetectorSample& s : samples) {
        if (s.label != 0.0 && s.label != 1.0) {
            fail("evaluate_detector: label ", s.label, " is not a hard 0/1 label");
        }
        const double score = advnet_forward(params, s.features);
        const bool pred_adv = score >= 0.5;
        const bool is_adv = s.label == 1.0;
        if (pred_adv && is_adv) ++r.true_positive;
        if (pred_adv && !is_adv) ++r.false_positive;
        if (!pred_adv && is_adv) ++r.false_negative;
        if (!pred_adv && !is_adv) ++r.true_negative;
        ++r.per_type_count[s.attack_type];
        if (pred_adv == is_adv) ++per_type_correct[s.attack_type];
        (is_adv ? r.adversarial_scores : r.authentic_scores).push_back(score);
    }
    r.total = samples.size();
    r.accuracy =
        static_cast<double>(r.true_positive + r.true_negative) / static_cast<double>(r.total);
    const std::size_t predicted_positive = r.true_positive + r.false_positive;
    const std::size_t labeled_positive = r.true_positive + r.false_negative;
    r.precision = predicted_positive == 0 ? 0.0
                                          : static_cast<double>(r.true_positive) /
                                                static_cast<double>(predicted_positive);
    r.recall = labeled_positive == 0 ? 0.0
                                     : static_cast<double>(r.true_positive) /
                                           static_cast<double>(labeled_positive);
    for (const auto& [type, count] : r.per_type_count) {
        r.per_type_accuracy[type] =
            static_cast<double>(per_type_correct[type]) / static_cast<double>(count);
    }
    std::sort(r.authentic_scores.begin(), r.authentic_scores.end());
    std::sort(r.adversarial_scores.begin(), r.adversarial_scores.end());
    return r;
}

void save_detection_report(const std::filesystem::path& path, const DetectionReport& report) {
    json j{{"total", report.total},
           {"true_positive", report.true_positive},
           {"false_positive", report.false_positive},
           {"true_negative", report.true_negative},
           {"false_negative", report.false_negative},
           {"accuracy", report.accuracy},
           {"precision", report.precision},
           {"recall", report.recall},
           {"per_type_count", report.per_type_count},
           {"per_type_accuracy", report.per_type_accuracy},
           {"authentic_scores", report.authentic_scores},
           {"adversarial_scores", report.adversarial_scores}};
    std::ofstream out(path);
    if (!out) fail("detection report: cannot open ", path.string(), " for writing");
    out << j.dump(2) << "\n";
    if (!out) fail("detection report: write to ", path.string(), " failed");
}

DetectionReport load_detection_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail("detection report: cannot open ", path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    json j = json::parse(buffer.str(), nullptr, false);
    if (j.is_discarded()) fail("detection report: invalid json in ", path.string());
    DetectionReport r;
    try {
        r.total = j.at("total").get<std::size_t>();
        r.true_positive = j.at("true_positive").get<std::size_t>();
        r.false_positive = j.at("false_positive").get<std::size_t>();
        r.true_negative = j.at("true_negative").get<std::size_t>();
        r.false_negative = j.at("false_negative").get<std::size_t>();
        r.accuracy = j.at("accuracy").get<double>();
        r.precision = j.at("precision").get<double>();
        r.recall = j.at("recall").get<double>();
        r.per_type_count = j.at("per_type_count").get<std::map<std::string, std::size_t>>();
        r.per_type_accuracy = j.at("per_type_accuracy").get<std::map<std::string, double>>();
        r.authentic_scores = j.at("authentic_scores").get<std::vector<double>>();
        r.adversarial_scores = j.at("adversarial_scores").get<std::vector<double>>();
    } catch (const json::exception& e) {
        fail("detection report: ", path.string(), ": ", e.what());
    }
    return r;
}

// --- grad-cam ---------------------------------------------------------------

GradCamResult gradcam_refereeing(const AdvNetParams& params, const std::vector<double>& features,
                                 std::size_t n, std::size_t m) {
    if (n == 0 || m == 0) fail("gradcam: zero-sized head grid");
    if (features.size() != params.input_length) {
        fail("gradcam: feature vector of length ", features.size(), " != expected ",
             params.input_length);
    }
    if (n * m + n + 5 != params.input_length) {
        fail("gradcam: head grid ", n, "x", m, " does not match feature length ",
             params.input_length);
    }

    Tensor x = Tensor::from_data({1, params.input_length}, std::vector<double>(features));
    x.set_requires_grad(true);
    Tensor logits = logits_from_input(params, x, false, nullptr, 0.0);
    const auto scores = logits.data();
    const auto pred =
        static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    backward(slice(logits, 1, pred, pred + 1));

    GradCamResult result;
    result.predicted_class = static_cast<int>(pred);
    const auto grad = x.grad();
    result.saliency.reserve(grad.size());
    for (double g : grad) result.saliency.push_back(std::abs(g));

    const std::size_t mask_len = n * m;
    double segment_max = 0.0;
    for (std::size_t i = 0; i < mask_len; ++i) {
        segment_max = std::max(segment_max, result.saliency[i]);
    }
    std::vector<std::size_t> per_quartile(4, 0);
    if (segment_max > 0.0) {
        for (std::size_t i = 0; i < mask_len; ++i) {
            if (result.saliency[i] >= 0.5 * segment_max) {
                result.refereeing.push_back(i);
                ++per_quartile[(i / m) * 4 / n];
            }
        }
    }
    result.quartile_fractions.assign(4, 0.0);
    if (!result.refereeing.empty()) {
        for (std::size_t b = 0; b < 4; ++b) {
            result.quartile_fractions[b] = static_cast<double>(per_quartile[b]) /
                                           static_cast<double>(result.refereeing.size());
        }
    }
    return result;
}

}  // namespace iasdet
