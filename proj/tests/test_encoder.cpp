#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "iasdet/encoder.hpp"
#include "iasdet/ops.hpp"
#include "iasdet/rng.hpp"
#include "iasdet/synthetic.hpp"
#include "support/dense_oracle.hpp"
#include "support/trained_fixture.hpp"

using namespace iasdet;
using iasdet::testsupport::TrainedFixture;
using iasdet::testsupport::trained_fixture;

namespace {

ModelConfig tiny_config(std::size_t vocab = 12) {
    ModelConfig c;
    c.n = 2;
    c.m = 2;
    c.d_model = 8;
    c.d_k = 4;
    c.d_ff = 16;
    c.vocab_size = vocab;
    c.max_len = 6;
    c.num_classes = 2;
    c.size_tag = "tiny";
    c.validate();
    return c;
}

EncoderParams tiny_params(std::uint64_t seed, std::size_t vocab = 12) {
    Rng rng(seed);
    return EncoderParams::init(tiny_config(vocab), rng);
}

double max_abs_diff(std::span<const double> a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double mx = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) mx = std::max(mx, std::abs(a[i] - b[i]));
    return mx;
}

}  // namespace

TEST_SUITE("encoder") {

TEST_CASE("size presets and config validation") {
    const ModelConfig small = ModelConfig::preset("small", 100, 2);
    CHECK(small.n == 4);
    CHECK(small.m == 4);
    CHECK(small.d_model == 128);
    CHECK(small.d_k == 32);
    CHECK(small.d_ff == 256);
    CHECK(small.vocab_size == 100);
    CHECK(small.max_len == 16);
    CHECK(small.num_classes == 2);
    CHECK(small.size_tag == "small");

    const ModelConfig base = ModelConfig::preset("base", 50, 4);
    CHECK(base.n == 6);
    CHECK(base.m == 8);
    CHECK(base.d_model == 256);
    CHECK(base.d_k == 32);
    CHECK(base.d_ff == 512);
    CHECK(base.num_classes == 4);

    CHECK_THROWS_AS(ModelConfig::preset("huge", 10, 2), Error);

    ModelConfig bad = tiny_config();
    bad.m = 3;  // 8 % 3 != 0
    CHECK_THROWS_AS(bad.validate(), Error);

    bad = tiny_config();
    bad.d_k = 5;  // != d_model / m
    CHECK_THROWS_AS(bad.validate(), Error);

    bad = tiny_config();
    bad.vocab_size = 3;  // below the reserved special ids
    CHECK_THROWS_AS(bad.validate(), Error);

    bad = tiny_config();
    bad.num_classes = 1;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("config json round-trip and rejection") {
    const ModelConfig c = ModelConfig::preset("base", 321, 3, 12);
    const ModelConfig back = ModelConfig::from_json(c.to_json());
    CHECK(back.n == c.n);
    CHECK(back.m == c.m);
    CHECK(back.d_model == c.d_model);
    CHECK(back.d_k == c.d_k);
    CHECK(back.d_ff == c.d_ff);
    CHECK(back.vocab_size == c.vocab_size);
    CHECK(back.max_len == c.max_len);
    CHECK(back.num_classes == c.num_classes);
    CHECK(back.size_tag == c.size_tag);

    CHECK_THROWS_AS(ModelConfig::from_json("not json"), Error);
    CHECK_THROWS_AS(ModelConfig::from_json("{\"n\": 2}"), Error);  // missing keys
}

TEST_CASE("parameter inventory, shapes, and deterministic init") {
    EncoderParams p = tiny_params(7);
    const ModelConfig& c = p.config;

    CHECK(p.tok_embed.shape() == Shape{12, 8});
    CHECK(p.pos_embed.shape() == Shape{6, 8});
    CHECK(p.layers.size() == 2);
    CHECK(p.layers[0].heads.size() == 2);
    CHECK(p.layers[0].heads[0].wq.shape() == Shape{8, 4});
    CHECK(p.layers[0].wo.shape() == Shape{8, 8});
    CHECK(p.layers[0].ff_w1.shape() == Shape{8, 16});
    CHECK(p.layers[0].ff_b1.shape() == Shape{16});
    CHECK(p.layers[0].ff_w2.shape() == Shape{16, 8});
    CHECK(p.layers[1].ln2_gain.shape() == Shape{8});
    CHECK(p.cls_w.shape() == Shape{8, 2});
    CHECK(p.cls_b.shape() == Shape{2});

    // 2 embeddings + per layer (3m heads + wo + 2 LN pairs + 4 FF) + classifier
    const std::size_t expected = 2 + c.n * (3 * c.m + 9) + 2;
    CHECK(p.parameters().size() == expected);
    for (const Tensor& t : p.parameters()) CHECK_FALSE(t.requires_grad());

    // layer-norm parameters start as the identity transform
    for (double v : p.layers[0].ln1_gain.data()) CHECK(v == 1.0);
    for (double v : p.layers[0].ln1_bias.data()) CHECK(v == 0.0);

    p.set_requires_grad(true);
    for (const Tensor& t : p.parameters()) CHECK(t.requires_grad());
    p.set_requires_grad(false);

    CHECK(tiny_params(7).checksum() == p.checksum());
    CHECK(tiny_params(8).checksum() != p.checksum());
}

TEST_CASE("all-ones gating equals an ungated dense reference") {
    const std::vector<int> ids{2, 4, 5, 7, 11};

    EncoderParams p = tiny_params(3);
    ForwardResult fwd = encoder_forward(p, ids, ones_gates(p.config));
    oracle::DenseResult ref = oracle::dense_forward(p, ids, std::vector<double>(4, 1.0));

    REQUIRE(fwd.logits.shape() == Shape{2});
    CHECK(max_abs_diff(fwd.logits.data(), ref.logits) <= 1e-12);

    REQUIRE(fwd.layer_first_token.size() == p.config.n);
    for (std::size_t l = 0; l < p.config.n; ++l) {
        REQUIRE(fwd.layer_first_token[l].shape() == Shape{p.config.d_model});
        CHECK(max_abs_diff(fwd.layer_first_token[l].data(), ref.layer_first_token[l]) <= 1e-12);
    }

    // and at the "small" preset with a full-length sequence
    const ModelConfig small = ModelConfig::preset("small", 40, 3);
    Rng rng(11);
    EncoderParams ps = EncoderParams::init(small, rng);
    std::vector<int> long_ids{2};
    for (int i = 0; i < 15; ++i) long_ids.push_back(4 + (i * 7) % 36);
    ForwardResult fs = encoder_forward(ps, long_ids, ones_gates(small));
    oracle::DenseResult rs =
        oracle::dense_forward(ps, long_ids, std::vector<double>(small.n * small.m, 1.0));
    CHECK(max_abs_diff(fs.logits.data(), rs.logits) <= 1e-12);
}

TEST_CASE("fractional and zero gates match the dense reference") {
    EncoderParams p = tiny_params(13);
    const std::vector<int> ids{2, 6, 9, 3};
    const std::vector<double> gate_values{0.0, 0.25, 1.0, 0.75};
    const Tensor gates = Tensor::from_data({4}, gate_values);

    ForwardResult fwd = encoder_forward(p, ids, gates);
    oracle::DenseResult ref = oracle::dense_forward(p, ids, gate_values);
    CHECK(max_abs_diff(fwd.logits.data(), ref.logits) <= 1e-12);
    for (std::size_t l = 0; l < p.config.n; ++l) {
        CHECK(max_abs_diff(fwd.layer_first_token[l].data(), ref.layer_first_token[l]) <= 1e-12);
    }
}

TEST_CASE("zero gates silence every attention head") {
    const std::vector<int> ids{2, 4, 5, 7, 11};
    EncoderParams a = tiny_params(3);
    EncoderParams b = tiny_params(3);  // identical weights

    // scramble every attention weight in b; with all-zero gates the scramble
    // must be invisible
    Rng noise(999);
    for (EncoderParams::Layer& layer : b.layers) {
        for (EncoderParams::Head& head : layer.heads) {
            for (Tensor* w : {&head.wq, &head.wk, &head.wv}) {
                for (double& v : w->mutable_data()) v = noise.uniform(-5.0, 5.0);
            }
        }
        for (double& v : layer.wo.mutable_data()) v = noise.uniform(-5.0, 5.0);
    }

    const Tensor zero_gates = Tensor::zeros({4});
    Tensor la = encoder_forward(a, ids, zero_gates).logits;
    Tensor lb = encoder_forward(b, ids, zero_gates).logits;
    for (std::size_t i = 0; i < la.numel(); ++i) CHECK(la.data()[i] == lb.data()[i]);

    // the gates do matter: all-ones output differs from all-zeros output
    Tensor ones = encoder_forward(a, ids, ones_gates(a.config)).logits;
    double diff = 0.0;
    for (std::size_t i = 0; i < ones.numel(); ++i) {
        diff = std::max(diff, std::abs(ones.data()[i] - la.data()[i]));
    }
    CHECK(diff > 1e-6);
}

TEST_CASE("permuting heads together with projection rows and gates is invariant") {
    const std::vector<int> ids{2, 4, 9, 10};
    EncoderParams a = tiny_params(5);
    EncoderParams b = tiny_params(5);

    // swap heads 0 and 1 of layer 0, the matching d_k row blocks of wo, and
    // the matching gate entries
    std::swap(b.layers[0].heads[0], b.layers[0].heads[1]);
    const std::size_t dk = b.config.d_k, dm = b.config.d_model;
    std::vector<double> wo(a.layers[0].wo.data().begin(), a.layers[0].wo.data().end());
    for (std::size_t r = 0; r < dk; ++r) {
        for (std::size_t c = 0; c < dm; ++c) std::swap(wo[r * dm + c], wo[(dk + r) * dm + c]);
    }
    b.layers[0].wo = Tensor::from_data({dm, dm}, std::move(wo));

    const Tensor gates_a = Tensor::from_data({4}, {0.3, 0.9, 1.0, 1.0});
    const Tensor gates_b = Tensor::from_data({4}, {0.9, 0.3, 1.0, 1.0});

    Tensor la = encoder_forward(a, ids, gates_a).logits;
    Tensor lb = encoder_forward(b, ids, gates_b).logits;
    CHECK(max_abs_diff(la.data(), {lb.data().begin(), lb.data().end()}) <= 1e-12);
}

TEST_CASE("a single-token sequence attends only to itself") {
    EncoderParams p = tiny_params(21);
    const std::vector<int> ids{2};
    ForwardResult fwd = encoder_forward(p, ids, ones_gates(p.config));
    oracle::DenseResult ref = oracle::dense_forward(p, ids, std::vector<double>(4, 1.0));
    REQUIRE(fwd.logits.numel() == 2);
    CHECK(max_abs_diff(fwd.logits.data(), ref.logits) <= 1e-12);
    for (double v : fwd.logits.data()) CHECK(std::isfinite(v));
}

TEST_CASE("forward input validation") {
    EncoderParams p = tiny_params(2);
    const Tensor ones = ones_gates(p.config);

    CHECK_THROWS_AS(encoder_forward(p, {}, ones), Error);
    CHECK_THROWS_AS(encoder_forward(p, {2, 4, 4, 4, 4, 4, 4}, ones), Error);  // > max_len
    CHECK_THROWS_AS(encoder_forward(p, {2, 12}, ones), Error);                // id >= vocab
    CHECK_THROWS_AS(encoder_forward(p, {2, -1}, ones), Error);

    CHECK_THROWS_AS(encoder_forward(p, {2, 4}, Tensor::full({3}, 1.0)), Error);
    CHECK_THROWS_AS(encoder_forward(p, {2, 4}, Tensor::full({2, 2}, 1.0)), Error);
    CHECK_THROWS_AS(encoder_forward(p, {2, 4}, Tensor::from_data({4}, {1.0, 1.0, 1.5, 1.0})),
                    Error);
    CHECK_THROWS_AS(encoder_forward(p, {2, 4}, Tensor::from_data({4}, {-0.1, 1.0, 1.0, 1.0})),
                    Error);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(encoder_forward(p, {2, 4}, Tensor::from_data({4}, {nan, 1.0, 1.0, 1.0})),
                    Error);

    CHECK_THROWS_AS(encoder_forward(p, {2, 4}, ones, /*train=*/true, nullptr), Error);
}

TEST_CASE("dropout perturbs training forwards only") {
    EncoderParams p = tiny_params(9);
    const std::vector<int> ids{2, 5, 6, 7};
    const Tensor ones = ones_gates(p.config);

    Tensor eval1 = encoder_forward(p, ids, ones).logits;
    Tensor eval2 = encoder_forward(p, ids, ones).logits;
    for (std::size_t i = 0; i < eval1.numel(); ++i) CHECK(eval1.data()[i] == eval2.data()[i]);

    Rng r1(42), r2(42), r3(43);
    Tensor t1 = encoder_forward(p, ids, ones, true, &r1).logits;
    Tensor t2 = encoder_forward(p, ids, ones, true, &r2).logits;
    Tensor t3 = encoder_forward(p, ids, ones, true, &r3).logits;
    for (std::size_t i = 0; i < t1.numel(); ++i) CHECK(t1.data()[i] == t2.data()[i]);

    double diff_eval = 0.0, diff_seed = 0.0;
    for (std::size_t i = 0; i < t1.numel(); ++i) {
        diff_eval = std::max(diff_eval, std::abs(t1.data()[i] - eval1.data()[i]));
        diff_seed = std::max(diff_seed, std::abs(t1.data()[i] - t3.data()[i]));
    }
    CHECK(diff_eval > 0.0);
    CHECK(diff_seed > 0.0);

    // rate 0 in train mode is exactly the eval forward
    Rng r4(42);
    Tensor t4 = encoder_forward(p, ids, ones, true, &r4, 0.0).logits;
    for (std::size_t i = 0; i < t4.numel(); ++i) CHECK(t4.data()[i] == eval1.data()[i]);
}

TEST_CASE("checkpoint round-trip reproduces the forward bit for bit") {
    EncoderParams p = tiny_params(31);
    const auto path = std::filesystem::temp_directory_path() / "iasdet_encoder_test.ckpt";
    save_checkpoint(path, p.to_checkpoint());
    EncoderParams q = EncoderParams::from_checkpoint(load_checkpoint(path));
    std::filesystem::remove(path);

    CHECK(q.config.to_json() == p.config.to_json());
    CHECK(q.checksum() == p.checksum());

    for (const std::vector<int>& ids :
         {std::vector<int>{2}, std::vector<int>{2, 4, 7}, std::vector<int>{2, 11, 3, 9, 5, 6}}) {
        Tensor lp = encoder_forward(p, ids, ones_gates(p.config)).logits;
        Tensor lq = encoder_forward(q, ids, ones_gates(q.config)).logits;
        for (std::size_t i = 0; i < lp.numel(); ++i) CHECK(lp.data()[i] == lq.data()[i]);
    }

    Checkpoint missing_tensor = p.to_checkpoint();
    missing_tensor.tensors.erase("layer0.attn.wo");
    CHECK_THROWS_AS(EncoderParams::from_checkpoint(missing_tensor), Error);

    Checkpoint missing_config = p.to_checkpoint();
    missing_config.metadata.erase("model_config");
    CHECK_THROWS_AS(EncoderParams::from_checkpoint(missing_config), Error);
}

TEST_CASE("fine-tuning memorizes a small separable set") {
    const TrainedFixture& fx = trained_fixture();

    CHECK(fx.metrics.epochs_run >= 1);
    CHECK(fx.metrics.epochs_run <= 60);
    CHECK(fx.metrics.train.accuracy == doctest::Approx(1.0));
    CHECK(fx.metrics.train.loss < 0.25);
    CHECK(fx.metrics.val.accuracy == doctest::Approx(1.0));

    // training actually moved the weights, then left them frozen and clean
    CHECK(fx.params.checksum() != fx.init_checksum);
    for (const Tensor& t : fx.params.parameters()) {
        CHECK_FALSE(t.requires_grad());
        CHECK_FALSE(t.grad_populated());
    }

    SplitMetrics again = evaluate_split(fx.params, fx.vocab, fx.subset);
    CHECK(again.accuracy == doctest::Approx(fx.metrics.val.accuracy));
    CHECK(again.loss == doctest::Approx(fx.metrics.val.loss));

    // a prediction comes back as a valid class index
    const int cls = predict_class(fx.params, fx.vocab, fx.subset.front().text);
    CHECK(cls >= 0);
    CHECK(cls < 2);
}

TEST_CASE("fine-tune input validation leaves the model untouched") {
    const TrainedFixture& fx = trained_fixture();
    Rng rng(55);
    EncoderParams p = EncoderParams::init(fx.config, rng);
    const std::uint64_t before = p.checksum();

    std::vector<LabeledSample> bad = {{fx.subset.front().text, 7}};
    CHECK_THROWS_AS(fine_tune(p, fx.vocab, bad, bad, 1), Error);
    CHECK(p.checksum() == before);

    CHECK_THROWS_AS(fine_tune(p, fx.vocab, {}, fx.subset, 1), Error);
    CHECK_THROWS_AS(fine_tune(p, fx.vocab, fx.subset, {}, 1), Error);
    CHECK(p.checksum() == before);

    CHECK_THROWS_AS(evaluate_split(p, fx.vocab, {}), Error);
}

TEST_CASE("aux heads train on a frozen encoder under all-ones gating") {
    const TrainedFixture& fx = trained_fixture();
    const std::uint64_t before = fx.params.checksum();

    AuxHeads aux = train_aux_heads(fx.params, fx.vocab, fx.subset, fx.subset, 23);
    CHECK(fx.params.checksum() == before);  // encoder bit-identical
    REQUIRE(aux.count() == fx.config.n - 1);

    // the fixture trained the same heads with the same seed: training is
    // deterministic
    REQUIRE(fx.aux.count() == aux.count());
    for (std::size_t h = 0; h < aux.count(); ++h) {
        for (std::size_t i = 0; i < aux.w[h].numel(); ++i) {
            CHECK(aux.w[h].data()[i] == fx.aux.w[h].data()[i]);
        }
    }
    REQUIRE(aux.w[0].shape() == Shape{fx.config.d_model, 2});
    REQUIRE(aux.b[0].shape() == Shape{2});

    // anything but all-ones gating is rejected for training
    CHECK_THROWS_AS(
        train_aux_heads(fx.params, fx.vocab, fx.subset, fx.subset, 23, Tensor::full({4}, 0.5)),
        Error);

    const std::vector<double> accs = aux_head_accuracies(fx.params, aux, fx.vocab, fx.subset);
    REQUIRE(accs.size() == 1);
    CHECK(accs[0] >= 0.75);
    CHECK(accs[0] <= 1.0);

    // layer-wise predictions agree with a manual linear head over the
    // first-token output
    const auto ids = encode(fx.vocab, fx.subset[2].text, fx.config.max_len);
    const std::vector<int> preds = predict_layerwise(fx.params, aux, ids, ones_gates(fx.config));
    REQUIRE(preds.size() == 1);
    CHECK(preds[0] >= 0);
    CHECK(preds[0] < 2);

    ForwardResult fwd = encoder_forward(fx.params, ids, ones_gates(fx.config));
    Tensor row = Tensor::from_data({1, fx.config.d_model},
                                   {fwd.layer_first_token[0].data().begin(),
                                    fwd.layer_first_token[0].data().end()});
    Tensor manual = flatten(add(matmul(row, aux.w[0]), aux.b[0]));
    const auto md = manual.data();
    const int manual_pred =
        static_cast<int>(std::max_element(md.begin(), md.end()) - md.begin());
    CHECK(preds[0] == manual_pred);

    // round-trip through a checkpoint preserves predictions exactly
    const auto path = std::filesystem::temp_directory_path() / "iasdet_aux_test.ckpt";
    save_checkpoint(path, aux.to_checkpoint());
    AuxHeads loaded = AuxHeads::from_checkpoint(load_checkpoint(path));
    std::filesystem::remove(path);
    REQUIRE(loaded.count() == aux.count());
    for (std::size_t i = 0; i < aux.w[0].numel(); ++i) {
        CHECK(loaded.w[0].data()[i] == aux.w[0].data()[i]);
    }
    for (const LabeledSample& s : fx.subset) {
        const auto sample_ids = encode(fx.vocab, s.text, fx.config.max_len);
        CHECK(predict_layerwise(fx.params, loaded, sample_ids, ones_gates(fx.config)) ==
              predict_layerwise(fx.params, aux, sample_ids, ones_gates(fx.config)));
    }
}

}  // TEST_SUITE
