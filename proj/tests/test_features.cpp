#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "iasdet/features.hpp"
#include "iasdet/ops.hpp"
#include "iasdet/rng.hpp"
#include "support/trained_fixture.hpp"

using namespace iasdet;
using iasdet::testsupport::trained_fixture;

namespace {

int forward_class(const EncoderParams& params, const std::vector<int>& ids,
                  const std::vector<double>& gate_values) {
    Tensor gates = Tensor::from_data({gate_values.size()}, gate_values);
    const Tensor logits = encoder_forward(params, ids, gates).logits;
    const auto d = logits.data();
    return static_cast<int>(std::max_element(d.begin(), d.end()) - d.begin());
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("feature lengths follow the arity law") {
    CHECK(feature_length(FeatureView::full, 6, 8) == 59);  // 48 + 6 + 5
    CHECK(feature_length(FeatureView::bin_full, 6, 8) == 59);
    CHECK(feature_length(FeatureView::mask_only, 6, 8) == 48);
    CHECK(feature_length(FeatureView::flip_only, 6, 8) == 4);
    CHECK(feature_length(FeatureView::lw_only, 6, 8) == 7);

    CHECK(feature_length(FeatureView::full, 4, 4) == 25);
    CHECK(feature_length(FeatureView::full, 2, 2) == 11);

    for (const char* name : {"full", "mask", "flip", "lw", "bin"}) {
        CHECK(feature_view_name(parse_feature_view(name)) == std::string(name));
    }
    CHECK_THROWS_AS(parse_feature_view("masks"), Error);
}

TEST_CASE("flip feature components are the flipped-forward quadruple") {
    const auto& fx = trained_fixture();
    const auto ids = encode(fx.vocab, fx.task.test[1].text, fx.config.max_len);
    const int target = forward_class(fx.params, ids, std::vector<double>(4, 1.0));

    const GatingState state = compute_ias(fx.params, ids, target);
    const FlippedGating flip = flip_middle(state.g_b, 2, 2);

    double target_prob = -1.0;
    const std::vector<double> f = extract_fflip(fx.params, ids, flip.g_f, target, &target_prob);
    REQUIRE(f.size() == 4);

    // recompute the quadruple by hand
    Tensor gates = Tensor::from_data({4}, flip.g_f);
    Tensor probs = softmax_rows(encoder_forward(fx.params, ids, gates).logits);
    const auto pr = probs.data();
    const int pred = static_cast<int>(std::max_element(pr.begin(), pr.end()) - pr.begin());

    CHECK(f[0] == static_cast<double>(pred));
    CHECK(f[1] == static_cast<double>(target));
    CHECK(f[2] == pr[static_cast<std::size_t>(pred)]);
    CHECK(f[2] >= 1.0 / 2.0);  // argmax probability over 2 classes
    CHECK(f[2] <= 1.0);
    CHECK(f[3] == (pred == target ? 1.0 : 0.0));
    CHECK(target_prob == pr[static_cast<std::size_t>(target)]);

    CHECK_THROWS_AS(extract_fflip(fx.params, ids, flip.g_f, 9), Error);
}

TEST_CASE("layer-wise feature counts matches and switches") {
    // forced-label auxiliary heads: zero weights, one-hot biases, so head l
    // always predicts its bias class regardless of the encoder
    ModelConfig cfg;
    cfg.n = 4;
    cfg.m = 2;
    cfg.d_model = 8;
    cfg.d_k = 4;
    cfg.d_ff = 16;
    cfg.vocab_size = 12;
    cfg.max_len = 6;
    cfg.num_classes = 2;
    cfg.size_tag = "tiny";
    Rng rng(3);
    const EncoderParams params = EncoderParams::init(cfg, rng);
    const std::vector<int> ids{2, 5, 7};
    const std::vector<double> all_ones(8, 1.0);

    auto forced_aux = [&](const std::vector<int>& labels) {
        AuxHeads aux;
        for (int label : labels) {
            aux.w.push_back(Tensor::zeros({8, 2}));
            std::vector<double> bias(2, 0.0);
            bias[static_cast<std::size_t>(label)] = 1.0;
            aux.b.push_back(Tensor::from_data({2}, bias));
        }
        return aux;
    };

    // labels [A, A, B], target A -> match 2, switch 1
    {
        const auto f = extract_flw(params, forced_aux({0, 0, 1}), ids, all_ones, 0);
        CHECK(f == std::vector<double>{0.0, 0.0, 1.0, 2.0, 1.0});
    }
    // all labels equal the target -> match n-1, switch 0
    {
        const auto f = extract_flw(params, forced_aux({1, 1, 1}), ids, all_ones, 1);
        CHECK(f == std::vector<double>{1.0, 1.0, 1.0, 3.0, 0.0});
    }
    // alternating labels -> maximal switches n-2
    {
        const auto f = extract_flw(params, forced_aux({0, 1, 0}), ids, all_ones, 1);
        CHECK(f == std::vector<double>{0.0, 1.0, 0.0, 1.0, 2.0});
    }

    CHECK_THROWS_AS(extract_flw(params, forced_aux({0, 0, 1}), ids, all_ones, 5), Error);
}

TEST_CASE("assemble concatenates the three families and is deterministic") {
    const auto& fx = trained_fixture();
    const std::uint64_t before = fx.params.checksum();
    const auto ids = encode(fx.vocab, fx.task.test[2].text, fx.config.max_len);
    const int target = forward_class(fx.params, ids, std::vector<double>(4, 1.0));

    const GatingState state = compute_ias(fx.params, ids, target);
    const FeatureVector fv = assemble_features(fx.params, fx.aux, ids, state);

    REQUIRE(fv.assembled.size() == 11);  // 4 + 2 + 5
    REQUIRE(fv.f_mask.size() == 4);
    REQUIRE(fv.f_flip.size() == 4);
    REQUIRE(fv.f_lw.size() == 3);

    CHECK(fv.f_mask == state.p);
    CHECK(fv.f_bmask == state.g_b);
    CHECK(fv.flagged == state.flagged);
    CHECK(fv.flip_target_prob >= 0.0);
    CHECK(fv.flip_target_prob <= 1.0);

    const std::vector<double> expect_prefix(fv.assembled.begin(), fv.assembled.begin() + 4);
    const std::vector<double> expect_mid(fv.assembled.begin() + 4, fv.assembled.begin() + 8);
    const std::vector<double> expect_suffix(fv.assembled.begin() + 8, fv.assembled.end());
    CHECK(expect_prefix == fv.f_mask);
    CHECK(expect_mid == fv.f_flip);
    CHECK(expect_suffix == fv.f_lw);

    // pure function of the inputs: identical on a re-run, encoder untouched
    const FeatureVector again = assemble_features(fx.params, fx.aux, ids, state);
    CHECK(again.assembled == fv.assembled);
    CHECK(fx.params.checksum() == before);

    GatingState bad = state;
    bad.g_b.pop_back();
    CHECK_THROWS_AS(assemble_features(fx.params, fx.aux, ids, bad), Error);
}

TEST_CASE("ablation views are pure selections") {
    const auto& fx = trained_fixture();
    const auto ids = encode(fx.vocab, fx.task.test[4].text, fx.config.max_len);
    const int target = forward_class(fx.params, ids, std::vector<double>(4, 1.0));
    const GatingState state = compute_ias(fx.params, ids, target);
    const FeatureVector fv = assemble_features(fx.params, fx.aux, ids, state);

    CHECK(project_features(fv.assembled, {}, FeatureView::full, 2, 2) == fv.assembled);
    CHECK(project_features(fv.assembled, {}, FeatureView::mask_only, 2, 2) == fv.f_mask);
    CHECK(project_features(fv.assembled, {}, FeatureView::flip_only, 2, 2) == fv.f_flip);
    CHECK(project_features(fv.assembled, {}, FeatureView::lw_only, 2, 2) == fv.f_lw);

    const auto bin = project_features(fv.assembled, fv.f_bmask, FeatureView::bin_full, 2, 2);
    REQUIRE(bin.size() == fv.assembled.size());
    CHECK(std::vector<double>(bin.begin(), bin.begin() + 4) == fv.f_bmask);
    CHECK(std::vector<double>(bin.begin() + 4, bin.end()) ==
          std::vector<double>(fv.assembled.begin() + 4, fv.assembled.end()));

    for (FeatureView view : {FeatureView::full, FeatureView::mask_only, FeatureView::flip_only,
                             FeatureView::lw_only, FeatureView::bin_full}) {
        const auto projected = project_features(fv.assembled, fv.f_bmask, view, 2, 2);
        CHECK(projected.size() == feature_length(view, 2, 2));
    }

    CHECK_THROWS_AS(project_features({1.0, 2.0}, {}, FeatureView::full, 2, 2), Error);
    CHECK_THROWS_AS(project_features(fv.assembled, {}, FeatureView::bin_full, 2, 2), Error);
}

TEST_CASE("standardizer z-scores per dimension") {
    const std::vector<std::vector<double>> rows{{0.0, 10.0}, {2.0, 10.0}, {4.0, 10.0}};
    const Standardizer s = Standardizer::fit(rows);
    REQUIRE(s.mean.size() == 2);
    CHECK(s.mean[0] == doctest::Approx(2.0));
    CHECK(s.mean[1] == doctest::Approx(10.0));
    CHECK(s.stddev[0] == doctest::Approx(std::sqrt(8.0 / 3.0)));
    CHECK(s.stddev[1] == 1.0);  // constant dimension: centered only

    const auto z = s.apply({4.0, 10.0});
    CHECK(z[0] == doctest::Approx((4.0 - 2.0) / std::sqrt(8.0 / 3.0)));
    CHECK(z[1] == 0.0);

    // transformed sample mean ~ 0, sample stddev ~ 1 on varying dims
    double mean = 0.0, var = 0.0;
    for (const auto& row : rows) mean += s.apply(row)[0];
    mean /= 3.0;
    for (const auto& row : rows) {
        const double d = s.apply(row)[0] - mean;
        var += d * d;
    }
    CHECK(mean == doctest::Approx(0.0));
    CHECK(std::sqrt(var / 3.0) == doctest::Approx(1.0));

    CHECK_THROWS_AS(Standardizer::fit({}), Error);
    CHECK_THROWS_AS(Standardizer::fit({{1.0, 2.0}, {1.0}}), Error);
    CHECK_THROWS_AS(s.apply({1.0}), Error);
}

TEST_CASE("feature cache round-trip") {
    std::vector<FeatureRecord> records;
    FeatureRecord r1;
    r1.sample_id = "test/4";
    r1.attack_type = "authentic";
    r1.split = "train";
    r1.assembled = {0.5, 0.25, 1.0, 0.0, 1.0, 0.987654321, 0.125};
    r1.label = 0.0;
    r1.flagged = false;
    r1.flip_target_prob = 0.625;
    FeatureRecord r2;
    r2.sample_id = "attack/pwws/9";
    r2.attack_type = "pwws";
    r2.split = "test";
    r2.assembled = {1.0, 0.0};
    r2.label = 1.0;
    r2.flagged = true;
    r2.flip_target_prob = 0.0009765625;
    records.push_back(r1);
    records.push_back(r2);

    const auto path = std::filesystem::temp_directory_path() / "iasdet_feature_cache_test.jsonl";
    save_feature_cache(path, records);
    const auto loaded = load_feature_cache(path);
    std::filesystem::remove(path);

    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].sample_id == r1.sample_id);
    CHECK(loaded[0].attack_type == r1.attack_type);
    CHECK(loaded[0].split == r1.split);
    CHECK(loaded[0].assembled == r1.assembled);  // bit-exact doubles
    CHECK(loaded[0].label == r1.label);
    CHECK(loaded[0].flagged == r1.flagged);
    CHECK(loaded[0].flip_target_prob == r1.flip_target_prob);
    CHECK(loaded[1].attack_type == "pwws");
    CHECK(loaded[1].label == 1.0);
    CHECK(loaded[1].flip_target_prob == r2.flip_target_prob);

    CHECK_THROWS_AS(load_feature_cache("/nonexistent/iasdet.jsonl"), Error);

    const auto bad = std::filesystem::temp_directory_path() / "iasdet_feature_bad_test.jsonl";
    {
        std::ofstream out(bad);
        out << "{\"sample_id\": \"x\"}\n";
    }
    CHECK_THROWS_AS(load_feature_cache(bad), Error);
    std::filesystem::remove(bad);
}

}  // TEST_SUITE
