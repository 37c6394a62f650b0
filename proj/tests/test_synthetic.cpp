#include <doctest.h>

#include <unordered_map>
#include <unordered_set>

#include "iasdet/synthetic.hpp"

using namespace iasdet;

namespace {

std::unordered_map<std::string, int> word_counts(const std::vector<LabeledSample>& samples) {
    std::unordered_map<std::string, int> counts;
    for (const auto& s : samples) {
        for (const auto& w : split_words(s.text)) ++counts[w];
    }
    return counts;
}

}  // namespace

TEST_SUITE("synthetic") {

TEST_CASE("generation is deterministic in the seed") {
    SyntheticTask a = gen_synthetic(TaskKind::sentiment, 200, 7);
    SyntheticTask b = gen_synthetic(TaskKind::sentiment, 200, 7);
    REQUIRE(a.train.size() == b.train.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].text == b.train[i].text);
        CHECK(a.train[i].label == b.train[i].label);
    }
    SyntheticTask c = gen_synthetic(TaskKind::sentiment, 200, 8);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.train.size() && !any_diff; ++i) {
        any_diff = a.train[i].text != c.train[i].text;
    }
    CHECK(any_diff);
}

TEST_CASE("split sizes and minimum size") {
    SyntheticTask t = gen_synthetic(TaskKind::sentiment, 500, 1);
    CHECK(t.train.size() == 500);
    CHECK(t.val.size() == 50);
    CHECK(t.test.size() == 100);
    CHECK_THROWS_AS(gen_synthetic(TaskKind::sentiment, 99, 1), Error);
}

TEST_CASE("bag-of-words probe scores 1.0 on every split") {
    for (TaskKind kind : {TaskKind::sentiment, TaskKind::topic}) {
        SyntheticTask t = gen_synthetic(kind, 300, 11);
        CHECK(bag_of_words_probe(t.class_keywords, t.train) == 1.0);
        CHECK(bag_of_words_probe(t.class_keywords, t.val) == 1.0);
        CHECK(bag_of_words_probe(t.class_keywords, t.test) == 1.0);
    }
}

TEST_CASE("classes are balanced within two percent") {
    for (TaskKind kind : {TaskKind::sentiment, TaskKind::topic}) {
        SyntheticTask t = gen_synthetic(kind, 1000, 3);
        std::vector<int> counts(static_cast<std::size_t>(t.num_classes), 0);
        for (const auto& s : t.train) ++counts[static_cast<std::size_t>(s.label)];
        const double uniform = 1.0 / t.num_classes;
        for (int c = 0; c < t.num_classes; ++c) {
            const double frac = static_cast<double>(counts[static_cast<std::size_t>(c)]) /
                                static_cast<double>(t.train.size());
            CAPTURE(c);
            CHECK(std::abs(frac - uniform) <= 0.02);
        }
    }
}

TEST_CASE("every keyword appears in training and has an antonym") {
    for (TaskKind kind : {TaskKind::sentiment, TaskKind::topic}) {
        SyntheticTask t = gen_synthetic(kind, 400, 5);
        const auto counts = word_counts(t.train);
        const Lexicon lex = Lexicon::from_entries(t.lexicon_entries);
        for (const auto& cls : t.class_keywords) {
            for (const auto& w : cls) {
                CAPTURE(w);
                CHECK(counts.count(w) == 1);
                const auto* ants = lex.related(w, "ant");
                REQUIRE(ants != nullptr);
                CHECK(!ants->empty());
                CHECK(!lex.pos_of(w).empty());
            }
        }
    }
}

TEST_CASE("rare keywords stay rare relative to common ones") {
    SyntheticTask t = gen_synthetic(TaskKind::sentiment, 2000, 9);
    const auto counts = word_counts(t.train);
    // Rare keywords sit at the tail of each class list (last 6 of 18).
    long rare_total = 0, common_total = 0;
    for (const auto& cls : t.class_keywords) {
        for (std::size_t i = 0; i < cls.size(); ++i) {
            const auto it = counts.find(cls[i]);
            const int c = it == counts.end() ? 0 : it->second;
            if (i + 6 >= cls.size()) {
                rare_total += c;
                CHECK(c >= 1);
                CHECK(c <= 30);
            } else {
                common_total += c;
            }
        }
    }
    CHECK(common_total > 10 * rare_total);
}

TEST_CASE("sentences stay within the token budget") {
    SyntheticTask t = gen_synthetic(TaskKind::topic, 500, 13);
    for (const auto* split : {&t.train, &t.val, &t.test}) {
        for (const auto& s : *split) {
            const auto n = split_words(s.text).size();
            CHECK(n >= 4);
            CHECK(n <= 14);
        }
    }
}

TEST_CASE("vocabulary lands near three hundred words") {
    SyntheticTask t = gen_synthetic(TaskKind::sentiment, 2000, 21);
    Vocab v = Vocab::build(t.train);
    CHECK(v.size() >= 230);
    CHECK(v.size() <= 320);
}

TEST_CASE("task kinds parse and print") {
    CHECK(parse_task_kind("sentiment") == TaskKind::sentiment);
    CHECK(parse_task_kind("topic") == TaskKind::topic);
    CHECK(std::string(task_kind_name(TaskKind::topic)) == "topic");
    CHECK_THROWS_AS(parse_task_kind("news"), Error);
}

TEST_CASE("lexicon round-trips through the tsv file") {
    SyntheticTask t = gen_synthetic(TaskKind::sentiment, 200, 2);
    const auto path = std::filesystem::temp_directory_path() / "iasdet_lex.tsv";
    save_lexicon(path, t.lexicon_entries);
    auto in = load_lexicon_entries(path);
    REQUIRE(in.size() == t.lexicon_entries.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        CHECK(in[i].word == t.lexicon_entries[i].word);
        CHECK(in[i].relation == t.lexicon_entries[i].relation);
        CHECK(in[i].related == t.lexicon_entries[i].related);
    }
    std::filesystem::remove(path);
}

}  // TEST_SUITE
