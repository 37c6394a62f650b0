#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "iasdet/dataset.hpp"

using namespace iasdet;
namespace fs = std::filesystem;

TEST_SUITE("dataset") {

TEST_CASE("split and join words") {
    auto words = split_words("  the  movie was great ");
    REQUIRE(words.size() == 4);
    CHECK(words[0] == "the");
    CHECK(words[3] == "great");
    CHECK(join_words(words) == "the movie was great");
    CHECK(split_words("").empty());
}

TEST_CASE("vocab reserves special ids and maps unknowns") {
    Vocab v = Vocab::build({{"the movie was great", 1}, {"the plot was boring", 0}});
    CHECK(v.id_of("[PAD]") == Vocab::pad_id);
    CHECK(v.id_of("[UNK]") == Vocab::unk_id);
    CHECK(v.id_of("[CLS]") == Vocab::cls_id);
    CHECK(v.id_of("[SEP]") == Vocab::sep_id);
    CHECK(v.id_of("the") == 4);  // first corpus word
    CHECK(v.id_of("never-seen") == Vocab::unk_id);
    CHECK(v.id_of("grea") == Vocab::unk_id);  // typo degrades to unknown
    CHECK(v.size() == 4 + 6);                 // the, movie, was, great, plot, boring
}

TEST_CASE("encode prepends CLS and truncates") {
    Vocab v = Vocab::build({{"a b c d", 0}});
    auto ids = encode(v, "a b zz", 16);
    REQUIRE(ids.size() == 4);
    CHECK(ids[0] == Vocab::cls_id);
    CHECK(ids[1] == v.id_of("a"));
    CHECK(ids[3] == Vocab::unk_id);

    auto truncated = encode(v, "a b c d", 3);
    REQUIRE(truncated.size() == 3);
    CHECK(truncated[0] == Vocab::cls_id);
    CHECK_THROWS_AS(encode(v, "a", 0), Error);
}

TEST_CASE("samples round-trip through the line format") {
    const fs::path path = fs::temp_directory_path() / "iasdet_samples.jsonl";
    std::vector<LabeledSample> out = {{"the movie was great", 1},
                                      {"quote \" and tab\tinside", 0},
                                      {"", 3}};
    save_samples(path, out);
    auto in = load_samples(path);
    REQUIRE(in.size() == out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(in[i].text == out[i].text);
        CHECK(in[i].label == out[i].label);
    }
    fs::remove(path);
}

TEST_CASE("malformed sample lines are rejected with location") {
    const fs::path path = fs::temp_directory_path() / "iasdet_bad.jsonl";
    {
        std::ofstream os(path);
        os << "{\"text\": \"ok\", \"label\": 1}\n";
        os << "not json at all\n";
    }
    try {
        load_samples(path);
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    fs::remove(path);
    CHECK_THROWS_AS(load_samples("/nonexistent.jsonl"), Error);
}

TEST_CASE("vocab round-trips through its file format") {
    const fs::path path = fs::temp_directory_path() / "iasdet_vocab.txt";
    Vocab v = Vocab::build({{"alpha beta gamma", 0}});
    save_vocab(path, v);
    Vocab in = load_vocab(path);
    CHECK(in.size() == v.size());
    CHECK(in.id_of("gamma") == v.id_of("gamma"));
    CHECK(in.id_of("[CLS]") == Vocab::cls_id);
    fs::remove(path);
}

}  // TEST_SUITE
