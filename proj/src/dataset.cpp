#include "iasdet/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace iasdet {

using nlohmann::json;

Vocab Vocab::from_words(const std::vector<std::string>& words) {
    Vocab v;
    v.id_to_word = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
    for (const std::string& w : words) {
        if (v.word_to_id.count(w)) continue;
        v.word_to_id.emplace(w, static_cast<int>(v.id_to_word.size()));
        v.id_to_word.push_back(w);
    }
    for (int i = 0; i < 4; ++i) v.word_to_id.emplace(v.id_to_word[i], i);
    return v;
}

Vocab Vocab::build(const std::vector<LabeledSample>& corpus) {
    std::vector<std::string> words;
    for (const LabeledSample& s : corpus) {
        for (std::string& w : split_words(s.text)) words.push_back(std::move(w));
    }
    return from_words(words);
}

int Vocab::id_of(const std::string& word) const {
    auto it = word_to_id.find(word);
    return it == word_to_id.end() ? unk_id : it->second;
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string w;
    while (is >> w) out.push_back(std::move(w));
    return out;
}

std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += ' ';
        out += words[i];
    }
    return out;
}

std::vector<int> encode(const Vocab& vocab, const std::string& text, std::size_t max_len) {
    if (max_len == 0) fail("encode: max_len must be positive");
    std::vector<int> ids{Vocab::cls_id};
    for (const std::string& w : split_words(text)) {
        if (ids.size() >= max_len) break;
        ids.push_back(vocab.id_of(w));
    }
    return ids;
}

std::vector<LabeledSample> load_samples(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) fail("dataset: cannot open ", path.string());
    std::vector<LabeledSample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.contains("text") || !rec.contains("label")) {
            fail("dataset: ", path.string(), " line ", lineno,
                 " is not a {text, label} record");
        }
        out.push_back({rec["text"].get<std::string>(), rec["label"].get<int>()});
    }
    return out;
}

void save_samples(const std::filesystem::path& path, const std::vector<LabeledSample>& samples) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) fail("dataset: cannot open ", path.string(), " for writing");
    for (const LabeledSample& s : samples) {
        os << json{{"text", s.text}, {"label", s.label}}.dump() << '\n';
    }
}

Vocab load_vocab(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) fail("vocab: cannot open ", path.string());
    std::vector<std::string> words;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty()) words.push_back(line);
    }
    if (words.size() < 4 || words[0] != "[PAD]" || words[1] != "[UNK]" || words[2] != "[CLS]" ||
        words[3] != "[SEP]") {
        fail("vocab: ", path.string(), " does not start with the reserved special tokens");
    }
    return Vocab::from_words({words.begin() + 4, words.end()});
}

void save_vocab(const std::filesystem::path& path, const Vocab& vocab) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) fail("vocab: cannot open ", path.string(), " for writing");
    for (const std::string& w : vocab.id_to_word) os << w << '\n';
}

}  // namespace iasdet
