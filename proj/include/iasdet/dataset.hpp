#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "iasdet/common.hpp"

namespace iasdet {

struct LabeledSample {
    std::string text;
    int label = 0;
};

// Word-level vocabulary with reserved special ids. Unknown words map to
// unk_id rather than being rejected: character-level attacks rely on
// out-of-vocabulary words degrading into the unknown token.
struct Vocab {
    static constexpr int pad_id = 0;
    static constexpr int unk_id = 1;
    static constexpr int cls_id = 2;
    static constexpr int sep_id = 3;

    std::vector<std::string> id_to_word;
    std::unordered_map<std::string, int> word_to_id;

    static Vocab build(const std::vector<LabeledSample>& corpus);
    static Vocab from_words(const std::vector<std::string>& words);

    int id_of(const std::string& word) const;
    bool contains(const std::string& word) const { return word_to_id.count(word) != 0; }
    std::size_t size() const { return id_to_word.size(); }
};

std::vector<std::string> split_words(const std::string& text);
std::string join_words(const std::vector<std::string>& words);

// [CLS] followed by word ids, truncated to max_len tokens total.
std::vector<int> encode(const Vocab& vocab, const std::string& text, std::size_t max_len);

// Line-delimited {text, label} records.
std::vector<LabeledSample> load_samples(const std::filesystem::path& path);
void save_samples(const std::filesystem::path& path, const std::vector<LabeledSample>& samples);

// One word per line, position = id.
Vocab load_vocab(const std::filesystem::path& path);
void save_vocab(const std::filesystem::path& path, const Vocab& vocab);

}  // namespace iasdet
