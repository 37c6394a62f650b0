#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace iasdet {

// One relation edge: {word, relation, related-word}. Relations used:
//   syn — same-class synonym            ant — cross-class antonym
//   nbr — embedding-space neighbor      pos — part-of-speech tag (related = tag)
struct LexiconEntry {
    std::string word;
    std::string relation;
    std::string related;
};

struct Lexicon {
    std::unordered_map<std::string, std::vector<std::string>> syn;
    std::unordered_map<std::string, std::vector<std::string>> ant;
    std::unordered_map<std::string, std::vector<std::string>> nbr;
    std::unordered_map<std::string, std::string> pos;

    static Lexicon from_entries(const std::vector<LexiconEntry>& entries);

    const std::vector<std::string>* related(const std::string& word,
                                            const std::string& relation) const;
    std::string pos_of(const std::string& word) const;  // empty if untagged
};

void save_lexicon(const std::filesystem::path& path, const std::vector<LexiconEntry>& entries);
std::vector<LexiconEntry> load_lexicon_entries(const std::filesystem::path& path);
Lexicon load_lexicon(const std::filesystem::path& path);

}  // namespace iasdet
