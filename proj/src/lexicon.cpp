#include "iasdet/lexicon.hpp"

#include <fstream>

#include "iasdet/common.hpp"

namespace iasdet {

Lexicon Lexicon::from_entries(const std::vector<LexiconEntry>& entries) {
    Lexicon lex;
    for (const LexiconEntry& e : entries) {
        if (e.relation == "syn") {
            lex.syn[e.word].push_back(e.related);
        } else if (e.relation == "ant") {
            lex.ant[e.word].push_back(e.related);
        } else if (e.relation == "nbr") {
            lex.nbr[e.word].push_back(e.related);
        } else if (e.relation == "pos") {
            lex.pos[e.word] = e.related;
        } else {
            fail("lexicon: unknown relation '", e.relation, "' for word '", e.word, "'");
        }
    }
    return lex;
}

const std::vector<std::string>* Lexicon::related(const std::string& word,
                                                 const std::string& relation) const {
    const auto* map = relation == "syn"   ? &syn
                      : relation == "ant" ? &ant
                      : relation == "nbr" ? &nbr
                                          : nullptr;
    if (!map) fail("lexicon: unknown relation '", relation, "'");
    auto it = map->find(word);
    return it == map->end() ? nullptr : &it->second;
}

std::string Lexicon::pos_of(const std::string& word) const {
    auto it = pos.find(word);
    return it == pos.end() ? std::string{} : it->second;
}

void save_lexicon(const std::filesystem::path& path, const std::vector<LexiconEntry>& entries) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) fail("lexicon: cannot open ", path.string(), " for writing");
    for (const LexiconEntry& e : entries) {
        os << e.word << '\t' << e.relation << '\t' << e.related << '\n';
    }
}

std::vector<LexiconEntry> load_lexicon_entries(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) fail("lexicon: cannot open ", path.string());
    std::vector<LexiconEntry> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos) {
            fail("lexicon: ", path.string(), " line ", lineno, " is not word<TAB>rel<TAB>word");
        }
        out.push_back({line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), line.substr(t2 + 1)});
    }
    return out;
}

Lexicon load_lexicon(const std::filesystem::path& path) {
    return Lexicon::from_entries(load_lexicon_entries(path));
}

}  // namespace iasdet
