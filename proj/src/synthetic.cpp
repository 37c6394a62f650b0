#include "iasdet/synthetic.hpp"

#include <algorithm>
#include <unordered_set>

#include "iasdet/rng.hpp"

namespace iasdet {
namespace {

// --- shared filler pool, grouped by part of speech ---------------------------

const std::vector<std::string>& fill_det() {
    static const std::vector<std::string> v = {"the", "a",    "this",  "that",
                                               "every", "some", "each", "another"};
    return v;
}

const std::vector<std::string>& fill_pron() {
    static const std::vector<std::string> v = {"i", "we", "they", "he", "she", "you", "it", "one"};
    return v;
}

const std::vector<std::string>& fill_verb() {
    static const std::vector<std::string> v = {
        "was",       "felt",      "seemed",  "looked",   "appeared", "remained", "became",
        "stayed",    "sounded",   "proved",  "found",    "thought",  "called",   "considered",
        "described", "judged",    "deemed",  "watched",  "read",     "saw",      "heard",
        "wrote",     "made",      "kept",    "went",     "came",     "turned",   "opened",
        "started",   "finished",  "closed",  "returned", "arrived",  "left",     "walked",
        "stood",     "sat",       "waited",  "paused",   "continued", "noticed", "recalled"};
    return v;
}

const std::vector<std::string>& fill_adv() {
    static const std::vector<std::string> v = {
        "truly",   "really",  "quite",   "rather",   "very",     "simply",  "utterly",
        "fairly",  "somewhat", "deeply",  "plainly",  "clearly",  "notably", "mostly",
        "largely", "entirely", "wholly",  "nearly",   "often",    "always",  "sometimes",
        "usually", "again",    "soon",    "later",    "early",    "tonight", "yesterday",
        "rarely",  "slowly",   "quietly", "gently"};
    return v;
}

const std::vector<std::string>& fill_noun() {
    static const std::vector<std::string> v = {
        "movie",     "film",       "story",    "plot",     "acting",      "script",
        "scene",     "ending",     "cast",     "dialogue", "production",  "sequel",
        "drama",     "comedy",     "picture",  "show",     "episode",     "performance",
        "direction", "soundtrack", "article",  "report",   "review",      "piece",
        "column",    "essay",      "note",     "update",   "item",        "post",
        "morning",   "evening",    "weekend",  "afternoon", "moment",     "month",
        "week",      "year",       "day",      "night",    "place",       "town",
        "city",      "corner",     "room",     "hall",     "street",      "road",
        "park",      "office",     "friend",   "neighbor", "crowd",       "family",
        "audience",  "visitor",    "stranger", "reader",   "viewer",      "critic",
        "writer",    "host",       "window",   "door",     "table",       "chair",
        "garden",    "wall",       "roof",     "floor",    "page",        "letter",
        "journal",   "notebook",   "shelf",    "corridor", "balcony",     "courtyard",
        "lobby",     "cellar",     "museum",   "library",  "station",     "harbor",
        "bridge",    "tunnel",     "market",   "plaza",    "avenue",      "boulevard",
        "cabin",     "cottage",    "village",  "county",   "region",      "border",
        "hillside",  "meadow",     "valley",   "shore"};
    return v;
}

const std::vector<std::string>& fill_adj() {
    static const std::vector<std::string> v = {"long",    "short",  "new",     "old",
                                               "late",    "big",    "small",   "full",
                                               "whole",   "certain", "recent", "typical",
                                               "quiet",   "distant", "nearby", "local",
                                               "foreign", "modern", "ancient", "plain"};
    return v;
}

const std::vector<std::string>& fill_conj() {
    static const std::vector<std::string> v = {"and", "but", "yet", "though",
                                               "while", "plus", "also", "still"};
    return v;
}

const std::vector<std::string>& fill_prep() {
    static const std::vector<std::string> v = {"about",  "with",   "from",   "over",
                                               "under",  "into",   "within", "beyond",
                                               "across", "during", "before", "after",
                                               "against", "toward", "between", "around"};
    return v;
}

// --- keyword inventories ------------------------------------------------------

struct KeywordSets {
    // per class
    std::vector<std::vector<std::string>> common;
    std::vector<std::vector<std::string>> rare;
    std::string pos_tag;
};

KeywordSets sentiment_keywords() {
    KeywordSets ks;
    ks.pos_tag = "adj";
    ks.common = {
        // class 0: negative
        {"awful", "terrible", "dreadful", "boring", "bland", "clumsy", "dismal", "tedious",
         "horrible", "painful", "shallow", "sloppy"},
        // class 1: positive
        {"great", "wonderful", "superb", "delightful", "charming", "brilliant", "excellent",
         "enjoyable", "graceful", "fantastic", "gripping", "lovely"},
    };
    ks.rare = {
        {"abysmal", "dire", "wretched", "lifeless", "grating", "murky"},
        {"sublime", "radiant", "stellar", "luminous", "majestic", "dazzling"},
    };
    return ks;
}

KeywordSets topic_keywords() {
    KeywordSets ks;
    ks.pos_tag = "noun";
    ks.common = {
        {"match", "tournament", "coach", "stadium", "goal", "referee", "league", "striker",
         "defender", "kickoff"},
        {"software", "processor", "network", "database", "robot", "algorithm", "server",
         "compiler", "gadget", "browser"},
        {"recipe", "dinner", "flavor", "kitchen", "bakery", "sauce", "dessert", "spice", "roast",
         "menu"},
        {"storm", "forecast", "sunshine", "thunder", "humidity", "breeze", "drizzle", "frost",
         "cloud", "rainfall"},
    };
    ks.rare = {
        {"playoff", "dugout", "scrimmage"},
        {"firmware", "chipset", "mainframe"},
        {"broth", "garnish", "casserole"},
        {"sleet", "gust", "monsoon"},
    };
    return ks;
}

std::vector<LexiconEntry> build_lexicon(const KeywordSets& ks) {
    std::vector<LexiconEntry> out;
    const std::size_t classes = ks.common.size();

    for (std::size_t c = 0; c < classes; ++c) {
        const auto& common = ks.common[c];
        const auto& rare = ks.rare[c];
        // Antonyms pair index-aligned words of the "opposite" class: the other
        // class for 2 classes, the next class cyclically otherwise.
        const auto& anti = ks.common[(c + 1) % classes];
        const auto& anti_rare = ks.rare[(c + 1) % classes];

        for (std::size_t i = 0; i < common.size(); ++i) {
            out.push_back({common[i], "syn", common[(i + 1) % common.size()]});
            out.push_back({common[i], "syn", rare[i % rare.size()]});
            out.push_back({common[i], "nbr", common[(i + 2) % common.size()]});
            out.push_back({common[i], "ant", anti[i]});
        }
        for (std::size_t i = 0; i < rare.size(); ++i) {
            out.push_back({rare[i], "syn", common[i % common.size()]});
            out.push_back({rare[i], "nbr", common[(2 * i + 1) % common.size()]});
            out.push_back({rare[i], "ant", anti_rare[i % anti_rare.size()]});
        }
        for (const std::string& w : common) out.push_back({w, "pos", ks.pos_tag});
        for (const std::string& w : rare) out.push_back({w, "pos", ks.pos_tag});
    }

    auto tag_all = [&out](const std::vector<std::string>& words, const char* tag) {
        for (const std::string& w : words) out.push_back({w, "pos", tag});
    };
    tag_all(fill_det(), "det");
    tag_all(fill_pron(), "pron");
    tag_all(fill_verb(), "verb");
    tag_all(fill_adv(), "adv");
    tag_all(fill_noun(), "noun");
    tag_all(fill_adj(), "adj");
    tag_all(fill_conj(), "conj");
    tag_all(fill_prep(), "prep");
    return out;
}

// --- sentence assembly --------------------------------------------------------

constexpr std::size_t kMaxWords = 14;

const std::string& pick(Rng& rng, const std::vector<std::string>& pool) {
    return pool[rng.uniform_index(pool.size())];
}

// Draws a keyword for `cls`, avoiding words already in `used` when possible.
// Rare keywords surface in ~1% of draws, so they stay genuinely undertrained
// relative to the common pool.
std::string pick_keyword(Rng& rng, const KeywordSets& ks, std::size_t cls,
                         std::unordered_set<std::string>& used) {
    for (int attempt = 0; attempt < 8; ++attempt) {
        const bool rare = rng.uniform() < 0.012;
        const auto& pool = rare ? ks.rare[cls] : ks.common[cls];
        const std::string& w = pick(rng, pool);
        if (!used.count(w)) {
            used.insert(w);
            return w;
        }
    }
    return pick(rng, ks.common[cls]);
}

// Keyword schedule for one sentence: margin more target-class keywords than
// the single contrasting class. max_total caps margin + 2*k_other so the
// assembled sentence fits the word budget.
std::vector<std::string> keyword_schedule(Rng& rng, const KeywordSets& ks, int label,
                                          int num_classes, int max_total,
                                          const std::string& forced_word) {
    int margin;
    const double r = rng.uniform();
    margin = r < 0.40 ? 1 : (r < 0.75 ? 2 : 3);

    int k_other = 0;
    const double q = rng.uniform();
    if (margin == 1) {
        k_other = q < 0.45 ? 0 : (q < 0.80 ? 1 : 2);
    } else if (margin == 2) {
        k_other = q < 0.70 ? 0 : 1;
    } else {
        k_other = q < 0.80 ? 0 : 1;
    }
    while (k_other > 0 && margin + 2 * k_other > max_total) --k_other;

    std::unordered_set<std::string> used;
    std::vector<std::string> schedule;
    if (!forced_word.empty()) {
        used.insert(forced_word);
        schedule.push_back(forced_word);
    }
    while (static_cast<int>(schedule.size()) < margin + k_other) {
        schedule.push_back(pick_keyword(rng, ks, static_cast<std::size_t>(label), used));
    }
    if (k_other > 0) {
        std::size_t other = rng.uniform_index(static_cast<std::size_t>(num_classes - 1));
        if (static_cast<int>(other) >= label) ++other;
        for (int i = 0; i < k_other; ++i) {
            schedule.push_back(pick_keyword(rng, ks, other, used));
        }
    }
    rng.shuffle(schedule);
    return schedule;
}

std::vector<std::string> assemble_sentiment(Rng& rng, const std::vector<std::string>& schedule) {
    std::vector<std::string> t = {pick(rng, fill_det()), pick(rng, fill_noun()),
                                  pick(rng, fill_verb())};
    if (rng.uniform() < 0.35) t.push_back(pick(rng, fill_adv()));
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (i) t.push_back(pick(rng, fill_conj()));
        t.push_back(schedule[i]);
    }
    return t;
}

std::vector<std::string> assemble_topic(Rng& rng, const std::vector<std::string>& schedule) {
    std::vector<std::string> t;
    if (rng.bernoulli(0.5)) {
        t = {pick(rng, fill_pron()), pick(rng, fill_verb()), pick(rng, fill_det()), schedule[0]};
    } else {
        t = {pick(rng, fill_det()), pick(rng, fill_noun()), pick(rng, fill_verb()),
             pick(rng, fill_det()), schedule[0]};
    }
    for (std::size_t i = 1; i < schedule.size(); ++i) {
        t.push_back(rng.bernoulli(0.6) ? pick(rng, fill_prep()) : pick(rng, fill_conj()));
        t.push_back(pick(rng, fill_det()));
        t.push_back(schedule[i]);
    }
    return t;
}

void pad_sentence(Rng& rng, std::vector<std::string>& t, std::size_t target_len) {
    while (t.size() < target_len && t.size() + 1 <= kMaxWords) {
        const double r = rng.uniform();
        if (r < 0.55 && t.size() + 3 <= kMaxWords) {
            t.push_back(pick(rng, fill_prep()));
            t.push_back(pick(rng, fill_det()));
            t.push_back(pick(rng, fill_noun()));
        } else if (r < 0.75 && t.size() + 3 <= kMaxWords) {
            t.push_back(pick(rng, fill_prep()));
            t.push_back(pick(rng, fill_adj()));
            t.push_back(pick(rng, fill_noun()));
        } else {
            t.push_back(pick(rng, fill_adv()));
        }
    }
}

LabeledSample gen_sentence(Rng& rng, TaskKind kind, const KeywordSets& ks, int label,
                           int num_classes, const std::string& forced_word = {}) {
    // Word budgets: sentiment spends 1 word per extra keyword, topic spends 3.
    const int max_total = kind == TaskKind::sentiment ? 5 : 4;
    const auto schedule = keyword_schedule(rng, ks, label, num_classes, max_total, forced_word);
    auto tokens = kind == TaskKind::sentiment ? assemble_sentiment(rng, schedule)
                                              : assemble_topic(rng, schedule);
    const std::size_t target_len = 6 + rng.uniform_index(7);  // 6..12
    pad_sentence(rng, tokens, target_len);
    if (tokens.size() > kMaxWords) {
        fail("gen_synthetic: assembled sentence of ", tokens.size(), " words exceeds the cap");
    }
    return {join_words(tokens), label};
}

std::vector<LabeledSample> gen_split(Rng rng, TaskKind kind, const KeywordSets& ks,
                                     std::size_t count, int num_classes, bool force_coverage) {
    std::vector<LabeledSample> out;
    out.reserve(count);
    if (force_coverage) {
        // Every keyword (common and rare) appears in this split at least once,
        // so the vocabulary covers the whole lexicon and rare words stay rare
        // rather than absent.
        for (std::size_t c = 0; c < ks.common.size(); ++c) {
            for (const auto& w : ks.common[c]) {
                out.push_back(gen_sentence(rng, kind, ks, static_cast<int>(c), num_classes, w));
            }
            for (const auto& w : ks.rare[c]) {
                out.push_back(gen_sentence(rng, kind, ks, static_cast<int>(c), num_classes, w));
            }
        }
        if (out.size() > count) {
            fail("gen_synthetic: split of ", count, " samples cannot cover ", out.size(),
                 " keywords");
        }
    }
    int label = 0;
    while (out.size() < count) {
        out.push_back(gen_sentence(rng, kind, ks, label, num_classes));
        label = (label + 1) % num_classes;
    }
    rng.shuffle(out);
    return out;
}

}  // namespace

const char* task_kind_name(TaskKind kind) {
    return kind == TaskKind::sentiment ? "sentiment" : "topic";
}

TaskKind parse_task_kind(const std::string& name) {
    if (name == "sentiment") return TaskKind::sentiment;
    if (name == "topic") return TaskKind::topic;
    fail("unknown task kind '", name, "' (expected sentiment or topic)");
}

double bag_of_words_probe(const std::vector<std::vector<std::string>>& class_keywords,
                          const std::vector<LabeledSample>& samples) {
    std::unordered_map<std::string, int> word_class;
    for (std::size_t c = 0; c < class_keywords.size(); ++c) {
        for (const std::string& w : class_keywords[c]) word_class[w] = static_cast<int>(c);
    }
    std::size_t correct = 0;
    for (const LabeledSample& s : samples) {
        std::vector<int> counts(class_keywords.size(), 0);
        for (const std::string& w : split_words(s.text)) {
            auto it = word_class.find(w);
            if (it != word_class.end()) ++counts[static_cast<std::size_t>(it->second)];
        }
        int best = 0;
        bool tie = false;
        for (std::size_t c = 1; c < counts.size(); ++c) {
            if (counts[c] > counts[static_cast<std::size_t>(best)]) {
                best = static_cast<int>(c);
                tie = false;
            } else if (counts[c] == counts[static_cast<std::size_t>(best)]) {
                tie = true;
            }
        }
        if (!tie && best == s.label) ++correct;
    }
    return samples.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(samples.size());
}

SyntheticTask gen_synthetic(TaskKind kind, std::size_t train_size, std::uint64_t seed) {
    if (train_size < 100) {
        fail("gen_synthetic: train size ", train_size, " below the minimum of 100");
    }
    const KeywordSets ks = kind == TaskKind::sentiment ? sentiment_keywords() : topic_keywords();

    SyntheticTask task;
    task.kind = kind;
    task.num_classes = static_cast<int>(ks.common.size());
    task.class_names = kind == TaskKind::sentiment
                           ? std::vector<std::string>{"negative", "positive"}
                           : std::vector<std::string>{"sports", "tech", "food", "weather"};
    for (std::size_t c = 0; c < ks.common.size(); ++c) {
        std::vector<std::string> all = ks.common[c];
        all.insert(all.end(), ks.rare[c].begin(), ks.rare[c].end());
        task.class_keywords.push_back(std::move(all));
    }
    task.lexicon_entries = build_lexicon(ks);

    Rng root(mix_seed(seed, task_kind_name(kind)));
    task.train = gen_split(root.fork("train"), kind, ks, train_size, task.num_classes, true);
    task.val = gen_split(root.fork("val"), kind, ks, std::max<std::size_t>(train_size / 10, 50),
                         task.num_classes, false);
    task.test = gen_split(root.fork("test"), kind, ks, std::max<std::size_t>(train_size / 5, 100),
                          task.num_classes, false);

    for (const auto* split : {&task.train, &task.val, &task.test}) {
        const double probe = bag_of_words_probe(task.class_keywords, *split);
        if (probe < 1.0) {
            fail("gen_synthetic: bag-of-words probe scored ", probe,
                 " < 1.0 — generation bug");
        }
    }
    return task;
}

}  // namespace iasdet
