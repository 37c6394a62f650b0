#include "iasdet/attacks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>
#include <utility>

#include <json.hpp>

#include "iasdet/ops.hpp"

namespace iasdet {

using nlohmann::json;

namespace {

constexpr std::array<const char*, kNumAttackKinds> kAttackNames = {
    "word-deletion",     "word-antonym",  "word-synonym",   "word-embedding",
    "word-order-swap",   "char-substitution", "char-deletion", "char-insertion",
    "char-order-swap",   "pwws",          "textfooler"};

// Out-of-vocabulary probe word used for saliency scoring; guaranteed not to
// appear in corpora built from plain words, so victims see the unknown token.
constexpr const char* kUnknownWord = "<unk>";

int argmax(const std::vector<double>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

void check_label(const LabeledSample& sample, const Victim& model, const char* where) {
    if (sample.label < 0 || sample.label >= model.num_classes()) {
        fail(where, ": label ", sample.label, " outside 0..", model.num_classes() - 1);
    }
}

}  // namespace

const std::vector<AttackKind>& all_attack_kinds() {
    static const std::vector<AttackKind> kinds = [] {
        std::vector<AttackKind> v;
        for (std::size_t i = 0; i < kNumAttackKinds; ++i) {
            v.push_back(static_cast<AttackKind>(i));
        }
        return v;
    }();
    return kinds;
}

const char* attack_kind_name(AttackKind kind) {
    const auto idx = static_cast<std::size_t>(kind);
    if (idx >= kNumAttackKinds) fail("attack_kind_name: invalid attack kind");
    return kAttackNames[idx];
}

AttackKind parse_attack_kind(const std::string& name) {
    for (std::size_t i = 0; i < kNumAttackKinds; ++i) {
        if (name == kAttackNames[i]) return static_cast<AttackKind>(i);
    }
    fail("unknown attack kind '", name, "'");
}

// --- victims -----------------------------------------------------------------

std::vector<double> Victim::probs(const std::string& text) {
    ++queries_;
    std::vector<double> p = compute(text);
    if (p.size() != static_cast<std::size_t>(num_classes())) {
        fail("victim: returned ", p.size(), " probabilities for ", num_classes(), " classes");
    }
    return p;
}

int Victim::predict(const std::string& text) { return argmax(probs(text)); }

EncoderVictim::EncoderVictim(const EncoderParams& params, const Vocab& vocab)
    : params_(&params), vocab_(&vocab), gates_(ones_gates(params.config)) {}

int EncoderVictim::num_classes() const { return params_->config.num_classes; }

std::vector<double> EncoderVictim::compute(const std::string& text) {
    const std::vector<int> ids = encode(*vocab_, text, params_->config.max_len);
    const Tensor probs = softmax_rows(encoder_forward(*params_, ids, gates_).logits);
    const auto pr = probs.data();
    return std::vector<double>(pr.begin(), pr.end());
}

// --- edit machinery ----------------------------------------------------------

namespace {

// A single word-level edit against original word indices. Word states use
// tombstones so that indices stay valid after deletions.
struct Edit {
    enum class Op { erase, replace, swap_next };
    Op op = Op::replace;
    std::size_t pos = 0;
    std::string replacement;
};

using WordState = std::vector<std::optional<std::string>>;

WordState make_state(const std::vector<std::string>& words) {
    return WordState(words.begin(), words.end());
}

void apply_edit(WordState& state, const Edit& edit) {
    switch (edit.op) {
        case Edit::Op::erase:
            state[edit.pos].reset();
            break;
        case Edit::Op::replace:
            state[edit.pos] = edit.replacement;
            break;
        case Edit::Op::swap_next:
            std::swap(state[edit.pos], state[edit.pos + 1]);
            break;
    }
}

std::string join_state(const WordState& state) {
    std::vector<std::string> words;
    words.reserve(state.size());
    for (const auto& w : state) {
        if (w) words.push_back(*w);
    }
    return join_words(words);
}

std::string preview_edit(const std::vector<std::string>& words, const Edit& edit) {
    WordState state = make_state(words);
    apply_edit(state, edit);
    return join_state(state);
}

}  // namespace

std::size_t default_budget(std::size_t num_words) {
    return std::max<std::size_t>(1, 3 * num_words / 10);
}

std::optional<std::string> perturb_word_char(AttackKind kind, const std::string& word, Rng& rng) {
    const std::size_t len = word.size();
    switch (kind) {
        case AttackKind::char_substitution: {
            if (len < 3) return std::nullopt;
            const std::size_t pos = 1 + rng.uniform_index(len - 2);
            std::string out = word;
            const char orig = out[pos];
            if (orig >= 'a' && orig <= 'z') {
                // draw from the 25 letters that differ from the original
                char c = static_cast<char>('a' + rng.uniform_index(25));
                if (c >= orig) ++c;
                out[pos] = c;
            } else {
                out[pos] = static_cast<char>('a' + rng.uniform_index(26));
            }
            return out;
        }
        case AttackKind::char_deletion: {
            if (len < 3) return std::nullopt;
            const std::size_t pos = 1 + rng.uniform_index(len - 2);
            std::string out = word;
            out.erase(pos, 1);
            return out;
        }
        case AttackKind::char_insertion: {
            if (len < 2) return std::nullopt;
            const std::size_t pos = 1 + rng.uniform_index(len - 1);
            std::string out = word;
            out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos),
                       static_cast<char>('a' + rng.uniform_index(26)));
            return out;
        }
        case AttackKind::char_order_swap: {
            if (len < 4) return std::nullopt;
            std::vector<std::size_t> lefts;
            for (std::size_t i = 1; i + 2 < len; ++i) {
                if (word[i] != word[i + 1]) lefts.push_back(i);
            }
            if (lefts.empty()) return std::nullopt;
            const std::size_t i = lefts[rng.uniform_index(lefts.size())];
            std::string out = word;
            std::swap(out[i], out[i + 1]);
            return out;
        }
        default:
            fail("perturb_word_char: ", attack_kind_name(kind), " is not a character-level kind");
    }
}

// --- greedy single-operator attack -------------------------------------------

namespace {

struct Candidate {
    double prob = 0.0;  // victim confidence in the true label after this single edit
    Edit edit;
};

const char* lexicon_relation(AttackKind kind) {
    switch (kind) {
        case AttackKind::word_antonym:
            return "ant";
        case AttackKind::word_synonym:
            return "syn";
        case AttackKind::word_embedding:
            return "nbr";
        default:
            fail("lexicon_relation: ", attack_kind_name(kind), " has no lexicon relation");
    }
}

std::optional<Candidate> make_candidate(const LabeledSample& sample, AttackKind kind,
                                        const std::vector<std::string>& words, std::size_t pos,
                                        Victim& model, const Lexicon& lexicon, Rng& rng) {
    const auto label = static_cast<std::size_t>(sample.label);
    auto score_edit = [&](Edit edit) -> Candidate {
        const double prob = model.probs(preview_edit(words, edit))[label];
        return {prob, std::move(edit)};
    };
    switch (kind) {
        case AttackKind::word_deletion:
            return score_edit({Edit::Op::erase, pos, {}});
        case AttackKind::word_antonym:
        case AttackKind::word_synonym:
        case AttackKind::word_embedding: {
            const auto* list = lexicon.related(words[pos], lexicon_relation(kind));
            if (!list || list->empty()) return std::nullopt;
            std::optional<Candidate> best;
            for (const std::string& replacement : *list) {
                if (replacement == words[pos]) continue;
                Candidate c = score_edit({Edit::Op::replace, pos, replacement});
                if (!best || c.prob < best->prob) best = std::move(c);
            }
            return best;
        }
        case AttackKind::word_order_swap: {
            if (pos + 1 >= words.size() || words[pos] == words[pos + 1]) return std::nullopt;
            return score_edit({Edit::Op::swap_next, pos, {}});
        }
        case AttackKind::char_substitution:
        case AttackKind::char_deletion:
        case AttackKind::char_insertion:
        case AttackKind::char_order_swap: {
            auto perturbed = perturb_word_char(kind, words[pos], rng);
            if (!perturbed) return std::nullopt;
            return score_edit({Edit::Op::replace, pos, std::move(*perturbed)});
        }
        default:
            fail("make_candidate: composite kind ", attack_kind_name(kind));
    }
}

}  // namespace

std::optional<AdversarialExample> simple_attack(const LabeledSample& sample, AttackKind kind,
                                                Victim& model, const Lexicon& lexicon, Rng& rng,
                                                std::size_t budget) {
    if (kind == AttackKind::pwws || kind == AttackKind::textfooler) {
        fail("simple_attack: ", attack_kind_name(kind),
             " is a composite attack; call it directly or via run_attack");
    }
    check_label(sample, model, "simple_attack");
    const std::vector<std::string> words = split_words(sample.text);
    if (words.empty()) return std::nullopt;
    const std::size_t max_edits = budget != 0 ? budget : default_budget(words.size());
    const std::uint64_t start_queries = model.query_count();

    std::vector<Candidate> candidates;
    for (std::size_t pos = 0; pos < words.size(); ++pos) {
        if (auto c = make_candidate(sample, kind, words, pos, model, lexicon, rng)) {
            candidates.push_back(std::move(*c));
        }
    }
    // strongest confidence drop first; stable keeps position order on ties
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.prob < b.prob; });

    WordState current = make_state(words);
    AdversarialExample example;
    std::size_t applied = 0;
    for (const Candidate& c : candidates) {
        if (applied == max_edits) break;
        apply_edit(current, c.edit);
        example.edited_positions.push_back(c.edit.pos);
        ++applied;
        std::string text = join_state(current);
        const int predicted = argmax(model.probs(text));
        if (predicted != sample.label) {
            example.source_text = sample.text;
            example.perturbed_text = std::move(text);
            example.attack_type = kind;
            example.original_label = sample.label;
            example.adversarial_class = predicted;
            example.query_count = model.query_count() - start_queries;
            return example;
        }
    }
    return std::nullopt;
}

// --- probability-weighted word saliency ---------------------------------------

namespace {

std::vector<double> saliencies_with_base(Victim& model, const std::vector<std::string>& words,
                                         std::size_t label, double base_prob) {
    std::vector<double> saliency(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
        std::vector<std::string> probe = words;
        probe[i] = kUnknownWord;
        saliency[i] = base_prob - model.probs(join_words(probe))[label];
    }
    return saliency;
}

}  // namespace

std::vector<double> pwws_saliencies(Victim& model, const std::vector<std::string>& words,
                                    int label) {
    if (label < 0 || label >= model.num_classes()) {
        fail("pwws_saliencies: label ", label, " outside 0..", model.num_classes() - 1);
    }
    const double base = model.probs(join_words(words))[static_cast<std::size_t>(label)];
    return saliencies_with_base(model, words, static_cast<std::size_t>(label), base);
}

std::optional<AdversarialExample> pwws(const LabeledSample& sample, Victim& model,
                                       const Lexicon& lexicon, Rng& /*rng*/) {
    check_label(sample, model, "pwws");
    const std::vector<std::string> words = split_words(sample.text);
    if (words.empty()) return std::nullopt;
    const auto label = static_cast<std::size_t>(sample.label);
    const std::uint64_t start_queries = model.query_count();

    const double base = model.probs(sample.text)[label];
    const std::vector<double> saliency = saliencies_with_base(model, words, label, base);

    // softmax over saliencies weights each word's best-synonym confidence drop
    const double max_sal = *std::max_element(saliency.begin(), saliency.end());
    std::vector<double> phi(saliency.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < saliency.size(); ++i) {
        phi[i] = std::exp(saliency[i] - max_sal);
        denom += phi[i];
    }
    for (double& v : phi) v /= denom;

    struct Scored {
        double score;
        std::size_t pos;
        const std::string* replacement;
    };
    std::vector<Scored> scored;
    for (std::size_t i = 0; i < words.size(); ++i) {
        const auto* synonyms = lexicon.related(words[i], "syn");
        if (!synonyms || synonyms->empty()) continue;
        const std::string* best = nullptr;
        double best_prob = std::numeric_limits<double>::infinity();
        for (const std::string& candidate : *synonyms) {
            if (candidate == words[i]) continue;
            std::vector<std::string> probe = words;
            probe[i] = candidate;
            const double prob = model.probs(join_words(probe))[label];
            if (prob < best_prob) {
                best_prob = prob;
                best = &candidate;
            }
        }
        if (!best) continue;
        scored.push_back({phi[i] * (base - best_prob), i, best});
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const Scored& a, const Scored& b) { return a.score > b.score; });

    WordState current = make_state(words);
    AdversarialExample example;
    for (const Scored& s : scored) {
        current[s.pos] = *s.replacement;
        example.edited_positions.push_back(s.pos);
        std::string text = join_state(current);
        const int predicted = argmax(model.probs(text));
        if (predicted != sample.label) {
            example.source_text = sample.text;
            example.perturbed_text = std::move(text);
            example.attack_type = AttackKind::pwws;
            example.original_label = sample.label;
            example.adversarial_class = predicted;
            example.query_count = model.query_count() - start_queries;
            return example;
        }
    }
    return std::nullopt;
}

// --- deletion-importance neighbor substitution --------------------------------

std::vector<double> textfooler_importance(Victim& model, const std::vector<std::string>& words,
                                          int label) {
    if (label < 0 || label >= model.num_classes()) {
        fail("textfooler_importance: label ", label, " outside 0..", model.num_classes() - 1);
    }
    const auto cls = static_cast<std::size_t>(label);
    const double base = model.probs(join_words(words))[cls];
    std::vector<double> importance(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
        std::vector<std::string> probe;
        probe.reserve(words.size() - 1);
        for (std::size_t j = 0; j < words.size(); ++j) {
            if (j != i) probe.push_back(words[j]);
        }
        importance[i] = base - model.probs(join_words(probe))[cls];
    }
    return importance;
}

std::optional<AdversarialExample> textfooler(const LabeledSample& sample, Victim& model,
                                             const Lexicon& lexicon, Rng& /*rng*/) {
    check_label(sample, model, "textfooler");
    const std::vector<std::string> words = split_words(sample.text);
    if (words.empty()) return std::nullopt;
    const auto label = static_cast<std::size_t>(sample.label);
    const std::uint64_t start_queries = model.query_count();

    // Importance ranks by the true-label probability once the word is deleted
    // (ascending probability = descending confidence drop); the shared
    // base probability cancels out of the ranking, so it is never queried.
    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
        WordState probe = make_state(words);
        probe[i].reset();
        order.emplace_back(model.probs(join_state(probe))[label], i);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    WordState current = make_state(words);
    double current_prob = std::numeric_limits<double>::infinity();
    AdversarialExample example;
    for (const auto& [deletion_prob, pos] : order) {
        const std::string& original = words[pos];
        const auto* neighbors = lexicon.related(original, "nbr");
        if (!neighbors || neighbors->empty()) continue;
        const std::string tag = lexicon.pos_of(original);

        const std::string* best = nullptr;
        double best_prob = std::numeric_limits<double>::infinity();
        const std::string* flip = nullptr;
        double flip_prob = std::numeric_limits<double>::infinity();
        std::string flip_text;
        int flip_class = 0;
        for (const std::string& candidate : *neighbors) {
            if (candidate == original) continue;
            if (!tag.empty() && lexicon.pos_of(candidate) != tag) continue;
            WordState trial = current;
            trial[pos] = candidate;
            std::string text = join_state(trial);
            const std::vector<double> pr = model.probs(text);
            const double prob = pr[label];
            const int predicted = argmax(pr);
            if (predicted != sample.label && prob < flip_prob) {
                flip = &candidate;
                flip_prob = prob;
                flip_text = std::move(text);
                flip_class = predicted;
            }
            if (prob < best_prob) {
                best_prob = prob;
                best = &candidate;
            }
        }
        if (flip) {
            example.edited_positions.push_back(pos);
            example.source_text = sample.text;
            example.perturbed_text = std::move(flip_text);
            example.attack_type = AttackKind::textfooler;
            example.original_label = sample.label;
            example.adversarial_class = flip_class;
            example.query_count = model.query_count() - start_queries;
            return example;
        }
        if (best && best_prob < current_prob) {
            current[pos] = *best;
            current_prob = best_prob;
            example.edited_positions.push_back(pos);
        }
    }
    return std::nullopt;
}

std::optional<AdversarialExample> run_attack(const LabeledSample& sample, AttackKind kind,
                                             Victim& model, const Lexicon& lexicon, Rng& rng,
                                             std::size_t budget) {
    switch (kind) {
        case AttackKind::pwws:
            return pwws(sample, model, lexicon, rng);
        case AttackKind::textfooler:
            return textfooler(sample, model, lexicon, rng);
        default:
            return simple_attack(sample, kind, model, lexicon, rng, budget);
    }
}

// --- benchmark construction ----------------------------------------------------

namespace {

// largest-remainder allocation of n into 70/10/20, in exact integer arithmetic
std::array<std::size_t, 3> hamilton_70_10_20(std::size_t n) {
    const std::size_t numerator[3] = {7, 1, 2};
    std::array<std::size_t, 3> out{};
    std::size_t remainder[3];
    std::size_t used = 0;
    for (int s = 0; s < 3; ++s) {
        out[s] = numerator[s] * n / 10;
        remainder[s] = numerator[s] * n % 10;
        used += out[s];
    }
    std::array<int, 3> order = {0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; k < n - used; ++k) ++out[static_cast<std::size_t>(order[k])];
    return out;
}

}  // namespace

std::vector<int> stratified_split(const std::vector<std::string>& strata, Rng& rng) {
    const std::size_t n = strata.size();
    std::vector<int> out(n, 0);
    if (n == 0) return out;

    // group indices by stratum, in order of first appearance
    std::unordered_map<std::string, std::size_t> stratum_index;
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) {
        auto [it, fresh] = stratum_index.try_emplace(strata[i], groups.size());
        if (fresh) groups.emplace_back();
        groups[it->second].push_back(i);
    }
    for (auto& group : groups) rng.shuffle(group);

    const std::array<std::size_t, 3> target = hamilton_70_10_20(n);

    // per-stratum allocation; strata with >= 3 members keep one sample in each
    // split so every attack type is represented everywhere
    const std::size_t num_groups = groups.size();
    std::vector<std::array<std::size_t, 3>> alloc(num_groups);
    std::array<std::size_t, 3> total{};
    for (std::size_t k = 0; k < num_groups; ++k) {
        const std::size_t size = groups[k].size();
        if (size >= 3) {
            alloc[k] = hamilton_70_10_20(size - 3);
            for (int s = 0; s < 3; ++s) ++alloc[k][s];
        } else {
            alloc[k] = hamilton_70_10_20(size);
        }
        for (int s = 0; s < 3; ++s) total[s] += alloc[k][s];
    }

    // reconcile global counts to the exact targets by moving samples between
    // splits inside donor strata; representation floors take precedence, so
    // when many tiny strata make the two goals jointly infeasible the global
    // counts stop as close to the targets as the floors allow
    while (total != target) {
        int under = -1;
        for (int s = 0; s < 3; ++s) {
            if (total[s] < target[s]) {
                under = s;
                break;
            }
        }
        if (under < 0) break;
        int over = -1;
        std::size_t donor = num_groups;
        for (int s = 0; s < 3 && over < 0; ++s) {
            if (total[s] <= target[s]) continue;
            for (std::size_t k = 0; k < num_groups; ++k) {
                const std::size_t floor_k = groups[k].size() >= 3 ? 1 : 0;
                if (alloc[k][s] > floor_k &&
                    (donor == num_groups || alloc[k][s] > alloc[donor][s])) {
                    donor = k;
                    over = s;
                }
            }
        }
        if (over < 0) break;  // every surplus sits on a representation floor
        --alloc[donor][over];
        ++alloc[donor][under];
        --total[over];
        ++total[under];
    }

    for (std::size_t k = 0; k < num_groups; ++k) {
        std::size_t cursor = 0;
        for (int split = 0; split < 3; ++split) {
            for (std::size_t c = 0; c < alloc[k][split]; ++c, ++cursor) {
                out[groups[k][cursor]] = split;
            }
        }
    }
    return out;
}

Benchmark build_benchmark(const std::vector<LabeledSample>& test_set, Victim& model,
                          const Lexicon& lexicon, const BenchmarkOptions& options) {
    if (options.per_type_quota == 0) fail("build_benchmark: per-type quota must be positive");
    Benchmark bench;

    // authentic side: every correctly predicted sample
    std::vector<std::size_t> sources;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
        const LabeledSample& s = test_set[i];
        if (s.label < 0 || s.label >= model.num_classes()) {
            fail("build_benchmark: sample ", i, ": label ", s.label, " outside 0..",
                 model.num_classes() - 1);
        }
        if (model.predict(s.text) != s.label) continue;
        sources.push_back(i);
        BenchmarkEntry e;
        e.text = s.text;
        e.source_text = s.text;
        e.attack_type = kAuthenticType;
        e.original_label = s.label;
        e.target_class = s.label;
        e.adversarial = false;
        bench.entries.push_back(std::move(e));
    }

    // adversarial side: per type, attack sources in order until the quota
    for (AttackKind kind : all_attack_kinds()) {
        std::size_t successes = 0;
        for (std::size_t idx : sources) {
            if (successes == options.per_type_quota) break;
            Rng rng(mix_seed(mix_seed(options.seed, static_cast<std::uint64_t>(idx)),
                             attack_kind_name(kind)));
            const auto example =
                run_attack(test_set[idx], kind, model, lexicon, rng, options.budget);
            if (!example) continue;
            ++successes;
            BenchmarkEntry e;
            e.text = example->perturbed_text;
            e.source_text = example->source_text;
            e.attack_type = attack_kind_name(kind);
            e.original_label = example->original_label;
            e.target_class = example->adversarial_class;
            e.adversarial = true;
            e.query_count = example->query_count;
            bench.entries.push_back(std::move(e));
        }
        if (successes == 0) {
            bench.warnings.push_back(std::string("attack type '") + attack_kind_name(kind) +
                                     "' produced no successful examples and was omitted");
        }
    }

    std::vector<std::string> strata;
    strata.reserve(bench.entries.size());
    for (const BenchmarkEntry& e : bench.entries) strata.push_back(e.attack_type);
    Rng split_rng(mix_seed(options.seed, "benchmark.split"));
    const std::vector<int> splits = stratified_split(strata, split_rng);
    for (std::size_t i = 0; i < bench.entries.size(); ++i) {
        bench.entries[i].id = i;
        bench.entries[i].split = splits[i];
    }
    return bench;
}

// --- serialization -------------------------------------------------------------

void save_adversarial_set(const std::filesystem::path& path,
                          const std::vector<AdversarialExample>& examples) {
    std::ofstream out(path);
    if (!out) fail("adversarial set: cannot open ", path.string(), " for writing");
    for (const AdversarialExample& ex : examples) {
        const json j = {{"source_text", ex.source_text},
                        {"perturbed_text", ex.perturbed_text},
                        {"attack_type", attack_kind_name(ex.attack_type)},
                        {"original_label", ex.original_label},
                        {"adversarial_class", ex.adversarial_class},
                        {"query_count", ex.query_count},
                        {"edited_positions", ex.edited_positions}};
        out << j.dump() << '\n';
    }
    if (!out) fail("adversarial set: write to ", path.string(), " failed");
}

std::vector<AdversarialExample> load_adversarial_set(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail("adversarial set: cannot open ", path.string());
    std::vector<AdversarialExample> examples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            fail("adversarial set: invalid json at ", path.string(), ":", line_no);
        }
        try {
            AdversarialExample ex;
            ex.source_text = j.at("source_text").get<std::string>();
            ex.perturbed_text = j.at("perturbed_text").get<std::string>();
            ex.attack_type = parse_attack_kind(j.at("attack_type").get<std::string>());
            ex.original_label = j.at("original_label").get<int>();
            ex.adversarial_class = j.at("adversarial_class").get<int>();
            ex.query_count = j.value("query_count", std::uint64_t{0});
            ex.edited_positions = j.value("edited_positions", std::vector<std::size_t>{});
            examples.push_back(std::move(ex));
        } catch (const json::exception& e) {
            fail("adversarial set: bad record at ", path.string(), ":", line_no, " (", e.what(),
                 ")");
        }
    }
    return examples;
}

void save_benchmark(const std::filesystem::path& path, const Benchmark& benchmark) {
    std::ofstream out(path);
    if (!out) fail("benchmark: cannot open ", path.string(), " for writing");
    const json meta = {{"benchmark_meta", {{"warnings", benchmark.warnings}}}};
    out << meta.dump() << '\n';
    for (const BenchmarkEntry& e : benchmark.entries) {
        const json j = {{"id", e.id},
                        {"text", e.text},
                        {"source_text", e.source_text},
                        {"attack_type", e.attack_type},
                        {"original_label", e.original_label},
                        {"target_class", e.target_class},
                        {"adversarial", e.adversarial},
                        {"split", e.split},
                        {"query_count", e.query_count}};
        out << j.dump() << '\n';
    }
    if (!out) fail("benchmark: write to ", path.string(), " failed");
}

Benchmark load_benchmark(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail("benchmark: cannot open ", path.string());
    Benchmark bench;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) fail("benchmark: invalid json at ", path.string(), ":", line_no);
        if (j.contains("benchmark_meta")) {
            try {
                bench.warnings =
                    j.at("benchmark_meta").at("warnings").get<std::vector<std::string>>();
            } catch (const json::exception& e) {
                fail("benchmark: bad metadata at ", path.string(), ":", line_no, " (", e.what(),
                     ")");
            }
            continue;
        }
        try {
            BenchmarkEntry e;
            e.id = j.at("id").get<std::size_t>();
            e.text = j.at("text").get<std::string>();
            e.source_text = j.at("source_text").get<std::string>();
            e.attack_type = j.at("attack_type").get<std::string>();
            e.original_label = j.at("original_label").get<int>();
            e.target_class = j.at("target_class").get<int>();
            e.adversarial = j.at("adversarial").get<bool>();
            e.split = j.at("split").get<int>();
            e.query_count = j.value("query_count", std::uint64_t{0});
            if (e.attack_type != kAuthenticType) parse_attack_kind(e.attack_type);
            bench.entries.push_back(std::move(e));
        } catch (const json::exception& e) {
            fail("benchmark: bad record at ", path.string(), ":", line_no, " (", e.what(), ")");
        }
    }
    return bench;
}

}  // namespace iasdet
