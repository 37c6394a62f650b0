#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "iasdet/dataset.hpp"
#include "iasdet/encoder.hpp"
#include "iasdet/lexicon.hpp"
#include "iasdet/rng.hpp"
#include "iasdet/tensor.hpp"

namespace iasdet {

// The eleven black-box attack operators. Word-level operators edit whole
// words; character-level operators edit a single word's interior characters,
// degrading it into an out-of-vocabulary token for the victim.
enum class AttackKind {
    word_deletion,
    word_antonym,
    word_synonym,
    word_embedding,
    word_order_swap,
    char_substitution,
    char_deletion,
    char_insertion,
    char_order_swap,
    pwws,
    textfooler,
};

inline constexpr std::size_t kNumAttackKinds = 11;

const std::vector<AttackKind>& all_attack_kinds();
const char* attack_kind_name(AttackKind kind);
AttackKind parse_attack_kind(const std::string& name);

// Query-counting classifier facade driven by the attack loops. Subclasses
// implement `compute`; every call through `probs`/`predict` is counted, so
// attack query budgets are measured at this boundary. Implementations must be
// deterministic: the same text always yields the same distribution.
class Victim {
public:
    virtual ~Victim() = default;

    std::vector<double> probs(const std::string& text);
    int predict(const std::string& text);

    virtual int num_classes() const = 0;

    std::uint64_t query_count() const { return queries_; }
    void reset_query_count() { queries_ = 0; }

private:
    virtual std::vector<double> compute(const std::string& text) = 0;

    std::uint64_t queries_ = 0;
};

// A fine-tuned encoder behind the Victim facade: whitespace tokenization
// against the training vocabulary (out-of-vocabulary words become the unknown
// token), all-ones head gates, softmax over the classifier logits. Holds
// references only; the encoder is never mutated.
class EncoderVictim final : public Victim {
public:
    EncoderVictim(const EncoderParams& params, const Vocab& vocab);

    int num_classes() const override;

private:
    std::vector<double> compute(const std::string& text) override;

    const EncoderParams* params_;
    const Vocab* vocab_;
    Tensor gates_;
};

struct AdversarialExample {
    std::string source_text;
    std::string perturbed_text;
    AttackKind attack_type = AttackKind::word_deletion;
    int original_label = 0;
    int adversarial_class = 0;  // the fooled prediction = detection target class
    std::uint64_t query_count = 0;
    std::vector<std::size_t> edited_positions;  // word indices, in application order
};

// Default perturbation budget: at most 30% of the words, at least one.
std::size_t default_budget(std::size_t num_words);

// One character-level perturbation of a single word, used by the char-*
// attack kinds: substitution/deletion act on an interior character, insertion
// never touches the first or last position, order swap transposes an adjacent
// interior pair. Returns absent when the word is too short for the edit.
std::optional<std::string> perturb_word_char(AttackKind kind, const std::string& word, Rng& rng);

// Greedy single-operator attack for the nine non-composite kinds: every
// candidate position is scored once by the victim's confidence in the true
// label after that single edit, then edits are applied in ascending-confidence
// order until the prediction flips or `budget` edits have been spent
// (budget 0 = per-sample default). Returns absent if no flip was reached.
std::optional<AdversarialExample> simple_attack(const LabeledSample& sample, AttackKind kind,
                                                Victim& model, const Lexicon& lexicon, Rng& rng,
                                                std::size_t budget = 0);

// Word-saliency scores: confidence drop in `label` when the word is replaced
// by an out-of-vocabulary unknown marker. Exposed for oracle tests.
std::vector<double> pwws_saliencies(Victim& model, const std::vector<std::string>& words,
                                    int label);

// Word-importance scores: confidence drop in `label` when the word is
// deleted. Exposed for oracle tests.
std::vector<double> textfooler_importance(Victim& model, const std::vector<std::string>& words,
                                          int label);

// Probability-weighted word saliency: words are scored by softmax(saliency) ×
// best-synonym confidence reduction and replaced by their best lexicon
// synonym in descending score order until the prediction flips.
std::optional<AdversarialExample> pwws(const LabeledSample& sample, Victim& model,
                                       const Lexicon& lexicon, Rng& rng);

// Deletion-importance ranking with embedding-neighbor substitution: words are
// visited in descending importance, each replaced by the part-of-speech
// preserving neighbor that minimizes the true-label probability, until the
// prediction flips.
std::optional<AdversarialExample> textfooler(const LabeledSample& sample, Victim& model,
                                             const Lexicon& lexicon, Rng& rng);

// Dispatches to simple_attack / pwws / textfooler by kind.
std::optional<AdversarialExample> run_attack(const LabeledSample& sample, AttackKind kind,
                                             Victim& model, const Lexicon& lexicon, Rng& rng,
                                             std::size_t budget = 0);

inline constexpr const char* kAuthenticType = "authentic";

struct BenchmarkEntry {
    std::size_t id = 0;
    std::string text;         // model input: the perturbed text for adversarial entries
    std::string source_text;  // equals text for authentic entries
    std::string attack_type;  // "authentic" or an attack kind name
    int original_label = 0;
    int target_class = 0;  // model prediction on text; the class gating must reproduce
    bool adversarial = false;
    int split = 0;  // 0 train / 1 val / 2 test
    std::uint64_t query_count = 0;
};

struct Benchmark {
    std::vector<BenchmarkEntry> entries;
    std::vector<std::string> warnings;  // one per attack type with zero successes
};

struct BenchmarkOptions {
    std::size_t per_type_quota = 40;
    std::size_t budget = 0;  // 0 = per-sample default
    std::uint64_t seed = 0;
};

// Authentic side: every correctly predicted sample of `test_set`. Adversarial
// side: per attack type, sources are attacked in order until the quota is
// reached; each attack owns an rng stream derived from (seed, sample index,
// attack type). Types with zero successes are recorded as warnings and
// omitted. Entries receive a stratified 70-10-20 split.
Benchmark build_benchmark(const std::vector<LabeledSample>& test_set, Victim& model,
                          const Lexicon& lexicon, const BenchmarkOptions& options);

// Stratified split assignment: returns one of {0, 1, 2} per entry. Every
// stratum with at least three members appears in all three splits, and the
// global split sizes match the largest-remainder 70-10-20 allocation exactly
// (within one sample of the ideal ratio) whenever that is compatible with the
// representation guarantee; representation wins otherwise.
std::vector<int> stratified_split(const std::vector<std::string>& strata, Rng& rng);

// Line-delimited JSON records.
void save_adversarial_set(const std::filesystem::path& path,
                          const std::vector<AdversarialExample>& examples);
std::vector<AdversarialExample> load_adversarial_set(const std::filesystem::path& path);

void save_benchmark(const std::filesystem::path& path, const Benchmark& benchmark);
Benchmark load_benchmark(const std::filesystem::path& path);

}  // namespace iasdet
