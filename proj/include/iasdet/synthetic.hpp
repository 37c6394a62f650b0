#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iasdet/dataset.hpp"
#include "iasdet/lexicon.hpp"

namespace iasdet {

// Keyword-separable synthetic text tasks: a 2-class sentiment variant and a
// 4-class topic variant. Every sentence contains strictly more target-class
// keywords than keywords of any other class, so a bag-of-words majority rule
// scores 100% by construction. A controlled fraction of sentences carries
// cross-class keywords at small margins, and each class owns a tail of rare
// keywords seen only a handful of times in training — both give the attack
// modules something to work with.
enum class TaskKind { sentiment, topic };

const char* task_kind_name(TaskKind kind);
TaskKind parse_task_kind(const std::string& name);

struct SyntheticTask {
    TaskKind kind = TaskKind::sentiment;
    int num_classes = 2;
    std::vector<std::string> class_names;
    std::vector<std::vector<std::string>> class_keywords;  // common + rare per class
    std::vector<LexiconEntry> lexicon_entries;
    std::vector<LabeledSample> train;
    std::vector<LabeledSample> val;
    std::vector<LabeledSample> test;
};

// val = train/10, test = train/5 samples. Aborts if the bag-of-words probe
// scores below 1.0 on any split (a generation bug by definition).
SyntheticTask gen_synthetic(TaskKind kind, std::size_t train_size, std::uint64_t seed);

// Majority keyword vote; returns the accuracy over the samples.
double bag_of_words_probe(const std::vector<std::vector<std::string>>& class_keywords,
                          const std::vector<LabeledSample>& samples);

}  // namespace iasdet
