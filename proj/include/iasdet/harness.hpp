#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "iasdet/advnet.hpp"
#include "iasdet/encoder.hpp"
#include "iasdet/ias.hpp"

namespace iasdet {

// Everything a pipeline run depends on. A run is reproducible from the config
// plus its seed alone; the config hash (which excludes the output directory)
// versions every artifact a run produces.
struct PipelineConfig {
    std::string task = "sentiment";  // sentiment | topic | external
    std::string external_data;       // path prefix for task == "external"
    std::size_t train_size = 240;    // generated training sentences
    std::string model_size = "small";  // small | base
    std::size_t max_len = 16;
    std::uint64_t seed = 1;

    TrainOptions encoder;            // encoder fine-tuning
    AuxTrainOptions aux;             // layer-wise auxiliary heads
    GatingOptions gating;            // per-input gating optimization
    std::size_t attack_quota = 40;   // adversarial examples per attack type
    std::size_t attack_budget = 0;   // 0 = per-sample default
    DetectorTrainOptions detector;   // AdvNet training

    std::filesystem::path out_dir = "out";

    void validate() const;
    std::string to_json(bool include_out_dir = true) const;
    static PipelineConfig from_json(const std::string& text);

    // FNV-1a over the canonical (key-sorted, output-directory-free) JSON form.
    std::uint64_t config_hash() const;
    std::string config_hash_hex() const;
};

// Artifact names under the output directory. Commands refuse to run against a
// directory whose manifest records a different config hash.
namespace artifact {
inline constexpr const char* kConfig = "config.json";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kDataMeta = "data/meta.json";
inline constexpr const char* kTrainSet = "data/train.jsonl";
inline constexpr const char* kValSet = "data/val.jsonl";
inline constexpr const char* kTestSet = "data/test.jsonl";
inline constexpr const char* kVocab = "data/vocab.txt";
inline constexpr const char* kLexicon = "data/lexicon.jsonl";
inline constexpr const char* kEncoder = "encoder.ckpt";
inline constexpr const char* kEncoderMetrics = "encoder_metrics.json";
inline constexpr const char* kAux = "aux.ckpt";
inline constexpr const char* kAuxMetrics = "aux_metrics.json";
inline constexpr const char* kBenchmark = "benchmark.jsonl";
inline constexpr const char* kMasks = "masks.jsonl";
inline constexpr const char* kFeatures = "features.jsonl";
inline constexpr const char* kDetector = "detector.ckpt";
inline constexpr const char* kDetectorMetrics = "detector_metrics.json";
inline constexpr const char* kDetection = "detection.json";
inline constexpr const char* kDetectionSummary = "detection.txt";
inline constexpr const char* kAblations = "ablations.json";
inline constexpr const char* kSweep = "sweep.json";
inline constexpr const char* kTransfer = "transfer.json";
inline constexpr const char* kCompareSize = "compare_size.json";
inline constexpr const char* kMaskPca = "analysis/mask_pca.csv";
inline constexpr const char* kGateTrajectories = "analysis/gate_trajectories.csv";
inline constexpr const char* kActiveFractions = "analysis/active_fraction_histogram.csv";
inline constexpr const char* kConfidenceCdf = "analysis/confidence_cdf.csv";
inline constexpr const char* kRefereeingQuartiles = "analysis/refereeing_quartiles.csv";
inline constexpr const char* kAnalysis = "analysis/analysis.json";
inline constexpr const char* kResults = "results.json";
}  // namespace artifact

// Two-component principal-component analysis (cyclic Jacobi on the sample
// covariance). Component signs are fixed so the largest-magnitude coordinate
// is positive.
struct Pca2 {
    std::vector<double> mean;
    std::vector<double> pc1, pc2;
    double var1 = 0.0, var2 = 0.0;        // eigenvalues
    double total_variance = 0.0;           // covariance trace

    static Pca2 fit(const std::vector<std::vector<double>>& rows);
    std::pair<double, double> project(const std::vector<double>& row) const;
};

// Deterministic attack-type subset for the transfer protocol: shuffles the
// sorted type list with a seed-derived stream and keeps round(fraction * T)
// of them, at least one.
std::vector<std::string> select_transfer_types(std::vector<std::string> types, double fraction,
                                               std::uint64_t seed);

// --- CLI ----------------------------------------------------------------------

const std::vector<std::string>& all_commands();
std::string cli_help();

struct CliInvocation {
    std::string command;
    PipelineConfig config;
};

// Grammar: <command> [--config FILE] [--key value ...] where every --key names
// a config field (nested fields via dots, e.g. --detector.cutmix.ratio 0.5).
// IASDET_OUT, when set, provides the default output directory.
CliInvocation parse_cli(const std::vector<std::string>& args);

// Executes one pipeline command, writing artifacts into config.out_dir and
// printing a one-line summary.
void run_command(const std::string& command, const PipelineConfig& config);

// parse + dispatch + error reporting; returns the process exit status.
int run_cli(const std::vector<std::string>& args);

}  // namespace iasdet
