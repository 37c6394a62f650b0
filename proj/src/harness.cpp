#include "iasdet/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "iasdet/attacks.hpp"
#include "iasdet/features.hpp"
#include "iasdet/synthetic.hpp"

namespace iasdet {

using nlohmann::json;

// --- config -------------------------------------------------------------------

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& scope) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* key : allowed) {
            if (item.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) fail("config: unknown key '", scope, item.key(), "'");
    }
}

}  // namespace

void PipelineConfig::validate() const {
    if (task != "sentiment" && task != "topic" && task != "external") {
        fail("config: task '", task, "' (expected sentiment, topic, or external)");
    }
    if (task == "external" && external_data.empty()) {
        fail("config: task external requires external_data (a dataset path prefix)");
    }
    if (task != "external" && train_size < 100) {
        fail("config: train_size ", train_size, " below the synthetic-generator minimum of 100");
    }
    if (model_size != "small" && model_size != "base") {
        fail("config: model_size '", model_size, "' (expected small or base)");
    }
    if (max_len < 4) fail("config: max_len ", max_len, " too small");
    if (attack_quota == 0) fail("config: attack_quota must be positive");
    if (gating.eta == 0) fail("config: gating.eta must be positive");
    if (!(gating.beta > 0.0 && gating.beta <= 1.0)) {
        fail("config: gating.beta ", gating.beta, " outside (0, 1]");
    }
    if (detector.cutmix.sources < 2) fail("config: detector.cutmix.sources must be >= 2");
    if (detector.cutmix.ratio < 0.0) fail("config: detector.cutmix.ratio must be >= 0");
    if (out_dir.empty()) fail("config: out_dir must not be empty");
}

std::string PipelineConfig::to_json(bool include_out_dir) const {
    json j{
        {"task", task},
        {"external_data", external_data},
        {"train_size", train_size},
        {"model_size", model_size},
        {"max_len", max_len},
        {"seed", seed},
        {"encoder",
         {{"learning_rate", encoder.learning_rate},
          {"batch_size", encoder.batch_size},
          {"max_epochs", encoder.max_epochs},
          {"patience", encoder.patience},
          {"min_delta", encoder.min_delta},
          {"dropout", encoder.dropout}}},
        {"aux",
         {{"learning_rate", aux.learning_rate},
          {"batch_size", aux.batch_size},
          {"max_epochs", aux.max_epochs},
          {"patience", aux.patience},
          {"min_delta", aux.min_delta}}},
        {"gating",
         {{"alpha", gating.alpha},
          {"eta", gating.eta},
          {"learning_rate", gating.learning_rate},
          {"beta", gating.beta}}},
        {"attack", {{"quota", attack_quota}, {"budget", attack_budget}}},
        {"detector",
         {{"learning_rate", detector.learning_rate},
          {"batch_size", detector.batch_size},
          {"max_epochs", detector.max_epochs},
          {"patience", detector.patience},
          {"min_delta", detector.min_delta},
          {"dropout", detector.dropout},
          {"cutmix", {{"sources", detector.cutmix.sources}, {"ratio", detector.cutmix.ratio}}}}},
    };
    if (include_out_dir) j["out_dir"] = out_dir.string();
    return j.dump();
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail("config: invalid json");
    PipelineConfig c;
    try {
        check_keys(j,
                   {"task", "external_data", "train_size", "model_size", "max_len", "seed",
                    "encoder", "aux", "gating", "attack", "detector", "out_dir"},
                   "");
        c.task = j.value("task", c.task);
        c.external_data = j.value("external_data", c.external_data);
        c.train_size = j.value("train_size", c.train_size);
        c.model_size = j.value("model_size", c.model_size);
        c.max_len = j.value("max_len", c.max_len);
        c.seed = j.value("seed", c.seed);
        if (j.contains("encoder")) {
            const json& e = j.at("encoder");
            check_keys(e,
                       {"learning_rate", "batch_size", "max_epochs", "patience", "min_delta",
                        "dropout"},
                       "encoder.");
            c.encoder.learning_rate = e.value("learning_rate", c.encoder.learning_rate);
            c.encoder.batch_size = e.value("batch_size", c.encoder.batch_size);
            c.encoder.max_epochs = e.value("max_epochs", c.encoder.max_epochs);
            c.encoder.patience = e.value("patience", c.encoder.patience);
            c.encoder.min_delta = e.value("min_delta", c.encoder.min_delta);
            c.encoder.dropout = e.value("dropout", c.encoder.dropout);
        }
        if (j.contains("aux")) {
            const json& a = j.at("aux");
            check_keys(a, {"learning_rate", "batch_size", "max_epochs", "patience", "min_delta"},
                       "aux.");
            c.aux.learning_rate = a.value("learning_rate", c.aux.learning_rate);
            c.aux.batch_size = a.value("batch_size", c.aux.batch_size);
            c.aux.max_epochs = a.value("max_epochs", c.aux.max_epochs);
            c.aux.patience = a.value("patience", c.aux.patience);
            c.aux.min_delta = a.value("min_delta", c.aux.min_delta);
        }
        if (j.contains("gating")) {
            const json& g = j.at("gating");
            check_keys(g, {"alpha", "eta", "learning_rate", "beta"}, "gating.");
            c.gating.alpha = g.value("alpha", c.gating.alpha);
            c.gating.eta = g.value("eta", c.gating.eta);
            c.gating.learning_rate = g.value("learning_rate", c.gating.learning_rate);
            c.gating.beta = g.value("beta", c.gating.beta);
        }
        if (j.contains("attack")) {
            const json& a = j.at("attack");
            check_keys(a, {"quota", "budget"}, "attack.");
            c.attack_quota = a.value("quota", c.attack_quota);
            c.attack_budget = a.value("budget", c.attack_budget);
        }
        if (j.contains("detector")) {
            const json& d = j.at("detector");
            check_keys(d,
                       {"learning_rate", "batch_size", "max_epochs", "patience", "min_delta",
                        "dropout", "cutmix"},
                       "detector.");
            c.detector.learning_rate = d.value("learning_rate", c.detector.learning_rate);
            c.detector.batch_size = d.value("batch_size", c.detector.batch_size);
            c.detector.max_epochs = d.value("max_epochs", c.detector.max_epochs);
            c.detector.patience = d.value("patience", c.detector.patience);
            c.detector.min_delta = d.value("min_delta", c.detector.min_delta);
            c.detector.dropout = d.value("dropout", c.detector.dropout);
            if (d.contains("cutmix")) {
                const json& cm = d.at("cutmix");
                check_keys(cm, {"sources", "ratio"}, "detector.cutmix.");
                c.detector.cutmix.sources = cm.value("sources", c.detector.cutmix.sources);
                c.detector.cutmix.ratio = cm.value("ratio", c.detector.cutmix.ratio);
            }
        }
        if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    } catch (const json::exception& e) {
        fail("config: ", e.what());
    }
    c.validate();
    return c;
}

std::uint64_t PipelineConfig::config_hash() const {
    const std::string canonical = to_json(false);
    return fnv1a(canonical.data(), canonical.size());
}

std::string PipelineConfig::config_hash_hex() const {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << config_hash();
    return os.str();
}

// --- workspace ------------------------------------------------------------------

namespace {

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open ", path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    json j = json::parse(buffer.str(), nullptr, false);
    if (j.is_discarded()) fail("invalid json in ", path.string());
    return j;
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) fail("cannot open ", path.string(), " for writing");
    out << j.dump(2) << "\n";
    if (!out) fail("write to ", path.string(), " failed");
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string fmt_fixed(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

// Comment line with the config hash, then a header row, then data rows.
class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& path, const std::string& hash,
              const std::vector<std::string>& header)
        : path_(path), out_(path) {
        if (!out_) fail("cannot open ", path.string(), " for writing");
        out_ << "# config_hash=" << hash << "\n";
        row(header);
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ",";
            out_ << cells[i];
        }
        out_ << "\n";
    }

    void close() {
        out_.flush();
        if (!out_) fail("write to ", path_.string(), " failed");
    }

  private:
    std::filesystem::path path_;
    std::ofstream out_;
};

// An output directory bound to one config hash. Artifacts from a different
// config are never mixed: opening the workspace fails if the manifest records
// another hash.
struct Workspace {
    PipelineConfig config;
    std::filesystem::path root;
    std::string hash;
    json manifest;

    static Workspace open(const PipelineConfig& config) {
        Workspace ws;
        ws.config = config;
        ws.root = config.out_dir;
        ws.hash = config.config_hash_hex();
        std::filesystem::create_directories(ws.root / "data");
        std::filesystem::create_directories(ws.root / "analysis");
        const auto manifest_path = ws.root / artifact::kManifest;
        if (std::filesystem::exists(manifest_path)) {
            ws.manifest = read_json_file(manifest_path);
            const std::string existing = ws.manifest.value("config_hash", "");
            if (existing != ws.hash) {
                fail("output directory ", ws.root.string(), " holds artifacts for config hash ",
                     existing, " but the current config hashes to ", ws.hash,
                     "; use a fresh out_dir or the matching config");
            }
        } else {
            ws.manifest = json{{"config_hash", ws.hash}, {"artifacts", json::object()}};
            write_json_file(manifest_path, ws.manifest);
        }
        write_json_file(ws.root / artifact::kConfig,
                        json::parse(config.to_json(true)));
        return ws;
    }

    std::filesystem::path path(const char* name) const { return root / name; }

    void record(const char* name, const std::string& command) {
        manifest["artifacts"][name] = command;
        write_json_file(root / artifact::kManifest, manifest);
    }

    void require(const char* name, const char* producer) const {
        if (!std::filesystem::exists(root / name)) {
            fail("missing artifact '", name, "' in ", root.string(), "; run `iasdet ", producer,
                 "` first");
        }
    }

    // Top-level JSON artifacts embed the hash; a mismatch means the file was
    // produced by a different configuration.
    json read_versioned(const char* name) const {
        json j = read_json_file(root / name);
        const std::string embedded = j.value("config_hash", "");
        if (embedded != hash) {
            fail("artifact '", name, "' carries config hash ", embedded,
                 " but this run is ", hash, "; regenerate it");
        }
        return j;
    }
};

const char* split_name(int split) {
    switch (split) {
        case 0: return "train";
        case 1: return "val";
        case 2: return "test";
    }
    fail("unknown split id ", split);
}

// --- shared loading ---------------------------------------------------------------

struct DataBundle {
    std::vector<LabeledSample> train, val, test;
    Vocab vocab;
    Lexicon lexicon;
    int num_classes = 2;
};

DataBundle load_data(const Workspace& ws) {
    ws.require(artifact::kTrainSet, "gen-data");
    ws.require(artifact::kValSet, "gen-data");
    ws.require(artifact::kTestSet, "gen-data");
    ws.require(artifact::kVocab, "gen-data");
    ws.require(artifact::kLexicon, "gen-data");
    ws.require(artifact::kDataMeta, "gen-data");
    DataBundle d;
    d.train = load_samples(ws.path(artifact::kTrainSet));
    d.val = load_samples(ws.path(artifact::kValSet));
    d.test = load_samples(ws.path(artifact::kTestSet));
    d.vocab = load_vocab(ws.path(artifact::kVocab));
    d.lexicon = load_lexicon(ws.path(artifact::kLexicon));
    d.num_classes = ws.read_versioned(artifact::kDataMeta).at("num_classes").get<int>();
    return d;
}

EncoderParams load_encoder(const Workspace& ws) {
    ws.require(artifact::kEncoder, "train-encoder");
    return EncoderParams::from_checkpoint(load_checkpoint(ws.path(artifact::kEncoder)));
}

AuxHeads load_aux(const Workspace& ws) {
    ws.require(artifact::kAux, "train-aux");
    return AuxHeads::from_checkpoint(load_checkpoint(ws.path(artifact::kAux)));
}

AdvNetParams load_detector(const Workspace& ws) {
    ws.require(artifact::kDetector, "train-detector");
    return AdvNetParams::from_checkpoint(load_checkpoint(ws.path(artifact::kDetector)));
}

struct FeatureBundle {
    std::vector<FeatureRecord> records;
    std::map<std::string, std::vector<double>> binary_masks;  // sample_id -> g_b
    std::size_t n = 0, m = 0;
};

FeatureBundle load_feature_bundle(const Workspace& ws) {
    ws.require(artifact::kFeatures, "extract-features");
    ws.require(artifact::kMasks, "extract-features");
    ws.require(artifact::kEncoderMetrics, "train-encoder");
    FeatureBundle fb;
    fb.records = load_feature_cache(ws.path(artifact::kFeatures));
    for (const MaskRecord& r : load_mask_cache(ws.path(artifact::kMasks))) {
        fb.binary_masks[r.sample_id] = r.g_b;
    }
    const json metrics = ws.read_versioned(artifact::kEncoderMetrics);
    fb.n = metrics.at("model").at("n").get<std::size_t>();
    fb.m = metrics.at("model").at("m").get<std::size_t>();
    return fb;
}

struct DetectorData {
    std::vector<DetectorSample> train, val, test;
};

DetectorData make_detector_data(const FeatureBundle& fb, FeatureView view) {
    DetectorData dd;
    static const std::vector<double> kNoMask;
    for (const FeatureRecord& r : fb.records) {
        const std::vector<double>* g_b = &kNoMask;
        if (view == FeatureView::bin_full) {
            auto it = fb.binary_masks.find(r.sample_id);
            if (it == fb.binary_masks.end()) {
                fail("feature cache sample '", r.sample_id, "' has no mask record");
            }
            g_b = &it->second;
        }
        std::vector<double> projected = project_features(r.assembled, *g_b, view, fb.n, fb.m);
        // The detector's two k=3 convolutions need at least 5 inputs; the
        // flip-only view has 4. Zero-pad — constants add no information.
        while (projected.size() < 5) projected.push_back(0.0);
        DetectorSample s{std::move(projected), r.label, r.attack_type};
        if (r.split == "train") {
            dd.train.push_back(std::move(s));
        } else if (r.split == "val") {
            dd.val.push_back(std::move(s));
        } else {
            dd.test.push_back(std::move(s));
        }
    }
    return dd;
}

struct DetectorRun {
    double accuracy = 0.0, precision = 0.0, recall = 0.0;
};

DetectorRun run_detector(const std::vector<DetectorSample>& train,
                         const std::vector<DetectorSample>& val,
                         const std::vector<DetectorSample>& test,
                         const DetectorTrainOptions& options, std::uint64_t seed) {
    AdvNetParams det = train_advnet(train, val, options, seed);
    DetectionReport rep = evaluate_detector(det, test);
    return {rep.accuracy, rep.precision, rep.recall};
}

// Offsets into the assembled feature layout.
struct FeatureLayout {
    std::size_t n, m;
    std::size_t mask_len() const { return n * m; }
    std::size_t flip_equal() const { return n * m + 3; }    // 1 when flip kept the target
    std::size_t lw_match() const { return n * m + 4 + (n - 1); }
};

}  // namespace

// --- analysis helpers -------------------------------------------------------------

namespace {

// Cyclic Jacobi eigensolver for a small symmetric matrix. Returns eigenvalues
// (descending) and matching unit eigenvectors.
void jacobi_eigen(std::vector<std::vector<double>> a, std::vector<double>& values,
                  std::vector<std::vector<double>>& vectors) {
    const std::size_t d = a.size();
    std::vector<std::vector<double>> v(d, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < d; ++i) v[i][i] = 1.0;

    double scale = 0.0;
    for (std::size_t i = 0; i < d; ++i) scale += a[i][i] * a[i][i];
    scale = std::max(scale, 1e-30);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) off += a[p][q] * a[p][q];
        }
        if (off < 1e-24 * scale) break;
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                if (a[p][q] == 0.0) continue;
                const double theta = 0.5 * std::atan2(2.0 * a[p][q], a[q][q] - a[p][p]);
                const double c = std::cos(theta), s = std::sin(theta);
                for (std::size_t k = 0; k < d; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });
    values.resize(d);
    vectors.assign(d, std::vector<double>(d, 0.0));
    for (std::size_t r = 0; r < d; ++r) {
        values[r] = a[order[r]][order[r]];
        for (std::size_t k = 0; k < d; ++k) vectors[r][k] = v[k][order[r]];
    }
}

void fix_sign(std::vector<double>& component) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < component.size(); ++i) {
        if (std::abs(component[i]) > std::abs(component[arg])) arg = i;
    }
    if (component[arg] < 0.0) {
        for (double& x : component) x = -x;
    }
}

}  // namespace

Pca2 Pca2::fit(const std::vector<std::vector<double>>& rows) {
    if (rows.size() < 2) fail("pca: need at least two rows");
    const std::size_t d = rows.front().size();
    if (d < 2) fail("pca: need at least two dimensions");
    for (const auto& r : rows) {
        if (r.size() != d) fail("pca: inconsistent row lengths");
    }

    Pca2 p;
    p.mean.assign(d, 0.0);
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < d; ++i) p.mean[i] += r[i];
    }
    for (double& x : p.mean) x /= static_cast<double>(rows.size());

    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < d; ++i) {
            const double di = r[i] - p.mean[i];
            for (std::size_t j = i; j < d; ++j) {
                cov[i][j] += di * (r[j] - p.mean[j]);
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(rows.size() - 1);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i; j < d; ++j) {
            cov[i][j] *= inv;
            cov[j][i] = cov[i][j];
        }
        p.total_variance += cov[i][i];
    }

    std::vector<double> values;
    std::vector<std::vector<double>> vectors;
    jacobi_eigen(cov, values, vectors);
    p.var1 = values[0];
    p.var2 = values[1];
    p.pc1 = vectors[0];
    p.pc2 = vectors[1];
    fix_sign(p.pc1);
    fix_sign(p.pc2);
    return p;
}

std::pair<double, double> Pca2::project(const std::vector<double>& row) const {
    if (row.size() != mean.size()) fail("pca: row of ", row.size(), " != ", mean.size());
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
        const double centered = row[i] - mean[i];
        a += centered * pc1[i];
        b += centered * pc2[i];
    }
    return {a, b};
}

std::vector<std::string> select_transfer_types(std::vector<std::string> types, double fraction,
                                               std::uint64_t seed) {
    if (types.empty()) fail("transfer: no attack types to select from");
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        fail("transfer: fraction ", fraction, " outside (0, 1]");
    }
    std::sort(types.begin(), types.end());
    types.erase(std::unique(types.begin(), types.end()), types.end());
    Rng rng(mix_seed(seed, "transfer.types"));
    rng.shuffle(types);
    const auto keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(fraction * static_cast<double>(types.size()))));
    types.resize(std::min(keep, types.size()));
    std::sort(types.begin(), types.end());
    return types;
}

// --- commands ---------------------------------------------------------------------

namespace {

void cmd_gen_data(const PipelineConfig& config) {
    Workspace ws = Workspace::open(config);
    std::vector<LabeledSample> train, val, test;
    std::vector<LexiconEntry> lexicon;
    std::string task_label = config.task;

    if (config.task == "external") {
        auto load_part = [&](const char* part) {
            const std::filesystem::path path = config.external_data + "." + part + ".jsonl";
            if (!std::filesystem::exists(path)) {
                fail("external dataset: missing ", path.string(),
                     " (expected <prefix>.{train,val,test}.jsonl)");
            }
            auto samples = load_samples(path);
            if (samples.empty()) fail("external dataset: ", path.string(), " is empty");
            return samples;
        };
        train = load_part("train");
        val = load_part("val");
        test = load_part("test");
        const std::filesystem::path lex = config.external_data + ".lexicon.jsonl";
        if (std::filesystem::exists(lex)) lexicon = load_lexicon_entries(lex);
    } else {
        SyntheticTask t = gen_synthetic(parse_task_kind(config.task), config.train_size,
                                        mix_seed(config.seed, "data"));
        train = std::move(t.train);
        val = std::move(t.val);
        test = std::move(t.test);
        lexicon = std::move(t.lexicon_entries);
    }

    int max_label = 0;
    for (const auto* split : {&train, &val, &test}) {
        for (const LabeledSample& s : *split) {
            if (s.label < 0) fail("dataset: negative label ", s.label);
            max_label = std::max(max_label, s.label);
        }
    }
    const int num_classes = max_label + 1;
    if (num_classes < 2) fail("dataset: found a single class; need at least two");

    std::vector<LabeledSample> corpus = train;
    corpus.insert(corpus.end(), val.begin(), val.end());
    corpus.insert(corpus.end(), test.begin(), test.end());
    const Vocab vocab = Vocab::build(corpus);

    save_samples(ws.path(artifact::kTrainSet), train);
    save_samples(ws.path(artifact::kValSet), val);
    save_samples(ws.path(artifact::kTestSet), test);
    save_vocab(ws.path(artifact::kVocab), vocab);
    save_lexicon(ws.path(artifact::kLexicon), lexicon);
    write_json_file(ws.path(artifact::kDataMeta),
                    json{{"config_hash", ws.hash},
                         {"task", task_label},
                         {"num_classes", num_classes},
                         {"train", train.size()},
                         {"val", val.size()},
                         {"test", test.size()},
                         {"vocab_size", vocab.size()},
                         {"lexicon_entries", lexicon.size()}});
    for (const char* name : {artifact::kTrainSet, artifact::kValSet, artifact::kTestSet,
                             artifact::kVocab, artifact::kLexicon, artifact::kDataMeta}) {
        ws.record(name, "gen-data");
    }
    std::cout << "gen-data: " << task_label << " task, " << train.size() << "/" << val.size()
              << "/" << test.size() << " train/val/test, " << num_classes << " classes, vocab "
              << vocab.size() << ", lexicon " << lexicon.size() << " entries -> "
              << ws.root.string() << "\n";
}

void cmd_train_encoder(const PipelineConfig& config) {
    Workspace ws = Workspace::open(config);
    DataBundle data = load_data(ws);
    const ModelConfig mc = ModelConfig::preset(config.model_size, data.vocab.size(),
                                               data.num_classes, config.max_len);
    Rng init_rng(mix_seed(config.seed, "encoder.init"));
    EncoderParams params = EncoderParams::init(mc, init_rng);
    const TrainMetrics tm =
        fine_tune(params, data.vocab, data.train, data.val, config.seed, config.encoder);
    const SplitMetrics test_metrics = evaluate_split(params, data.vocab, data.test);

    Checkpoint ckpt = params.to_checkpoint();
    ckpt.metadata["config_hash"] = ws.hash;
    save_checkpoint(ws.path(artifact::kEncoder), ckpt);
    write_json_file(
        ws.path(artifact::kEncoderMetrics),
        json{{"config_hash", ws.hash},
             {"epochs_run", tm.epochs_run},
             {"train", {{"loss", tm.train.loss}, {"accuracy", tm.train.accuracy}}},
             {"val", {{"loss", tm.val.loss}, {"accuracy", tm.val.accuracy}}},
             {"test", {{"loss", test_metrics.loss}, {"accuracy", test_metrics.accuracy}}},
             {"model",
              {{"n", mc.n},
               {"m", mc.m},
               {"d_model", mc.d_model},
               {"d_ff", mc.d_ff},
               {"vocab_size", mc.vocab_size},
               {"max_len", mc.max_len},
               {"num_classes", mc.num_classes},
               {"size_tag", mc.size_tag}}}});
    ws.record(artifact::kEncoder, "train-encoder");
    ws.record(artifact::kEncoderMetrics, "train-encoder");
    std::cout << "train-encoder: " << config.model_size << " preset, " << tm.epochs_run
              << " epochs, val acc " << fmt_fixed(tm.val.accuracy) << ", test acc "
              << fmt_fixed(test_metrics.accuracy) << "\n";
}

void cmd_train_aux(const PipelineConfig& config) {
    Workspace ws = Workspace::open(config);
    DataBundle data = load_data(ws);
    EncoderParams params = load_encoder(ws);
    AuxHeads aux = train_aux_heads(params, data.vocab, data.train, data.val, config.seed,
                                   ones_gates(params.config), config.aux);
    const std::vector<double> val_acc = aux_head_accuracies(params, aux, data.vocab, data.val);
    const std::vector<double> test_acc = aux_head_accuracies(params, aux, data.vocab, data.test);

    Checkpoint ckpt = aux.to_checkpoint();
    ckpt.metadata["config_hash"] = ws.hash;
    save_checkpoint(ws.path(artifact::kAux), ckpt);
    write_json_file(ws.path(artifact::kAuxMetrics),
                    json{{"config_hash", ws.hash},
                         {"heads", aux.count()},
                         {"val_accuracy", val_acc},
                         {"test_accuracy", test_acc}});
    ws.record(artifact::kAux, "train-aux");
    ws.record(artifact::kAuxMetrics, "train-aux");
    std::ostringstream accs;
    for (std::size_t i = 0; i < test_acc.size(); ++i) {
        accs << (i ? " " : "") << fmt_fixed(test_acc[i], 3);
    }
    std::cout << "train-aux: " << aux.count() << " heads, test acc per layer [" << accs.str()
              << "]\n";
}

void cmd_attack(const PipelineConfig& config) {
    Workspace ws = Workspace::open(config);
    DataBundle data = load_data(ws);
    EncoderParams params = load_encoder(ws);
    EncoderVictim victim(params, data.vocab);
    BenchmarkOptions options{config.attack_quota, config.attack_budget,
                             mix_seed(config.seed, "attack")};
    Benchmark bench = build_benchmark(data.test, victim, data.lexicon, options);
    save_benchmark(ws.path(artifact::kBenchmark), bench);
    ws.record(artifact::kBenchmark, "attack");

    std::size_t adversarial = 0;
    for (const BenchmarkEntry& e : bench.entries) adversarial += e.adversarial ? 1 : 0;
    std::cout << "attack: " << bench.entries.size() << " benchmark entries ("
              << bench.entries.size() - adversarial << " authentic, " << adversarial
              << " adversarial), " << bench.warnings.size() << " warnings\n";
    for (const std::string& w : bench.warnings) std::cout << "  warning: " << w << "\n";
}

void cmd_extract_features(const PipelineConfig& config) {
    Workspace ws = Workspace::open(config);
    DataBundle data = load_data(ws);
    EncoderParams params = load_encoder(ws);
    AuxHeads aux = load_aux(ws);
    ws.require(artifact::kBenchmark, "attack");
    Benchmark bench = load_benchmark(ws.path(artifact::kBenchmark));

    std::vector<FeatureRecord> records;
    std::vector<MaskRecord> masks;
    records.reserve(bench.entries.size());
    masks.reserve(bench.entries.size());
    double active_sum = 0.0;
    std::size_t flagged = 0;
    for (const BenchmarkEntry& entry : bench.entries) {
        const auto ids = encode(data.vocab, entry.text, config.max_len);
        const GatingState state = compute_ias(params, ids, entry.target_class, config.gating);
        const FeatureVector fv = assemble_features(params, aux, ids, state);
        const std::string sample_id = std::to_string(entry.id);
        records.push_back(FeatureRecord{sample_id, entry.attack_type, split_name(entry.split),
                                        fv.assembled, entry.adversarial ? 1.0 : 0.0, fv.flagged,
                                        fv.flip_target_prob});
        masks.push_back(MaskRecord{sample_id, state.p, state.g_b, state.beta_used, state.flagged,
                                   state.target_class});
        active_sum += std::accumulate(state.g_b.begin(), state.g_b.end(), 0.0) /
                      static_cast<double>(state.g_b.size());
        flagged += state.flagged ? 1 : 0;
    }
    save_feature_cache(ws.path(artifact::kFeatures), records);
    save_mask_cache(ws.path(artifact::kMasks), masks);
    ws.record(artifact::kFeatures, "extract-features");
    ws.record(artifact::kMasks, "extract-features");
    std::cout << "extract-features: " << records.size() << " feature vectors, mean active "
              << fmt_fixed(active_sum / static_cast<double>(records.size()), 3) << ", "
              << flagged << " flagged\n";
}

void cmd_train_detector(const PipelineConfig& config) {
    Workspace ws = Workspace::open(config);
    FeatureBundle fb = load_feature_bundle(ws);
    DetectorData dd = make_detector_data(fb, FeatureView::full);
    DetectorTrainMetrics metrics;
    AdvNetParams det = train_advnet(dd.train, dd.val, config.detector,
                                    mix_seed(config.seed, "detector"), &metrics);

    Checkpoint ckpt = det.to_checkpoint();
    ckpt.metadata["config_hash"] = ws.hash;
    save_checkpoint(ws.path(artifact::kDetector), ckpt);
    write_json_file(ws.path(artifact::kDetectorMetrics),
                    json{{"config_hash", ws.hash},
                         {"epochs_run", metrics.epochs_run},
                         {"best_epoch", metrics.best_epoch},
                         {"best_val_loss", metrics.best_val_loss},
                         {"train_loss", metrics.train_loss},
                         {"val_loss", metrics.val_loss},
                         {"train_samples", dd.train.size()},
                         {"val_samples", dd.val.size()}});
    ws.record(artifact::kDetector, "train-detector");
    ws.record(artifact::kDetectorMetrics, "train-detector");
    std::cout << "train-detector: " << dd.train.size() << " train vectors, best epoch "
              << metrics.best_epoch << "/" << metrics.epochs_run << ", best val loss "
              << fmt_fixed(metrics.best_val_loss) << "\n";
}

void cmd_evaluate(const PipelineConfig& config) {
    Workspace ws = Workspace::open(config);
    FeatureBundle fb = load_feature_bundle(ws);
    AdvNetParams det = load_detector(ws);
    DetectorData dd = make_detector_data(fb, FeatureView::full);
    if (dd.test.empty()) fail("evaluate: the feature cache has no test split");
    DetectionReport report = evaluate_detector(det, dd.test);
    save_detection_report(ws.path(artifact::kDetection), report);

    std::ofstream txt(ws.path(artifact::kDetectionSummary));
    if (!txt) fail("cannot open ", ws.path(artifact::kDetectionSummary).string());
    txt << "detection accuracy " << fmt_fixed(report.accuracy) << "  precision "
        << fmt_fixed(report.precision) << "  recall " << fmt_fixed(report.recall) << "\n";
    txt << "total " << report.total << "  tp " << report.true_positive << "  fp "
        << report.false_positive << "  tn " << report.true_negative << "  fn "
        << report.false_negative << "\n\n";
    txt << std::left << std::setw(24) << "type" << std::right << std::setw(6) << "n"
        << std::setw(10) << "accuracy" << "\n";
    for (const auto& [type, count] : report.per_type_count) {
        txt << std::left << std::setw(24) << type << std::right << std::setw(6) << count
            << std::setw(10) << fmt_fixed(report.per_type_accuracy.at(type), 3) << "\n";
    }
    txt.flush();
    if (!txt) fail("write to ", ws.path(artifact::kDetectionSummary).string(), " failed");

    ws.record(artifact::kDetection, "evaluate");
    ws.record(artifact::kDetectionSummary, "evaluate");
    std::cout << "evaluate: test accuracy " << fmt_fixed(report.accuracy) << ", precision "
              << fmt_fixed(report.precision) << ", recall " << fmt_fixed(report.recall) << " ("
              << report.total << " samples)\n";
}

void cmd_ablate(const PipelineConfig& config) {
    Workspace ws = Workspace::open(config);
    FeatureBundle fb = load_feature_bundle(ws);
    constexpr std::size_t kSeeds = 3;
    const std::vector<FeatureView> views{FeatureView::full, FeatureView::mask_only,
                                         FeatureView::flip_only, FeatureView::lw_only,
                                         FeatureView::bin_full};
    const double mix_ratio =
        config.detector.cutmix.ratio > 0.0 ? config.detector.cutmix.ratio : 1.0;

    json runs = json::array();
    std::map<std::string, double> mean_accuracy;
    for (FeatureView view : views) {
        DetectorData dd = make_detector_data(fb, view);
        for (bool with_cutmix : {true, false}) {
            DetectorTrainOptions options = config.detector;
            options.cutmix.ratio = with_cutmix ? mix_ratio : 0.0;
            double acc_sum = 0.0;
            for (std::size_t s = 0; s < kSeeds; ++s) {
                const std::string tag = std::string(feature_view_name(view)) +
                                        (with_cutmix ? "+cutmix" : "-cutmix") + ":" +
                                        std::to_string(s);
                const DetectorRun run = run_detector(dd.train, dd.val, dd.test, options,
                                                     mix_seed(config.seed, "ablate." + tag));
                runs.push_back(json{{"view", feature_view_name(view)},
                                    {"cutmix", with_cutmix},
                                    {"seed_index", s},
                                    {"accuracy", run.accuracy},
                                    {"precision", run.precision},
                                    {"recall", run.recall}});
                acc_sum += run.accuracy;
            }
            const std::string key = std::string(feature_view_name(view)) +
                                    (with_cutmix ? "+cutmix" : "-cutmix");
            mean_accuracy[key] = acc_sum / static_cast<double>(kSeeds);
        }
    }
    write_json_file(ws.path(artifact::kAblations), json{{"config_hash", ws.hash},
                                                        {"seeds", kSeeds},
                                                        {"runs", runs},
                                                        {"mean_accuracy", mean_accuracy}});
    ws.record(artifact::kAblations, "ablate-features");
    std::cout << "ablate-features: mean acc full " << fmt_fixed(mean_accuracy["full+cutmix"], 3)
              << ", mask " << fmt_fixed(mean_accuracy["mask+cutmix"], 3) << ", flip "
              << fmt_fixed(mean_accuracy["flip+cutmix"], 3) << ", lw "
              << fmt_fixed(mean_accuracy["lw+cutmix"], 3) << ", bin "
              << fmt_fixed(mean_accuracy["bin+cutmix"], 3) << " (w/ cutmix, " << kSeeds
              << " seeds)\n";
}

void cmd_sweep(const PipelineConfig& config) {
    Workspace ws = Workspace::open(config);
    FeatureBundle fb = load_feature_bundle(ws);
    DetectorData dd = make_detector_data(fb, FeatureView::full);
    if (dd.train.empty()) fail("sweep-train-size: empty training split in the feature cache");

    std::vector<std::size_t> order(dd.train.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(config.seed, "sweep.subset"));
    rng.shuffle(order);

    json rows = json::array();
    for (double fraction : {0.2, 0.4, 0.6, 0.8, 1.0}) {
        const auto count = std::max<std::size_t>(
            1, static_cast<std::size_t>(
                   std::llround(fraction * static_cast<double>(dd.train.size()))));
        std::vector<DetectorSample> subset;
        subset.reserve(count);
        for (std::size_t i = 0; i < count && i < order.size(); ++i) {
            subset.push_back(dd.train[order[i]]);
        }
        const DetectorRun run =
            run_detector(subset, dd.val, dd.test, config.detector,
                         mix_seed(config.seed, "sweep." + std::to_string(fraction)));
        rows.push_back(json{{"fraction", fraction},
                            {"train_count", subset.size()},
                            {"accuracy", run.accuracy}});
        std::cout << "sweep-train-size: fraction " << fmt_fixed(fraction, 1) << " ("
                  << subset.size() << " vectors) -> accuracy " << fmt_fixed(run.accuracy, 3)
                  << "\n";
    }
    write_json_file(ws.path(artifact::kSweep),
                    json{{"config_hash", ws.hash}, {"rows", rows}});
    ws.record(artifact::kSweep, "sweep-train-size");
}

void cmd_transfer(const PipelineConfig& config) {
    Workspace ws = Workspace::open(config);
    FeatureBundle fb = load_feature_bundle(ws);
    DetectorData dd = make_detector_data(fb, FeatureView::full);

    std::vector<std::string> types;
    for (const DetectorSample& s : dd.train) {
        if (s.attack_type != kAuthenticType) types.push_back(s.attack_type);
    }
    std::sort(types.begin(), types.end());
    types.erase(std::unique(types.begin(), types.end()), types.end());
    if (types.empty()) fail("transfer: no adversarial types in the training features");

    auto filter = [](const std::vector<DetectorSample>& samples, auto&& keep) {
        std::vector<DetectorSample> out;
        for (const DetectorSample& s : samples) {
            if (keep(s)) out.push_back(s);
        }
        return out;
    };

    AdvNetParams full_det = train_advnet(dd.train, dd.val, config.detector,
                                         mix_seed(config.seed, "transfer.full"));
    const DetectionReport full_report = evaluate_detector(full_det, dd.test);

    json rows = json::array();
    for (double fraction : {0.25, 0.50, 0.75}) {
        const std::vector<std::string> chosen =
            select_transfer_types(types, fraction, config.seed);
        auto is_trained_type = [&](const DetectorSample& s) {
            return s.attack_type == kAuthenticType ||
                   std::find(chosen.begin(), chosen.end(), s.attack_type) != chosen.end();
        };
        std::vector<std::string> heldout;
        for (const std::string& t : types) {
            if (std::find(chosen.begin(), chosen.end(), t) == chosen.end()) heldout.push_back(t);
        }

        const auto train_subset = filter(dd.train, is_trained_type);
        const auto val_subset = filter(dd.val, is_trained_type);
        AdvNetParams det =
            train_advnet(train_subset, val_subset, config.detector,
                         mix_seed(config.seed, "transfer." + std::to_string(fraction)));

        // Held-out evaluation set: authentic test samples plus test samples of
        // the attack types this detector never saw.
        auto is_new_types = [&](const DetectorSample& s) {
            return s.attack_type == kAuthenticType ||
                   std::find(heldout.begin(), heldout.end(), s.attack_type) != heldout.end();
        };
        const auto new_types_test = filter(dd.test, is_new_types);
        const double new_acc =
            new_types_test.empty() ? 0.0 : evaluate_detector(det, new_types_test).accuracy;
        const double baseline_new_acc =
            new_types_test.empty() ? 0.0
                                   : evaluate_detector(full_det, new_types_test).accuracy;
        const double all_acc = evaluate_detector(det, dd.test).accuracy;

        rows.push_back(json{{"fraction", fraction},
                            {"trained_types", chosen},
                            {"heldout_types", heldout},
                            {"new_types_samples", new_types_test.size()},
                            {"new_types_accuracy", new_acc},
                            {"baseline_new_types_accuracy", baseline_new_acc},
                            {"all_types_accuracy", all_acc}});
        std::cout << "transfer: " << chosen.size() << "/" << types.size()
                  << " types trained -> new-types acc " << fmt_fixed(new_acc, 3)
                  << ", all-types acc " << fmt_fixed(all_acc, 3) << "\n";
    }
    write_json_file(ws.path(artifact::kTransfer), json{{"config_hash", ws.hash},
                                                       {"full_accuracy", full_report.accuracy},
                                                       {"rows", rows}});
    ws.record(artifact::kTransfer, "transfer");
}

void run_one(const std::string& command, const PipelineConfig& config);

void cmd_compare_size(const PipelineConfig& config) {
    Workspace ws = Workspace::open(config);
    json sizes;
    for (const std::string size : {"small", "base"}) {
        PipelineConfig sub = config;
        sub.model_size = size;
        sub.out_dir = config.out_dir / "compare" / size;
        for (const char* step : {"gen-data", "train-encoder", "train-aux", "attack",
                                 "extract-features", "train-detector", "evaluate"}) {
            run_one(step, sub);
        }
        const DetectionReport report =
            load_detection_report(sub.out_dir / artifact::kDetection);
        sizes[size] = json{{"accuracy", report.accuracy},
                           {"precision", report.precision},
                           {"recall", report.recall},
                           {"total", report.total},
                           {"config_hash", sub.config_hash_hex()}};
    }
    const double gap = sizes["base"]["accuracy"].get<double>() -
                       sizes["small"]["accuracy"].get<double>();
    write_json_file(ws.path(artifact::kCompareSize), json{{"config_hash", ws.hash},
                                                          {"sizes", sizes},
                                                          {"base_minus_small", gap}});
    ws.record(artifact::kCompareSize, "compare-size");
    std::cout << "compare-size: small acc "
              << fmt_fixed(sizes["small"]["accuracy"].get<double>(), 3) << ", base acc "
              << fmt_fixed(sizes["base"]["accuracy"].get<double>(), 3) << " (gap "
              << fmt_fixed(gap, 3) << ")\n";
}

void cmd_analyze(const PipelineConfig& config) {
    Workspace ws = Workspace::open(config);
    DataBundle data = load_data(ws);
    EncoderParams params = load_encoder(ws);
    FeatureBundle fb = load_feature_bundle(ws);
    AdvNetParams det = load_detector(ws);
    ws.require(artifact::kBenchmark, "attack");
    Benchmark bench = load_benchmark(ws.path(artifact::kBenchmark));
    ws.require(artifact::kMasks, "extract-features");
    const auto mask_records = load_mask_cache(ws.path(artifact::kMasks));

    std::map<std::string, const BenchmarkEntry*> by_id;
    for (const BenchmarkEntry& e : bench.entries) by_id[std::to_string(e.id)] = &e;
    auto entry_of = [&](const std::string& sample_id) -> const BenchmarkEntry& {
        auto it = by_id.find(sample_id);
        if (it == by_id.end()) fail("analyze: sample ", sample_id, " missing from the benchmark");
        return *it->second;
    };

    const FeatureLayout layout{fb.n, fb.m};

    // Principal-component projection of the gate pre-activations.
    std::vector<std::vector<double>> mask_rows;
    mask_rows.reserve(mask_records.size());
    for (const MaskRecord& r : mask_records) mask_rows.push_back(r.p);
    const Pca2 pca = Pca2::fit(mask_rows);
    {
        CsvWriter csv(ws.path(artifact::kMaskPca), ws.hash,
                      {"sample_id", "label", "attack_type", "pc1", "pc2"});
        for (const MaskRecord& r : mask_records) {
            const BenchmarkEntry& e = entry_of(r.sample_id);
            const auto [a, b] = pca.project(r.p);
            csv.row({r.sample_id, e.adversarial ? "1" : "0", e.attack_type, fmt_double(a),
                     fmt_double(b)});
        }
        csv.close();
    }

    // Gate trajectories for a handful of representative test inputs.
    {
        CsvWriter csv(ws.path(artifact::kGateTrajectories), ws.hash,
                      {"sample_id", "adversarial", "step", "head", "gate"});
        std::size_t picked_auth = 0, picked_adv = 0;
        for (const BenchmarkEntry& e : bench.entries) {
            if (e.split != 2) continue;
            if (e.adversarial ? picked_adv >= 2 : picked_auth >= 2) continue;
            (e.adversarial ? picked_adv : picked_auth) += 1;
            const auto ids = encode(data.vocab, e.text, config.max_len);
            const GatingState state =
                optimize_gating(params, ids, e.target_class, config.gating);
            for (std::size_t step = 0; step < state.trajectory.size(); ++step) {
                for (std::size_t h = 0; h < state.trajectory[step].size(); ++h) {
                    csv.row({std::to_string(e.id), e.adversarial ? "1" : "0",
                             std::to_string(step), std::to_string(h),
                             fmt_double(state.trajectory[step][h])});
                }
            }
            if (picked_auth >= 2 && picked_adv >= 2) break;
        }
        csv.close();
    }

    // Active-head-fraction histogram per class.
    std::vector<double> fractions;
    std::vector<std::size_t> hist_auth(20, 0), hist_adv(20, 0);
    for (const MaskRecord& r : mask_records) {
        const double f = std::accumulate(r.g_b.begin(), r.g_b.end(), 0.0) /
                         static_cast<double>(r.g_b.size());
        fractions.push_back(f);
        const auto bin = std::min<std::size_t>(19, static_cast<std::size_t>(f * 20.0));
        (entry_of(r.sample_id).adversarial ? hist_adv : hist_auth)[bin] += 1;
    }
    {
        CsvWriter csv(ws.path(artifact::kActiveFractions), ws.hash,
                      {"bin_lo", "bin_hi", "authentic", "adversarial"});
        for (std::size_t b = 0; b < 20; ++b) {
            csv.row({fmt_double(b / 20.0), fmt_double((b + 1) / 20.0),
                     std::to_string(hist_auth[b]), std::to_string(hist_adv[b])});
        }
        csv.close();
    }
    std::vector<double> sorted_fractions = fractions;
    std::sort(sorted_fractions.begin(), sorted_fractions.end());
    const double median_fraction =
        sorted_fractions.empty()
            ? 0.0
            : (sorted_fractions.size() % 2
                   ? sorted_fractions[sorted_fractions.size() / 2]
                   : 0.5 * (sorted_fractions[sorted_fractions.size() / 2 - 1] +
                            sorted_fractions[sorted_fractions.size() / 2]));
    const double mean_fraction =
        fractions.empty() ? 0.0
                          : std::accumulate(fractions.begin(), fractions.end(), 0.0) /
                                static_cast<double>(fractions.size());

    // Confidence CDF of the target-class probability under the flipped gates.
    {
        std::vector<double> auth, adv;
        for (const FeatureRecord& r : fb.records) {
            (r.label == 1.0 ? adv : auth).push_back(r.flip_target_prob);
        }
        std::sort(auth.begin(), auth.end());
        std::sort(adv.begin(), adv.end());
        CsvWriter csv(ws.path(artifact::kConfidenceCdf), ws.hash, {"class", "value", "cdf"});
        for (std::size_t i = 0; i < auth.size(); ++i) {
            csv.row({"authentic", fmt_double(auth[i]),
                     fmt_double(static_cast<double>(i + 1) / static_cast<double>(auth.size()))});
        }
        for (std::size_t i = 0; i < adv.size(); ++i) {
            csv.row({"adversarial", fmt_double(adv[i]),
                     fmt_double(static_cast<double>(i + 1) / static_cast<double>(adv.size()))});
        }
        csv.close();
    }

    // Feature-derived direction stats: flip disagreement and aux mismatches.
    double flip_auth = 0.0, flip_adv = 0.0, mm_auth = 0.0, mm_adv = 0.0;
    std::size_t n_auth = 0, n_adv = 0;
    for (const FeatureRecord& r : fb.records) {
        const double nontarget = 1.0 - r.assembled[layout.flip_equal()];
        const double mismatches =
            static_cast<double>(fb.n - 1) - r.assembled[layout.lw_match()];
        if (r.label == 1.0) {
            flip_adv += nontarget;
            mm_adv += mismatches;
            ++n_adv;
        } else {
            flip_auth += nontarget;
            mm_auth += mismatches;
            ++n_auth;
        }
    }
    if (n_auth) {
        flip_auth /= static_cast<double>(n_auth);
        mm_auth /= static_cast<double>(n_auth);
    }
    if (n_adv) {
        flip_adv /= static_cast<double>(n_adv);
        mm_adv /= static_cast<double>(n_adv);
    }

    // Refereeing-head depth quartiles from the detector's input saliency,
    // averaged per class over the test split.
    std::vector<double> quart_auth(4, 0.0), quart_adv(4, 0.0);
    std::size_t ref_auth = 0, ref_adv = 0;
    for (const FeatureRecord& r : fb.records) {
        if (r.split != "test") continue;
        const GradCamResult g = gradcam_refereeing(det, r.assembled, fb.n, fb.m);
        if (g.refereeing.empty()) continue;
        auto& acc = r.label == 1.0 ? quart_adv : quart_auth;
        (r.label == 1.0 ? ref_adv : ref_auth) += 1;
        for (std::size_t b = 0; b < 4; ++b) acc[b] += g.quartile_fractions[b];
    }
    for (std::size_t b = 0; b < 4; ++b) {
        if (ref_auth) quart_auth[b] /= static_cast<double>(ref_auth);
        if (ref_adv) quart_adv[b] /= static_cast<double>(ref_adv);
    }
    {
        CsvWriter csv(ws.path(artifact::kRefereeingQuartiles), ws.hash,
                      {"class", "quartile", "mean_fraction"});
        for (std::size_t b = 0; b < 4; ++b) {
            csv.row({"authentic", std::to_string(b + 1), fmt_double(quart_auth[b])});
        }
        for (std::size_t b = 0; b < 4; ++b) {
            csv.row({"adversarial", std::to_string(b + 1), fmt_double(quart_adv[b])});
        }
        csv.close();
    }

    // Gating-threshold success rate on the authentic entries.
    std::size_t auth_masks = 0, auth_beta06 = 0;
    for (const MaskRecord& r : mask_records) {
        if (entry_of(r.sample_id).adversarial) continue;
        ++auth_masks;
        if (!r.flagged && r.beta_used >= 0.6 - 1e-12) ++auth_beta06;
    }

    write_json_file(
        ws.path(artifact::kAnalysis),
        json{{"config_hash", ws.hash},
             {"samples", {{"total", fb.records.size()}, {"authentic", n_auth},
                          {"adversarial", n_adv}}},
             {"active_fraction", {{"median", median_fraction}, {"mean", mean_fraction}}},
             {"beta06_rate_authentic",
              auth_masks ? static_cast<double>(auth_beta06) / static_cast<double>(auth_masks)
                         : 0.0},
             {"flip_nontarget_rate", {{"authentic", flip_auth}, {"adversarial", flip_adv}}},
             {"aux_mismatch_mean", {{"authentic", mm_auth}, {"adversarial", mm_adv}}},
             {"refereeing_quartiles",
              {{"authentic", quart_auth}, {"adversarial", quart_adv}}},
             {"pca", {{"var1", pca.var1},
                      {"var2", pca.var2},
                      {"explained",
                       pca.total_variance > 0.0 ? (pca.var1 + pca.var2) / pca.total_variance
                                                : 0.0}}}});
    for (const char* name :
         {artifact::kMaskPca, artifact::kGateTrajectories, artifact::kActiveFractions,
          artifact::kConfidenceCdf, artifact::kRefereeingQuartiles, artifact::kAnalysis}) {
        ws.record(name, "analyze");
    }
    std::cout << "analyze: active median " << fmt_fixed(median_fraction, 3)
              << ", flip non-target auth/adv " << fmt_fixed(flip_auth, 3) << "/"
              << fmt_fixed(flip_adv, 3) << ", aux mismatch auth/adv " << fmt_fixed(mm_auth, 2)
              << "/" << fmt_fixed(mm_adv, 2) << "\n";
}

void cmd_report(const PipelineConfig& config) {
    Workspace ws = Workspace::open(config);
    ws.require(artifact::kEncoderMetrics, "train-encoder");
    ws.require(artifact::kBenchmark, "attack");
    ws.require(artifact::kDetection, "evaluate");
    ws.require(artifact::kAblations, "ablate-features");
    ws.require(artifact::kTransfer, "transfer");
    ws.require(artifact::kAnalysis, "analyze");
    const json encoder_metrics = ws.read_versioned(artifact::kEncoderMetrics);
    const json ablations = ws.read_versioned(artifact::kAblations);
    const json transfer = ws.read_versioned(artifact::kTransfer);
    const json analysis = ws.read_versioned(artifact::kAnalysis);

    Benchmark bench = load_benchmark(ws.path(artifact::kBenchmark));
    std::map<std::string, std::size_t> type_count;
    std::map<std::string, double> type_queries;
    std::map<std::string, std::size_t> split_count;
    std::size_t adversarial = 0;
    for (const BenchmarkEntry& e : bench.entries) {
        type_count[e.attack_type] += 1;
        type_queries[e.attack_type] += static_cast<double>(e.query_count);
        split_count[split_name(e.split)] += 1;
        adversarial += e.adversarial ? 1 : 0;
    }
    json per_type = json::object();
    for (const auto& [type, count] : type_count) {
        per_type[type] = json{{"count", count},
                              {"mean_queries", type_queries[type] / static_cast<double>(count)}};
    }
    const json benchmark_stats{{"total", bench.entries.size()},
                               {"authentic", bench.entries.size() - adversarial},
                               {"adversarial", adversarial},
                               {"per_type", per_type},
                               {"per_split", split_count},
                               {"warnings", bench.warnings}};

    const json detection = read_json_file(ws.path(artifact::kDetection));

    write_json_file(ws.path(artifact::kResults),
                    json{{"config", json::parse(config.to_json(false))},
                         {"config_hash", ws.hash},
                         {"encoder_metrics", encoder_metrics},
                         {"benchmark_stats", benchmark_stats},
                         {"detection", detection},
                         {"ablations", ablations},
                         {"transfer", transfer},
                         {"analysis", analysis}});
    ws.record(artifact::kResults, "report");
    std::cout << "report: results written to " << ws.path(artifact::kResults).string() << "\n";
}

const std::vector<std::string>& pipeline_steps() {
    static const std::vector<std::string> steps{
        "gen-data",       "train-encoder",  "train-aux", "attack",
        "extract-features", "train-detector", "evaluate",  "ablate-features",
        "transfer",       "analyze",        "report"};
    return steps;
}

void cmd_pipeline(const PipelineConfig& config) {
    for (const std::string& step : pipeline_steps()) run_one(step, config);
}

void run_one(const std::string& command, const PipelineConfig& config) {
    if (command == "gen-data") {
        cmd_gen_data(config);
    } else if (command == "train-encoder") {
        cmd_train_encoder(config);
    } else if (command == "train-aux") {
        cmd_train_aux(config);
    } else if (command == "attack") {
        cmd_attack(config);
    } else if (command == "extract-features") {
        cmd_extract_features(config);
    } else if (command == "train-detector") {
        cmd_train_detector(config);
    } else if (command == "evaluate") {
        cmd_evaluate(config);
    } else if (command == "ablate-features") {
        cmd_ablate(config);
    } else if (command == "sweep-train-size") {
        cmd_sweep(config);
    } else if (command == "transfer") {
        cmd_transfer(config);
    } else if (command == "compare-size") {
        cmd_compare_size(config);
    } else if (command == "analyze") {
        cmd_analyze(config);
    } else if (command == "report") {
        cmd_report(config);
    } else if (command == "pipeline") {
        cmd_pipeline(config);
    } else {
        fail("unknown command '", command, "'; run `iasdet help` for the command list");
    }
}

}  // namespace

// --- cli --------------------------------------------------------------------------

const std::vector<std::string>& all_commands() {
    static const std::vector<std::string> commands{
        "gen-data",        "train-encoder", "train-aux",       "attack",
        "extract-features", "train-detector", "evaluate",       "ablate-features",
        "sweep-train-size", "transfer",      "compare-size",    "analyze",
        "report",          "pipeline"};
    return commands;
}

std::string cli_help() {
    std::ostringstream os;
    os << "usage: iasdet <command> [--config FILE] [--KEY VALUE ...]\n\n"
       << "commands:\n"
       << "  gen-data          generate (or import) the dataset, vocabulary, and lexicon\n"
       << "  train-encoder     fine-tune the gated transformer encoder\n"
       << "  train-aux         train the layer-wise auxiliary heads (encoder frozen)\n"
       << "  attack            build the authentic + adversarial benchmark\n"
       << "  extract-features  compute gating masks and detector feature vectors\n"
       << "  train-detector    train the CNN detector on the full feature view\n"
       << "  evaluate          score the detector on the benchmark test split\n"
       << "  ablate-features   feature-view x cutmix ablation grid over 3 seeds\n"
       << "  sweep-train-size  detector accuracy vs training-set fraction\n"
       << "  transfer          train on a subset of attack types, test on the rest\n"
       << "  compare-size      run the small and base presets side by side\n"
       << "  analyze           emit plot-data CSVs and summary statistics\n"
       << "  report            aggregate all artifacts into results.json\n"
       << "  pipeline          run every step above except sweep and compare-size\n\n"
       << "Any configuration field can be set with --KEY VALUE, using dots for\n"
       << "nested fields (e.g. --seed 7 --detector.cutmix.ratio 0.5). --config FILE\n"
       << "loads a JSON config first; flags override it. The IASDET_OUT environment\n"
       << "variable supplies the default output directory (fallback: ./out).\n"
       << "task=external reads <external_data>.{train,val,test}.jsonl and an\n"
       << "optional <external_data>.lexicon.jsonl.\n";
    return os.str();
}

CliInvocation parse_cli(const std::vector<std::string>& args) {
    if (args.empty()) fail("no command given; run `iasdet help`");
    CliInvocation inv;
    inv.command = args[0];
    if (std::find(all_commands().begin(), all_commands().end(), inv.command) ==
        all_commands().end()) {
        fail("unknown command '", inv.command, "'; run `iasdet help` for the command list");
    }

    json cfg = json::parse(PipelineConfig{}.to_json(true));
    if (const char* env_out = std::getenv("IASDET_OUT")) {
        if (*env_out) cfg["out_dir"] = env_out;
    }

    for (std::size_t i = 1; i < args.size(); ++i) {
        const std::string& arg = args[i];
        if (arg.rfind("--", 0) != 0 || arg.size() <= 2) {
            fail("unexpected argument '", arg, "'; flags look like --key value");
        }
        const std::string key = arg.substr(2);
        if (i + 1 >= args.size()) fail("flag --", key, " is missing its value");
        const std::string& value = args[++i];
        if (key == "config") {
            std::ifstream in(value);
            if (!in) fail("cannot open config file ", value);
            std::stringstream buffer;
            buffer << in.rdbuf();
            json file = json::parse(buffer.str(), nullptr, false);
            if (file.is_discarded() || !file.is_object()) {
                fail("config file ", value, " is not a json object");
            }
            cfg.merge_patch(file);
            continue;
        }
        std::string pointer = "/" + key;
        std::replace(pointer.begin(), pointer.end(), '.', '/');
        json parsed = json::parse(value, nullptr, false);
        if (parsed.is_discarded()) parsed = value;  // bare strings stay strings
        try {
            cfg[json::json_pointer(pointer)] = parsed;
        } catch (const json::exception& e) {
            fail("flag --", key, ": ", e.what());
        }
    }

    inv.config = PipelineConfig::from_json(cfg.dump());
    return inv;
}

void run_command(const std::string& command, const PipelineConfig& config) {
    config.validate();
    run_one(command, config);
}

int run_cli(const std::vector<std::string>& args) {
    if (args.empty() || args[0] == "help" || args[0] == "--help" || args[0] == "-h") {
        std::cout << cli_help();
        return args.empty() ? 2 : 0;
    }
    try {
        CliInvocation inv = parse_cli(args);
        run_command(inv.command, inv.config);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace iasdet
