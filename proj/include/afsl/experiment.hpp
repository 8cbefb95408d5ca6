#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "afsl/dataset.hpp"
#include "afsl/metrics.hpp"
#include "afsl/parallel.hpp"
#include "afsl/protocol.hpp"
#include "afsl/samplers.hpp"
#include "afsl/scoring.hpp"
#include "afsl/trainer.hpp"

namespace afsl {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    std::string dataset_path;
    std::string first_strategy = "rep-en";
    std::string later_strategy = "clun-en";
    std::size_t m = 10;
    std::size_t iterations = 10;
    std::size_t alpha = 10;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::string trainer = "builtin-synthetic";  // or "external"
    std::string trainer_command;
    double trainer_timeout_seconds = 3600.0;
    std::size_t embedding_dim = 0;  // 0 = accept whatever the trainer ships
    std::string output_dir = "afsl-out";
    std::string clun_measure = "entropy";  // or "least-confidence"
};

inline UncertaintyMeasure parse_uncertainty_measure(const std::string& name) {
    if (name == "entropy") return UncertaintyMeasure::entropy;
    if (name == "least-confidence") return UncertaintyMeasure::least_confidence;
    throw std::invalid_argument("unknown clun_measure '" + name +
                                "' (expected entropy or least-confidence)");
}

inline void validate_config(const ExperimentConfig& config) {
    const Strategy first = parse_strategy(config.first_strategy);
    if (first != Strategy::random && first != Strategy::rep_en)
        throw std::invalid_argument(
            "invalid first_strategy '" + config.first_strategy +
            "': the first iteration has no fine-tuned model to provide scores, so only "
            "strategies that do not involve model uncertainty (random, rep-en) can be "
            "used within the first iteration");
    parse_strategy(config.later_strategy);
    parse_uncertainty_measure(config.clun_measure);
    if (config.m == 0) throw std::invalid_argument("m must be >= 1");
    if (config.iterations == 0) throw std::invalid_argument("iterations must be >= 1");
    if (config.alpha == 0) throw std::invalid_argument("alpha must be >= 1");
    if (config.seeds.empty()) throw std::invalid_argument("seeds must not be empty");
    if (config.trainer != "builtin-synthetic" && config.trainer != "external")
        throw std::invalid_argument("trainer must be builtin-synthetic or external, got '" +
                                    config.trainer + "'");
    if (config.trainer == "external" && config.trainer_command.empty())
        throw std::invalid_argument("trainer_command is required for an external trainer");
    if (!(config.trainer_timeout_seconds > 0.0))
        throw std::invalid_argument("trainer_timeout_s must be positive");
}

/// `key = value` lines; '#' starts a comment; seeds and counts are
/// comma-separated.
inline ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig config;
    config.seeds.clear();
    bool seeds_given = false;
    std::string line;
    std::size_t line_no = 0;

    auto fail = [&](const std::string& what) {
        throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + what);
    };
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    auto to_count = [&](const std::string& v) {
        try {
            std::size_t pos = 0;
            const long long n = std::stoll(v, &pos);
            if (pos != v.size() || n < 0) fail("'" + v + "' is not a non-negative integer");
            return static_cast<std::size_t>(n);
        } catch (const std::logic_error&) {
            fail("'" + v + "' is not a non-negative integer");
        }
        return std::size_t{0};
    };

    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "dataset") config.dataset_path = value;
        else if (key == "first_strategy") config.first_strategy = value;
        else if (key == "later_strategy") config.later_strategy = value;
        else if (key == "m") config.m = to_count(value);
        else if (key == "iterations") config.iterations = to_count(value);
        else if (key == "alpha") config.alpha = to_count(value);
        else if (key == "trainer") config.trainer = value;
        else if (key == "trainer_command") config.trainer_command = value;
        else if (key == "trainer_timeout_s") config.trainer_timeout_seconds = std::stod(value);
        else if (key == "embedding_dim") config.embedding_dim = to_count(value);
        else if (key == "output") config.output_dir = value;
        else if (key == "clun_measure") config.clun_measure = value;
        else if (key == "seeds") {
            seeds_given = true;
            std::stringstream ss(value);
            std::string tok;
            while (std::getline(ss, tok, ','))
                config.seeds.push_back(static_cast<std::uint64_t>(to_count(trim(tok))));
        } else {
            fail("unknown key '" + key + "'");
        }
    }
    if (!seeds_given) config.seeds = {1, 2, 3, 4, 5};
    return config;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
    return parse_config(in);
}

// ---------------------------------------------------------------------------
// Annotation
// ---------------------------------------------------------------------------

/// Supplies labels for selected ids. The orchestrator reads train-split
/// labels only through this interface, and only for ids that were selected.
class AnnotationOracle {
public:
    virtual ~AnnotationOracle() = default;
    virtual std::vector<LabelIndexSet> annotate(const std::vector<SampleId>& ids) = 0;
};

/// Simulated annotator: answers with the gold labels.
class GoldOracle : public AnnotationOracle {
public:
    explicit GoldOracle(const DatasetSplits& dataset) : dataset_(dataset) {
        for (const auto& s : dataset.train) train_ids_.insert(s.id);
    }

    std::vector<LabelIndexSet> annotate(const std::vector<SampleId>& ids) override {
        std::vector<LabelIndexSet> out;
        out.reserve(ids.size());
        for (SampleId id : ids) {
            if (!train_ids_.count(id))
                throw std::out_of_range("annotate: id " + std::to_string(id) +
                                        " is not in the train split");
            out.push_back(dataset_.by_id(id).gold_labels);
        }
        return out;
    }

private:
    const DatasetSplits& dataset_;
    std::unordered_set<SampleId> train_ids_;
};

/// Manual-demo annotator: prompts on the given streams and validates entered
/// label names, re-prompting until every name is in the label set.
class InteractiveOracle : public AnnotationOracle {
public:
    InteractiveOracle(const DatasetSplits& dataset, std::istream& in, std::ostream& out)
        : dataset_(dataset), in_(in), out_(out) {}

    std::vector<LabelIndexSet> annotate(const std::vector<SampleId>& ids) override {
        std::vector<LabelIndexSet> result;
        const LabelSet& ls = dataset_.label_set;
        for (SampleId id : ids) {
            const Sample& sample = dataset_.by_id(id);
            out_ << "sample " << id << ": " << sample.text << "\n";
            while (true) {
                out_ << (ls.multi_label ? "labels (space-separated)> " : "label> ")
                     << std::flush;
                std::string line;
                if (!std::getline(in_, line))
                    throw std::runtime_error("annotation input ended before id " +
                                             std::to_string(id));
                std::istringstream words(line);
                std::string name;
                LabelIndexSet labels;
                bool ok = true;
                while (words >> name) {
                    const int idx = ls.index_of(name);
                    if (idx < 0) {
                        out_ << "unknown label '" << name << "'; valid labels:";
                        for (const auto& l : ls.labels) out_ << ' ' << l;
                        out_ << "\n";
                        ok = false;
                        break;
                    }
                    labels.push_back(idx);
                }
                std::sort(labels.begin(), labels.end());
                labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
                if (ok && labels.empty()) {
                    out_ << "enter at least one label\n";
                    ok = false;
                }
                if (ok && !ls.multi_label && labels.size() != 1) {
                    out_ << "this task takes exactly one label\n";
                    ok = false;
                }
                if (ok) {
                    result.push_back(std::move(labels));
                    break;
                }
                ++retries_;
            }
        }
        return result;
    }

    std::size_t retries() const { return retries_; }

private:
    const DatasetSplits& dataset_;
    std::istream& in_;
    std::ostream& out_;
    std::size_t retries_ = 0;
};

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct IterationRecord {
    std::size_t iteration = 0;
    std::size_t support_size = 0;  // K after augmentation
    std::vector<SampleId> chosen_ids;
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    double embedding_seconds = 0.0;
    double sampling_seconds = 0.0;
    double fine_tune_seconds = 0.0;
};

struct SeedRun {
    std::uint64_t seed = 0;
    std::vector<IterationRecord> iterations;
};

struct AggregateRow {
    std::size_t iteration = 0;
    std::size_t support_size = 0;
    Aggregate micro;
    Aggregate macro;
};

struct ExperimentRecord {
    ExperimentConfig config;
    std::vector<SeedRun> seed_runs;
    std::vector<AggregateRow> aggregates;
};

inline std::vector<AggregateRow> compute_aggregates(const std::vector<SeedRun>& seed_runs) {
    std::vector<AggregateRow> rows;
    if (seed_runs.empty()) return rows;
    const std::size_t iterations = seed_runs.front().iterations.size();
    for (std::size_t i = 0; i < iterations; ++i) {
        AggregateRow row;
        row.iteration = i;
        row.support_size = seed_runs.front().iterations[i].support_size;
        std::vector<double> micro, macro;
        for (const auto& run : seed_runs) {
            micro.push_back(run.iterations.at(i).micro_f1);
            macro.push_back(run.iterations.at(i).macro_f1);
        }
        row.micro = aggregate(micro);
        row.macro = aggregate(macro);
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// The iteration loop
// ---------------------------------------------------------------------------

struct RunOptions {
    /// Builds the trainer for one seed. Defaults to the config's choice.
    std::function<std::unique_ptr<Trainer>(std::uint64_t seed, const std::filesystem::path&)>
        trainer_factory;
    /// Annotation override; must be safe for the configured thread count.
    AnnotationOracle* oracle = nullptr;
    unsigned num_threads = 1;
};

namespace detail {

inline std::vector<SampleId> ids_of(const std::vector<Sample>& split) {
    std::vector<SampleId> out;
    out.reserve(split.size());
    for (const auto& s : split) out.push_back(s.id);
    return out;
}

struct PoolEmbeddings {
    Matrix en;  // |pool| x d
    Matrix sc;  // |pool| x N
};

inline PoolEmbeddings build_embeddings(const TrainerResponse& response,
                                       const std::vector<SampleId>& pool_ids,
                                       std::size_t num_classes, std::size_t expected_dim) {
    std::unordered_map<SampleId, const SampleInference*> by_id;
    for (const auto& inf : response.pool_inference) by_id.emplace(inf.id, &inf);

    PoolEmbeddings out;
    if (pool_ids.empty()) return out;

    const auto first = by_id.find(pool_ids.front());
    if (first == by_id.end())
        throw std::runtime_error("trainer response is missing inference for id " +
                                 std::to_string(pool_ids.front()));
    const std::size_t dim = first->second->en.size();
    if (expected_dim != 0 && dim != expected_dim)
        throw std::runtime_error("trainer ships " + std::to_string(dim) +
                                 "-dimensional embeddings, config expects " +
                                 std::to_string(expected_dim));
    out.en = Matrix(pool_ids.size(), dim);
    out.sc = Matrix(pool_ids.size(), num_classes);
    for (std::size_t i = 0; i < pool_ids.size(); ++i) {
        const auto it = by_id.find(pool_ids[i]);
        if (it == by_id.end())
            throw std::runtime_error("trainer response is missing inference for id " +
                                     std::to_string(pool_ids[i]));
        const SampleInference& inf = *it->second;
        if (inf.en.size() != dim)
            throw std::runtime_error("inconsistent embedding dimension for id " +
                                     std::to_string(inf.id));
        if (inf.logits.cols() != num_classes)
            throw std::runtime_error("sample " + std::to_string(inf.id) +
                                     " has logits for " + std::to_string(inf.logits.cols()) +
                                     " classes, label set has " + std::to_string(num_classes));
        out.en.set_row(i, inf.en);
        out.sc.set_row(i, scores_from_logits(inf.logits));
    }
    return out;
}

inline SeedRun run_seed(const ExperimentConfig& config, const DatasetSplits& dataset,
                        std::uint64_t seed, Trainer& trainer, AnnotationOracle& oracle) {
    using clock = std::chrono::steady_clock;
    const Strategy first = parse_strategy(config.first_strategy);
    const Strategy later = parse_strategy(config.later_strategy);
    const UncertaintyMeasure measure = parse_uncertainty_measure(config.clun_measure);

    SeedRun run;
    run.seed = seed;
    PoolState pool(dataset.train);
    const std::vector<SampleId> validation_ids = ids_of(dataset.validation);
    const std::vector<SampleId> evaluation_ids = ids_of(dataset.test);
    std::vector<LabelIndexSet> gold;
    gold.reserve(dataset.test.size());
    for (const auto& s : dataset.test) gold.push_back(s.gold_labels);

    auto make_request = [&](std::size_t call_index, bool want_pool,
                            bool want_eval) {
        TrainRequest req;
        req.request_id = "seed" + std::to_string(seed) + "-iter" + std::to_string(call_index);
        req.iteration = call_index;
        for (const auto& [id, labels] : pool.support()) req.support.push_back({id, labels});
        if (want_pool) req.pool_ids = pool.unlabeled_ids();
        req.validation_ids = validation_ids;
        if (want_eval) req.evaluation_ids = evaluation_ids;
        req.label_set = dataset.label_set;
        return req;
    };

    // Call 0: inference only, from the never-fine-tuned state.
    TrainerResponse response = trainer.run(make_request(0, true, false));

    for (std::size_t iter = 0; iter < config.iterations; ++iter) {
        try {
            IterationRecord record;
            record.iteration = iter;

            const auto embed_start = clock::now();
            const std::vector<SampleId> pool_ids = pool.unlabeled_ids();
            const PoolEmbeddings emb = build_embeddings(response, pool_ids,
                                                        dataset.label_set.size(),
                                                        config.embedding_dim);
            record.embedding_seconds = response.timings.inference_seconds +
                                       std::chrono::duration<double>(clock::now() - embed_start)
                                           .count();

            SelectionRequest sreq;
            sreq.pool_ids = pool_ids;
            sreq.en = &emb.en;
            sreq.sc = &emb.sc;
            sreq.m = config.m;
            sreq.alpha = config.alpha;
            sreq.seed = mix_seed(seed, iter);
            sreq.iteration_index = iter;
            sreq.clun_measure = measure;

            const auto sample_start = clock::now();
            Selection selection = select(iter == 0 ? first : later, sreq);
            record.sampling_seconds =
                std::chrono::duration<double>(clock::now() - sample_start).count();

            const std::vector<LabelIndexSet> labels = oracle.annotate(selection.chosen_ids);
            pool.acquire(selection.chosen_ids, labels);
            if (!pool.partition_holds())
                throw std::logic_error("pool/support partition invariant violated");
            record.chosen_ids = std::move(selection.chosen_ids);
            record.support_size = pool.support_size();

            // Fine-tune a fresh model on the augmented support set, evaluate,
            // and collect the pool inference the next iteration selects from.
            const bool last = iter + 1 == config.iterations;
            response = trainer.run(make_request(iter + 1, !last, true));
            record.fine_tune_seconds = response.timings.fine_tune_seconds;

            std::unordered_map<SampleId, const LabelIndexSet*> pred_by_id;
            for (const auto& [id, pred] : response.predictions) pred_by_id.emplace(id, &pred);
            std::vector<LabelIndexSet> predictions;
            predictions.reserve(evaluation_ids.size());
            for (SampleId id : evaluation_ids) {
                const auto it = pred_by_id.find(id);
                if (it == pred_by_id.end())
                    throw std::runtime_error("trainer response is missing a prediction for id " +
                                             std::to_string(id));
                predictions.push_back(*it->second);
            }
            record.micro_f1 = micro_f1(gold, predictions);
            record.macro_f1 = macro_f1(gold, predictions, dataset.label_set);
            run.iterations.push_back(std::move(record));
        } catch (const std::exception& e) {
            throw std::runtime_error("seed " + std::to_string(seed) + ", iteration " +
                                     std::to_string(iter) + ": " + e.what());
        }
    }
    return run;
}

}  // namespace detail

inline ExperimentRecord run_experiment(const ExperimentConfig& config,
                                       const DatasetSplits& dataset,
                                       const RunOptions& options = {}) {
    validate_config(config);

    auto factory = options.trainer_factory;
    if (!factory) {
        factory = [&config, &dataset](std::uint64_t,
                                      const std::filesystem::path& workdir)
            -> std::unique_ptr<Trainer> {
            if (config.trainer == "external")
                return std::make_unique<ExternalTrainer>(config.trainer_command, workdir,
                                                         config.trainer_timeout_seconds);
            return std::make_unique<PrototypeTrainer>(dataset);
        };
    }

    ExperimentRecord record;
    record.config = config;
    record.seed_runs.resize(config.seeds.size());

    GoldOracle gold_oracle(dataset);

    std::mutex error_mutex;
    std::exception_ptr first_error;
    parallel_for(config.seeds.size(), options.num_threads, [&](std::size_t i) {
        try {
            const std::uint64_t seed = config.seeds[i];
            const std::filesystem::path workdir =
                std::filesystem::path(config.output_dir) / ("seed_" + std::to_string(seed));
            const std::unique_ptr<Trainer> trainer = factory(seed, workdir);
            AnnotationOracle& oracle =
                options.oracle != nullptr ? *options.oracle
                                          : static_cast<AnnotationOracle&>(gold_oracle);
            record.seed_runs[i] = detail::run_seed(config, dataset, seed, *trainer, oracle);
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
        }
    });
    if (first_error) std::rethrow_exception(first_error);

    record.aggregates = compute_aggregates(record.seed_runs);
    return record;
}

inline ExperimentRecord run_experiment(const ExperimentConfig& config,
                                       const RunOptions& options = {}) {
    const DatasetSplits dataset = load_dataset(config.dataset_path);
    return run_experiment(config, dataset, options);
}

// ---------------------------------------------------------------------------
// Persistence and reporting
// ---------------------------------------------------------------------------

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
    return nlohmann::json{{"dataset", c.dataset_path},
                          {"first_strategy", c.first_strategy},
                          {"later_strategy", c.later_strategy},
                          {"m", c.m},
                          {"iterations", c.iterations},
                          {"alpha", c.alpha},
                          {"seeds", c.seeds},
                          {"trainer", c.trainer},
                          {"trainer_command", c.trainer_command},
                          {"trainer_timeout_s", c.trainer_timeout_seconds},
                          {"embedding_dim", c.embedding_dim},
                          {"output", c.output_dir},
                          {"clun_measure", c.clun_measure}};
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.dataset_path = j.value("dataset", "");
    c.first_strategy = j.value("first_strategy", c.first_strategy);
    c.later_strategy = j.value("later_strategy", c.later_strategy);
    c.m = j.value("m", c.m);
    c.iterations = j.value("iterations", c.iterations);
    c.alpha = j.value("alpha", c.alpha);
    c.seeds = j.value("seeds", c.seeds);
    c.trainer = j.value("trainer", c.trainer);
    c.trainer_command = j.value("trainer_command", c.trainer_command);
    c.trainer_timeout_seconds = j.value("trainer_timeout_s", c.trainer_timeout_seconds);
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    c.output_dir = j.value("output", c.output_dir);
    c.clun_measure = j.value("clun_measure", c.clun_measure);
    return c;
}

/// Canonical record serialization. Timings are wall-clock measurements and
/// therefore vary run to run; exclude them to compare the deterministic
/// content of two records.
inline nlohmann::json record_to_json(const ExperimentRecord& record,
                                     bool include_timings = true) {
    nlohmann::json j;
    j["format"] = "afsl-experiment/1";
    j["stddev_form"] = "sample (n-1)";
    j["config"] = config_to_json(record.config);
    auto runs = nlohmann::json::array();
    for (const auto& run : record.seed_runs) {
        nlohmann::json r;
        r["seed"] = run.seed;
        auto iters = nlohmann::json::array();
        for (const auto& it : run.iterations) {
            nlohmann::json ij{{"iteration", it.iteration},
                              {"support_size", it.support_size},
                              {"chosen_ids", it.chosen_ids},
                              {"micro_f1", it.micro_f1},
                              {"macro_f1", it.macro_f1}};
            if (include_timings)
                ij["timings"] = {{"embedding_seconds", it.embedding_seconds},
                                 {"sampling_seconds", it.sampling_seconds},
                                 {"fine_tune_seconds", it.fine_tune_seconds}};
            iters.push_back(std::move(ij));
        }
        r["iterations"] = std::move(iters);
        runs.push_back(std::move(r));
    }
    j["seed_runs"] = std::move(runs);
    auto aggs = nlohmann::json::array();
    for (const auto& row : record.aggregates)
        aggs.push_back(nlohmann::json{
            {"iteration", row.iteration},
            {"support_size", row.support_size},
            {"micro_f1", {{"mean", row.micro.mean}, {"stddev", row.micro.stddev}}},
            {"macro_f1", {{"mean", row.macro.mean}, {"stddev", row.macro.stddev}}}});
    j["aggregates"] = std::move(aggs);
    return j;
}

inline ExperimentRecord record_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "afsl-experiment/1")
        throw std::runtime_error("not an afsl experiment record");
    ExperimentRecord record;
    record.config = config_from_json(j.at("config"));
    for (const auto& r : j.at("seed_runs")) {
        SeedRun run;
        run.seed = r.at("seed").get<std::uint64_t>();
        for (const auto& ij : r.at("iterations")) {
            IterationRecord it;
            it.iteration = ij.at("iteration").get<std::size_t>();
            it.support_size = ij.at("support_size").get<std::size_t>();
            it.chosen_ids = ij.at("chosen_ids").get<std::vector<SampleId>>();
            it.micro_f1 = ij.at("micro_f1").get<double>();
            it.macro_f1 = ij.at("macro_f1").get<double>();
            if (ij.contains("timings")) {
                it.embedding_seconds = ij["timings"].value("embedding_seconds", 0.0);
                it.sampling_seconds = ij["timings"].value("sampling_seconds", 0.0);
                it.fine_tune_seconds = ij["timings"].value("fine_tune_seconds", 0.0);
            }
            run.iterations.push_back(std::move(it));
        }
        record.seed_runs.push_back(std::move(run));
    }
    for (const auto& aj : j.at("aggregates")) {
        AggregateRow row;
        row.iteration = aj.at("iteration").get<std::size_t>();
        row.support_size = aj.at("support_size").get<std::size_t>();
        row.micro.mean = aj.at("micro_f1").at("mean").get<double>();
        row.micro.stddev = aj.at("micro_f1").at("stddev").get<double>();
        row.macro.mean = aj.at("macro_f1").at("mean").get<double>();
        row.macro.stddev = aj.at("macro_f1").at("stddev").get<double>();
        record.aggregates.push_back(row);
    }
    return record;
}

inline void save_record(const ExperimentRecord& record, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write record file '" + path + "'");
    out << record_to_json(record).dump(2) << '\n';
}

inline ExperimentRecord load_record(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open record file '" + path + "'");
    nlohmann::json j;
    in >> j;
    return record_from_json(j);
}

inline std::string strategy_label(const ExperimentConfig& config) {
    if (config.first_strategy == config.later_strategy) return config.first_strategy;
    return config.first_strategy + "-" + config.later_strategy;
}

/// One row per iteration: (strategy, K, mean, stddev) with micro-F1 as
/// percentages, one decimal, round half to even.
inline void write_report_csv(const ExperimentRecord& record, std::ostream& out,
                             bool use_macro = false) {
    out << "# metric: " << (use_macro ? "macro" : "micro")
        << "-F1 %; stddev form: sample (n-1); seeds: " << record.seed_runs.size() << "\n";
    out << "strategy,K,mean,stddev\n";
    const std::string label = strategy_label(record.config);
    for (const auto& row : record.aggregates) {
        const Aggregate& agg = use_macro ? row.macro : row.micro;
        out << label << ',' << row.support_size << ',' << format_percent(agg.mean) << ','
            << format_percent(agg.stddev) << "\n";
    }
}

/// Min/mean/max band per support size, for external plotting.
inline void write_plot_csv(const ExperimentRecord& record, std::ostream& out) {
    out << "metric,K,min,mean,max\n";
    for (const char* metric : {"micro_f1", "macro_f1"}) {
        const bool macro = std::string(metric) == "macro_f1";
        for (std::size_t i = 0; i < record.aggregates.size(); ++i) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -std::numeric_limits<double>::infinity();
            for (const auto& run : record.seed_runs) {
                const double v =
                    macro ? run.iterations.at(i).macro_f1 : run.iterations.at(i).micro_f1;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            const auto& agg = macro ? record.aggregates[i].macro : record.aggregates[i].micro;
            out << metric << ',' << record.aggregates[i].support_size << ','
                << format_double(lo) << ',' << format_double(agg.mean) << ','
                << format_double(hi) << "\n";
        }
    }
}

}  // namespace afsl
