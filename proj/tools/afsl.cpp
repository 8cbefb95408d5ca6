// afsl: active few-shot instance selection over a pluggable trainer.
//
// Subcommands: stats, synth, run, sweep, report, trainer. See README.md.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "afsl/afsl.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<std::size_t> parse_count_list(const std::string& csv) {
    std::vector<std::size_t> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoull(tok));
    return out;
}

int cmd_stats(const std::string& dataset_path) {
    const afsl::DatasetSplits ds = afsl::load_dataset(dataset_path);
    std::vector<afsl::LabelIndexSet> all_labels;
    for (const auto* s : ds.all_samples()) all_labels.push_back(s->gold_labels);
    const afsl::DatasetStats stats = afsl::uniformity(all_labels, ds.label_set);

    std::cout << "dataset:     " << dataset_path << "\n"
              << "labels (|L|): " << ds.label_set.size() << " [";
    for (std::size_t i = 0; i < ds.label_set.labels.size(); ++i)
        std::cout << (i ? ", " : "") << ds.label_set.labels[i];
    std::cout << "]\n"
              << "multi-label: " << (ds.label_set.multi_label ? "yes" : "no") << "\n"
              << "train/val/test: " << ds.train.size() << " / " << ds.validation.size() << " / "
              << ds.test.size() << "\n"
              << "U%:          " << afsl::format_percent(stats.uniformity) << "\n";
    return 0;
}

int cmd_synth(std::size_t classes, std::size_t dim, double sigma, double sep,
              const std::string& counts_csv, const std::string& train_csv,
              const std::string& val_csv, const std::string& test_csv, std::uint64_t seed,
              const std::string& output) {
    afsl::MixtureSpec spec;
    spec.num_classes = classes;
    spec.dimension = dim;
    spec.sigma = sigma;
    spec.seed = seed;
    spec.class_means = afsl::circle_means(classes, dim, sep);

    auto uniform_counts = [&](std::size_t per_class) {
        return std::vector<std::size_t>(classes, per_class);
    };
    if (!counts_csv.empty()) {
        const auto c = parse_count_list(counts_csv);
        if (c.size() != 3)
            throw CLI::ValidationError("--counts expects train,val,test per-class sizes");
        spec.train_counts = uniform_counts(c[0]);
        spec.validation_counts = uniform_counts(c[1]);
        spec.test_counts = uniform_counts(c[2]);
    }
    if (!train_csv.empty()) spec.train_counts = parse_count_list(train_csv);
    if (!val_csv.empty()) spec.validation_counts = parse_count_list(val_csv);
    if (!test_csv.empty()) spec.test_counts = parse_count_list(test_csv);
    if (spec.validation_counts.empty()) spec.validation_counts = uniform_counts(1);
    if (spec.test_counts.empty()) spec.test_counts = uniform_counts(1);

    const afsl::DatasetSplits ds = afsl::generate(spec);
    afsl::save_dataset(ds, output);
    std::cout << "wrote " << output << " (" << ds.train.size() << " train, "
              << ds.validation.size() << " val, " << ds.test.size() << " test)\n";
    return 0;
}

int cmd_run(const std::string& config_path, bool interactive, unsigned threads) {
    afsl::ExperimentConfig config = afsl::parse_config_file(config_path);
    afsl::validate_config(config);
    const afsl::DatasetSplits dataset = afsl::load_dataset(config.dataset_path);

    afsl::RunOptions options;
    options.num_threads = interactive ? 1 : threads;
    afsl::InteractiveOracle interactive_oracle(dataset, std::cin, std::cout);
    if (interactive) options.oracle = &interactive_oracle;

    const afsl::ExperimentRecord record = afsl::run_experiment(config, dataset, options);

    fs::create_directories(config.output_dir);
    const std::string record_path = (fs::path(config.output_dir) / "record.json").string();
    afsl::save_record(record, record_path);
    if (interactive)
        std::cout << "annotation retries: " << interactive_oracle.retries() << "\n";
    std::cout << "record: " << record_path << "\n";
    afsl::write_report_csv(record, std::cout);
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& alpha_csv, unsigned threads) {
    const afsl::ExperimentConfig base = afsl::parse_config_file(config_path);
    std::vector<std::size_t> alphas = parse_count_list(alpha_csv);
    if (alphas.empty()) throw CLI::ValidationError("--alpha expects a comma-separated list");

    const afsl::DatasetSplits dataset = afsl::load_dataset(base.dataset_path);
    std::cout << "# alpha sweep, later_strategy=unrep; micro-F1 %; stddev form: sample (n-1)\n";
    std::cout << "alpha,K,mean,stddev\n";
    for (std::size_t alpha : alphas) {
        afsl::ExperimentConfig config = base;
        config.alpha = alpha;
        config.later_strategy = "unrep";
        config.output_dir =
            (fs::path(base.output_dir) / ("alpha_" + std::to_string(alpha))).string();
        afsl::validate_config(config);

        afsl::RunOptions options;
        options.num_threads = threads;
        const afsl::ExperimentRecord record = afsl::run_experiment(config, dataset, options);
        fs::create_directories(config.output_dir);
        afsl::save_record(record, (fs::path(config.output_dir) / "record.json").string());
        for (const auto& row : record.aggregates)
            std::cout << alpha << ',' << row.support_size << ','
                      << afsl::format_percent(row.micro.mean) << ','
                      << afsl::format_percent(row.micro.stddev) << "\n";
    }
    return 0;
}

int cmd_report(const std::string& record_path, const std::string& csv_out,
               const std::string& plot_out, bool use_macro) {
    const afsl::ExperimentRecord record = afsl::load_record(record_path);
    if (csv_out.empty()) {
        afsl::write_report_csv(record, std::cout, use_macro);
    } else {
        std::ofstream out(csv_out);
        if (!out) throw std::runtime_error("cannot write '" + csv_out + "'");
        afsl::write_report_csv(record, out, use_macro);
        std::cout << "wrote " << csv_out << "\n";
    }
    if (!plot_out.empty()) {
        std::ofstream out(plot_out);
        if (!out) throw std::runtime_error("cannot write '" + plot_out + "'");
        afsl::write_plot_csv(record, out);
        std::cout << "wrote " << plot_out << "\n";
    }
    return 0;
}

int cmd_trainer(const std::string& dataset_path, const std::string& request_path) {
    const afsl::DatasetSplits dataset = afsl::load_dataset(dataset_path);
    afsl::PrototypeTrainer trainer(dataset);
    afsl::serve_request(trainer, request_path, std::cout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"active few-shot instance selection"};
    app.require_subcommand(1);

    // stats
    std::string stats_dataset;
    auto* stats = app.add_subcommand("stats", "print label-set size, split sizes, and U%");
    stats->add_option("dataset", stats_dataset, "dataset file")->required();

    // synth
    std::size_t classes = 4, dim = 2;
    double sigma = 1.0, sep = 6.0;
    std::string counts_csv, train_csv, val_csv, test_csv, synth_out = "synth.jsonl";
    std::uint64_t synth_seed = 0;
    auto* synth = app.add_subcommand("synth", "generate a Gaussian-mixture dataset");
    synth->add_option("--classes", classes, "number of classes")->capture_default_str();
    synth->add_option("--dim", dim, "feature dimension")->capture_default_str();
    synth->add_option("--sigma", sigma, "isotropic stddev")->capture_default_str();
    synth->add_option("--sep", sep, "class-mean circle radius")->capture_default_str();
    synth->add_option("--counts", counts_csv, "per-class train,val,test sizes (e.g. 500,100,100)");
    synth->add_option("--train-counts", train_csv, "explicit per-class train sizes");
    synth->add_option("--val-counts", val_csv, "explicit per-class validation sizes");
    synth->add_option("--test-counts", test_csv, "explicit per-class test sizes");
    synth->add_option("--seed", synth_seed, "generator seed")->capture_default_str();
    synth->add_option("-o,--output", synth_out, "output file")->capture_default_str();

    // run
    std::string run_config;
    bool interactive = false;
    unsigned threads = 1;
    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("--config", run_config, "experiment config file")->required();
    run->add_flag("--interactive", interactive, "prompt for labels instead of the gold oracle");
    run->add_option("--threads", threads, "seeds to run in parallel")->capture_default_str();

    // sweep
    std::string sweep_config, sweep_alpha = "1,2,5,10,20,50";
    unsigned sweep_threads = 1;
    auto* sweep = app.add_subcommand("sweep", "run the unrep candidate-multiplier grid");
    sweep->add_option("--config", sweep_config, "base experiment config file")->required();
    sweep->add_option("--alpha", sweep_alpha, "comma-separated alpha values")
        ->capture_default_str();
    sweep->add_option("--threads", sweep_threads, "seeds to run in parallel")
        ->capture_default_str();

    // report
    std::string report_record, report_csv, report_plot;
    bool report_macro = false;
    auto* report = app.add_subcommand("report", "emit the strategy/K/mean/stddev table");
    report->add_option("record", report_record, "experiment record file")->required();
    report->add_option("-o,--csv", report_csv, "write CSV here instead of stdout");
    report->add_option("--plot", report_plot, "also write a min/mean/max band CSV");
    report->add_flag("--macro", report_macro, "report macro-F1 instead of micro-F1");

    // trainer
    std::string trainer_dataset, trainer_request;
    auto* trainer =
        app.add_subcommand("trainer", "serve one protocol request with the built-in trainer");
    trainer->add_option("--dataset", trainer_dataset, "dataset file")->required();
    trainer->add_option("request", trainer_request, "request file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (stats->parsed()) return cmd_stats(stats_dataset);
        if (synth->parsed())
            return cmd_synth(classes, dim, sigma, sep, counts_csv, train_csv, val_csv, test_csv,
                             synth_seed, synth_out);
        if (run->parsed()) return cmd_run(run_config, interactive, threads);
        if (sweep->parsed()) return cmd_sweep(sweep_config, sweep_alpha, sweep_threads);
        if (report->parsed())
            return cmd_report(report_record, report_csv, report_plot, report_macro);
        if (trainer->parsed()) return cmd_trainer(trainer_dataset, trainer_request);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
