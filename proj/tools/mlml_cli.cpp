// Command-line front end: gen-data, corrupt, stats, train, sweep, report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mlml/errors.hpp"
#include "mlml/experiment.hpp"
#include "mlml/label_space.hpp"

namespace fs = std::filesystem;
using namespace mlml;

namespace {

std::string setting_tag(const Setting& s) {
    std::string out;
    for (char c : s.name()) {
        if (c == '(') out += '_';
        else if (c != ')') out += c;
    }
    return out;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    KeyValueConfig kv = path.empty() ? KeyValueConfig{} : KeyValueConfig::load(path);
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw DataError("--set expects key=value, got: " + o);
        kv.set(o.substr(0, eq), o.substr(eq + 1));
    }
    return ExperimentConfig::from_key_values(kv);
}

fs::path output_dir(const ExperimentConfig& cfg) {
    fs::path dir = resolve_output_dir(cfg.output_dir);
    fs::create_directories(dir);
    return dir;
}

std::string results_path(const ExperimentConfig& cfg) {
    if (!cfg.results_csv.empty()) return cfg.results_csv;
    return (output_dir(cfg) / "results.csv").string();
}

void print_record(const RunRecord& r) {
    std::printf("%-32s %-10s seed=%llu best_epoch=%d val_mAP=%.4f", r.method.c_str(), r.setting.c_str(),
                static_cast<unsigned long long>(r.seed), r.epoch_best, r.val_map);
    if (r.test_map) std::printf(" test_mAP=%.4f", *r.test_map);
    std::printf(" (%.2fs)\n", r.wall_seconds);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-label learning with missing labels: data, corruption, training and evaluation"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic train/test benchmark");
    DataSpec spec;
    std::string gen_out;
    std::vector<double> prevalence;
    gen->add_option("--out-dir", gen_out, "Directory for train.txt and test.txt");
    gen->add_option("--n-train", spec.num_train, "Training instances")->capture_default_str();
    gen->add_option("--n-test", spec.num_test, "Test instances")->capture_default_str();
    gen->add_option("--num-features", spec.num_features, "Feature dimension M")->capture_default_str();
    gen->add_option("--num-classes", spec.num_classes, "Number of classes L")->capture_default_str();
    gen->add_option("--prevalence", prevalence, "Per-class positive rate (one value or L values)");
    gen->add_option("--noise", spec.noise, "Gaussian feature noise sigma")->capture_default_str();
    gen->add_option("--seed", spec.seed, "Master seed")->capture_default_str();

    // corrupt
    auto* cor = app.add_subcommand("corrupt", "Hide labels once and persist the observed-label file");
    std::string cor_dataset, cor_setting = "FOL", cor_out;
    RngSeed cor_seed = 0;
    bool cor_force = false;
    cor->add_option("--dataset", cor_dataset, "Dataset file")->required();
    cor->add_option("--setting", cor_setting, "FOL, SPL, POL(p) or PPL(q)")->required();
    cor->add_option("--seed", cor_seed, "Corruption seed")->capture_default_str();
    cor->add_option("--out", cor_out, "Output file (default: <dir>/<stem>.<setting>.seed<N>.observed)");
    cor->add_flag("--force", cor_force, "Overwrite an existing observed-label file");

    // stats
    auto* sta = app.add_subcommand("stats", "Observed-label statistics table");
    std::string sta_observed;
    sta->add_option("--observed", sta_observed, "Observed-label file")->required();

    // train / sweep
    std::string cfg_path;
    std::vector<std::string> overrides;
    auto* tr = app.add_subcommand("train", "Run one training configuration");
    tr->add_option("--config", cfg_path, "key=value config file");
    tr->add_option("--set", overrides, "Override a config key (key=value), repeatable");
    auto* sw = app.add_subcommand("sweep", "Grid-search learning_rates x batch_sizes on validation mAP");
    sw->add_option("--config", cfg_path, "key=value config file");
    sw->add_option("--set", overrides, "Override a config key (key=value), repeatable");

    // report
    auto* rep = app.add_subcommand("report", "Method x setting table and observed-fraction curve");
    std::string rep_results, rep_table, rep_curve;
    rep->add_option("--results", rep_results, "Results CSV")->required();
    rep->add_option("--table", rep_table, "Write the table here instead of stdout");
    rep->add_option("--curve", rep_curve, "Write curve data (CSV) here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            spec.prevalence = prevalence;
            const fs::path dir = gen_out.empty() ? fs::path(resolve_output_dir("")) : fs::path(gen_out);
            fs::create_directories(dir);
            const auto data = gen_data(spec);
            save_dataset((dir / "train.txt").string(), data.train);
            save_dataset((dir / "test.txt").string(), data.test);
            std::printf("wrote %s and %s\n", (dir / "train.txt").c_str(), (dir / "test.txt").c_str());
        } else if (*cor) {
            const Setting setting = Setting::parse(cor_setting);
            const Dataset dataset = load_dataset(cor_dataset);
            fs::path out = cor_out;
            if (out.empty()) {
                const fs::path src(cor_dataset);
                out = src.parent_path() /
                      (src.stem().string() + "." + setting_tag(setting) + ".seed" + std::to_string(cor_seed) + ".observed");
            }
            if (fs::exists(out) && !cor_force)
                throw DataError("refusing to overwrite " + out.string() +
                                ": labels are corrupted once per (dataset, setting, seed); pass --force to redo");
            const auto observed = corrupt(dataset, setting, cor_seed);
            save_observed(out.string(), observed, dataset);
            std::printf("wrote %s\n", out.c_str());
            if (!observed.flagged().empty())
                std::printf("%zu instances have no positive label and are fully unobserved\n",
                            observed.flagged().size());
        } else if (*sta) {
            std::fputs(stats_report(load_observed(sta_observed)).to_string().c_str(), stdout);
        } else if (*tr) {
            const auto cfg = load_config(cfg_path, overrides);
            const auto inputs = prepare_inputs(cfg);
            const auto run = run_experiment(cfg, inputs);
            append_csv(results_path(cfg), {run.record});
            const std::string ckpt =
                cfg.checkpoint.empty() ? (output_dir(cfg) / (cfg.hash() + ".model")).string() : cfg.checkpoint;
            std::ofstream out(ckpt);
            if (!out) throw DataError("cannot write checkpoint: " + ckpt);
            run.training.best_model.write_checkpoint(out, cfg.train.seed, run.training.best_epoch);
            print_record(run.record);
        } else if (*sw) {
            const auto cfg = load_config(cfg_path, overrides);
            const auto inputs = prepare_inputs(cfg);
            const auto sweep = run_sweep(cfg, inputs);
            std::vector<RunRecord> rows = sweep.grid;
            rows.push_back(sweep.selected);
            append_csv(results_path(cfg), rows);
            for (const auto& r : rows) print_record(r);
        } else if (*rep) {
            std::ifstream in(rep_results);
            if (!in) throw DataError("cannot open results CSV: " + rep_results);
            const Report report = build_report(read_csv(in));
            if (rep_table.empty()) {
                std::fputs(report.table.c_str(), stdout);
            } else {
                std::ofstream(rep_table) << report.table;
            }
            if (!rep_curve.empty()) std::ofstream(rep_curve) << report.curve;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "mlml: %s\n", e.what());
        return 1;
    }
    return 0;
}
