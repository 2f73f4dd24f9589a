#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "mlml/errors.hpp"
#include "mlml/experiment.hpp"

using namespace mlml;

namespace {

ExperimentConfig tiny_config(const std::string& extra = "") {
    std::istringstream text(
        "seed=3\nn_train=200\nn_test=120\nnum_features=8\nnum_classes=4\nprevalence=0.3\n"
        "setting=POL(0.5)\nepochs=4\nlearning_rate=0.5\nbatch_size=8\n" +
        extra);
    return ExperimentConfig::from_key_values(KeyValueConfig::parse(text));
}

RunRecord record(const std::string& method, const std::string& setting, double test) {
    RunRecord r;
    r.config_hash = "0123456789abcdef";
    r.method = method;
    r.setting = setting;
    r.test_map = test;
    return r;
}

}  // namespace

TEST_CASE("noise-free single-class instances equal their prototype") {
    DataSpec spec;
    spec.num_train = 300;
    spec.num_test = 10;
    spec.num_features = 6;
    spec.num_classes = 3;
    spec.prevalence = {0.3};
    spec.noise = 0.0;
    spec.seed = 5;
    const auto g = gen_data(spec);
    std::size_t singles = 0;
    for (std::size_t i = 0; i < g.train.num_instances(); ++i) {
        if (g.train.labels().row_positives(i) != 1) continue;
        ++singles;
        std::size_t k = 0;
        while (!g.train.labels()(i, k)) ++k;
        const auto x = g.train.features(i);
        CHECK(std::vector<double>(x.begin(), x.end()) == g.prototypes[k]);
    }
    CHECK(singles > 0);
    for (const auto& p : g.prototypes) {
        double norm = 0.0;
        for (double v : p) norm += v * v;
        CHECK(norm == doctest::Approx(1.0));
    }
}

TEST_CASE("zero prevalence gives an all-negative dataset") {
    DataSpec spec;
    spec.num_train = 50;
    spec.num_test = 5;
    spec.prevalence = {0.0};
    const auto g = gen_data(spec);
    for (std::size_t i = 0; i < 50; ++i) CHECK(g.train.labels().row_positives(i) == 0);
}

TEST_CASE("class prevalence follows binomial concentration") {
    // Across many seeds the share of 3-sigma exceedances should sit near
    // the Gaussian 0.27%; a biased generator would blow well past 1%.
    const std::vector<double> pi{0.05, 0.15, 0.3, 0.6};
    int outside = 0, total = 0;
    double worst = 0.0;
    for (RngSeed seed = 0; seed < 250; ++seed) {
        DataSpec spec;
        spec.num_test = 1;
        spec.num_classes = 4;
        spec.prevalence = pi;
        spec.seed = seed;
        const auto g = gen_data(spec);
        const double n = static_cast<double>(g.train.num_instances());
        for (std::size_t k = 0; k < 4; ++k) {
            double count = 0;
            for (std::size_t i = 0; i < g.train.num_instances(); ++i) count += g.train.labels()(i, k);
            const double z = (count / n - pi[k]) / std::sqrt(pi[k] * (1 - pi[k]) / n);
            worst = std::max(worst, std::abs(z));
            outside += std::abs(z) > 3.0;
            ++total;
        }
    }
    CHECK(static_cast<double>(outside) / total <= 0.01);
    CHECK(worst < 5.0);
}

TEST_CASE("generation is seeded and validated") {
    DataSpec spec;
    spec.num_train = 40;
    spec.num_test = 10;
    spec.seed = 1;
    CHECK(gen_data(spec).train == gen_data(spec).train);
    DataSpec other = spec;
    other.seed = 2;
    CHECK_FALSE(gen_data(other).train == gen_data(spec).train);
    spec.prevalence = {1.5};
    CHECK_THROWS_AS(gen_data(spec), ContractError);
    spec.prevalence = {0.1, 0.2};
    CHECK_THROWS_AS(gen_data(spec), ContractError);
}

TEST_CASE("key=value configuration") {
    std::istringstream text("# comment\n\nseed = 7\nlearning_rates=0.1, 1,3\nbatch_sizes=8,16\nloss=wan\n");
    const auto kv = KeyValueConfig::parse(text);
    CHECK(kv.get_int("seed", 0) == 7);
    CHECK(kv.get_doubles("learning_rates") == std::vector<double>{0.1, 1.0, 3.0});
    const auto c = ExperimentConfig::from_key_values(kv);
    CHECK(c.train.seed == 7);
    CHECK(c.data.seed == 7);
    CHECK(c.corruption_seed == 7);
    CHECK(c.train.loss == LossChoice::WAN);
    CHECK(c.batch_sizes == std::vector<std::size_t>{8, 16});

    std::istringstream unknown("sead=7\n");
    CHECK_THROWS_AS(ExperimentConfig::from_key_values(KeyValueConfig::parse(unknown)), DataError);
    std::istringstream bad("epochs=ten\n");
    CHECK_THROWS_AS(ExperimentConfig::from_key_values(KeyValueConfig::parse(bad)), DataError);
    std::istringstream noeq("epochs\n");
    CHECK_THROWS_AS(KeyValueConfig::parse(noeq), DataError);
}

TEST_CASE("config hash tracks result-affecting fields only") {
    const auto a = tiny_config();
    CHECK(a.hash().size() == 16);
    CHECK(a.hash() == tiny_config().hash());
    CHECK(a.hash() != tiny_config("learning_rate=0.25\n").hash());
    CHECK(a.hash() != tiny_config("no_disturbance=1\n").hash());
    CHECK(a.hash() == tiny_config("output_dir=/tmp/elsewhere\n").hash());
}

TEST_CASE("validation split is a seeded partition") {
    const auto s = split_validation(100, 0.2, 4);
    CHECK(s.validation.size() == 20);
    CHECK(s.fit.size() == 80);
    std::set<std::size_t> all(s.fit.begin(), s.fit.end());
    all.insert(s.validation.begin(), s.validation.end());
    CHECK(all.size() == 100);
    CHECK(split_validation(100, 0.2, 4).validation == s.validation);
    CHECK(split_validation(100, 0.2, 5).validation != s.validation);
}

TEST_CASE("method labels distinguish every ablation") {
    std::set<std::string> labels;
    TrainConfig t;
    labels.insert(method_label(t));
    for (int k = 0; k < 4; ++k) {
        TrainConfig a;
        a.ablation.no_running_average = k == 0;
        a.ablation.no_disturbance = k == 1;
        a.ablation.no_imbalance_weights = k == 2;
        a.ablation.no_weighted_schedule = k == 3;
        labels.insert(method_label(a));
    }
    CHECK(labels.size() == 5);
    CHECK(labels.count("Ours (Without Update)") == 1);
    t.loss = LossChoice::BceFol;
    CHECK(method_label(t) == "BCE (FOL)");
}

TEST_CASE("a run is deterministic and labelled") {
    const auto cfg = tiny_config();
    const auto inputs = prepare_inputs(cfg);
    const auto a = run_experiment(cfg, inputs);
    const auto b = run_experiment(cfg, inputs);
    CHECK(a.record.val_map == b.record.val_map);
    CHECK(a.record.test_map == b.record.test_map);
    CHECK(a.record.setting == "POL(0.5)");
    CHECK(a.record.method == "Ours");
    CHECK(a.record.train_loss.size() == 4);

    const auto fol = tiny_config("loss=bce_fol\n");
    CHECK(run_experiment(fol, prepare_inputs(fol)).record.setting == "FOL");
}

TEST_CASE("sweep cardinality, tie-breaking and validation-only selection") {
    auto cfg = tiny_config("learning_rates=1,0.1,0.5,2\nbatch_sizes=16,8\n");
    auto inputs = prepare_inputs(cfg);
    const auto sweep = run_sweep(cfg, inputs);
    REQUIRE(sweep.grid.size() == 8);
    CHECK(sweep.selected.test_map.has_value());
    for (const auto& r : sweep.grid) CHECK_FALSE(r.test_map.has_value());
    double best = -1.0;
    for (const auto& r : sweep.grid) best = std::max(best, r.val_map);
    CHECK(sweep.selected.val_map == best);
    for (std::size_t a = 0; a < sweep.selected_index; ++a) CHECK(sweep.grid[a].val_map < best);
    CHECK(sweep.selected.method == "Ours [selected]");

    // Relabel the test set: selection and validation scores must not move.
    LabelMatrix flipped(inputs.test.num_instances(), inputs.test.num_classes());
    for (std::size_t i = 0; i < flipped.rows(); ++i)
        for (std::size_t j = 0; j < flipped.cols(); ++j) flipped.set(i, j, !inputs.test.labels()(i, j));
    inputs.test = Dataset(inputs.test.num_features(), inputs.test.feature_data(), flipped);
    const auto again = run_sweep(cfg, inputs);
    CHECK(again.selected_index == sweep.selected_index);
    for (std::size_t a = 0; a < 8; ++a) CHECK(again.grid[a].val_map == sweep.grid[a].val_map);
    CHECK(again.selected.test_map != sweep.selected.test_map);

    cfg.learning_rates.clear();
    CHECK_THROWS_AS(run_sweep(cfg, inputs), DataError);
}

TEST_CASE("one-point sweep equals a single run") {
    const auto cfg = tiny_config("learning_rates=0.5\nbatch_sizes=8\n");
    const auto inputs = prepare_inputs(cfg);
    const auto sweep = run_sweep(cfg, inputs);
    const auto single = run_experiment(cfg, inputs);
    CHECK(sweep.grid.size() == 1);
    CHECK(sweep.selected.test_map == single.record.test_map);
    CHECK(sweep.selected.val_map == single.record.val_map);
}

TEST_CASE("CSV rows round-trip and the header is written once") {
    RunRecord r = record("Ours (Without Update)", "POL(0.4)", 0.912345678912);
    r.seed = 42;
    r.epoch_best = 7;
    r.val_map = 0.5;
    r.wall_seconds = 1.25;
    RunRecord grid = r;
    grid.test_map.reset();

    const auto path = (std::filesystem::temp_directory_path() / "mlml_test_results.csv").string();
    std::filesystem::remove(path);
    append_csv(path, {r});
    append_csv(path, {grid});
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    CHECK(first == csv_header());
    in.seekg(0);
    const auto rows = read_csv(in);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].method == r.method);
    CHECK(rows[0].seed == 42);
    CHECK(rows[0].epoch_best == 7);
    CHECK(*rows[0].test_map == doctest::Approx(0.9123456789).epsilon(1e-12));
    CHECK_FALSE(rows[1].test_map.has_value());
    CHECK(csv_row(rows[0]) == csv_row(r));
    std::filesystem::remove(path);

    std::istringstream bad("wrong,header\n");
    CHECK_THROWS_AS(read_csv(bad), DataError);
    std::istringstream short_row(csv_header() + "\nabc,Ours,FOL\n");
    CHECK_THROWS_AS(read_csv(short_row), DataError);
}

TEST_CASE("report grid and curve") {
    const auto single = build_report({record("AN", "POL(0.4)", 0.8)});
    CHECK(single.table.find("80.0") != std::string::npos);
    CHECK(single.table.find("—") == std::string::npos);

    std::vector<RunRecord> rows{record("Ours [selected]", "POL(0.4)", 0.9), record("Ours", "POL(0.4)", 0.7),
                                record("Ours", "POL(0.4)", 0.8), record("AN", "SPL", 0.5)};
    const auto rep = build_report(rows);
    CHECK(rep.table.find("80.0") != std::string::npos);  // median of 0.7, 0.8, 0.9
    CHECK(rep.table.find("—") != std::string::npos);
    CHECK(rep.table.find("[selected]") == std::string::npos);

    std::vector<RunRecord> curve_rows;
    for (const char* s : {"POL(0.8)", "POL(0.05)", "POL(0.4)", "POL(0.1)", "POL(0.6)", "POL(0.2)", "FOL"})
        curve_rows.push_back(record("Ours", s, 0.9));
    const auto curve = build_report(curve_rows).curve;
    std::istringstream lines(curve);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "method,observed_percent,test_map");
    std::vector<double> xs;
    while (std::getline(lines, line)) {
        const auto a = line.find(',');
        xs.push_back(std::stod(line.substr(a + 1, line.find(',', a + 1) - a - 1)));
    }
    CHECK(xs == std::vector<double>{5, 10, 20, 40, 60, 80});
}

TEST_CASE("output directory override") {
    ::unsetenv(kOutputDirEnv);
    CHECK(resolve_output_dir("") == ".");
    CHECK(resolve_output_dir("out") == "out");
    ::setenv(kOutputDirEnv, "/tmp/mlml-override", 1);
    CHECK(resolve_output_dir("out") == "/tmp/mlml-override");
    ::unsetenv(kOutputDirEnv);
}
