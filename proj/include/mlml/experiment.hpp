#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mlml/label_space.hpp"
#include "mlml/rng.hpp"
#include "mlml/trainer.hpp"

namespace mlml {

/// Synthetic benchmark description. Each class k owns a unit-norm
/// prototype; an instance sums the prototypes of its positive classes and
/// adds isotropic Gaussian noise.
struct DataSpec {
    std::size_t num_train = 2000;
    std::size_t num_test = 1000;
    std::size_t num_features = 32;
    std::size_t num_classes = 10;
    std::vector<double> prevalence;  // per class; empty means 0.15 everywhere
    double noise = 0.3;
    RngSeed seed = 0;

    std::vector<double> resolved_prevalence() const;
};

struct GeneratedData {
    Dataset train;
    Dataset test;
    std::vector<std::vector<double>> prototypes;
};

/// Throws ContractError for sizes < 1 or prevalences outside [0, 1].
GeneratedData gen_data(const DataSpec& spec);

/// Flat key=value configuration. Lines starting with '#' are comments.
/// List values are comma separated.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::istream& in);
    static KeyValueConfig load(const std::string& path);

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::string get(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& key) const;
    std::vector<long long> get_ints(const std::string& key) const;
    const std::map<std::string, std::string>& values() const noexcept { return values_; }

    /// Throws DataError naming the first key not in `known`.
    void check_known(const std::vector<std::string>& known) const;

private:
    std::map<std::string, std::string> values_;
};

struct ExperimentConfig {
    DataSpec data;
    Setting setting = Setting::fol();
    RngSeed corruption_seed = 0;
    TrainConfig train;
    double validation_fraction = 0.2;
    bool validate_on_observed = false;
    std::vector<double> learning_rates;   // sweep grid
    std::vector<std::size_t> batch_sizes; // sweep grid

    // File locations; empty means "generate in memory".
    std::string train_file;
    std::string test_file;
    std::string observed_file;
    std::string output_dir;
    std::string results_csv;
    std::string checkpoint;

    /// Reads every documented key; unknown keys are rejected.
    static ExperimentConfig from_key_values(const KeyValueConfig& kv);
    /// Canonical key=value text of every field that affects results.
    std::string canonical() const;
    /// 16-hex-digit FNV-1a hash of canonical().
    std::string hash() const;
};

/// Keys accepted by ExperimentConfig::from_key_values.
const std::vector<std::string>& experiment_config_keys();

struct RunRecord {
    std::string config_hash;
    std::string method;
    std::string setting;
    RngSeed seed = 0;
    int epoch_best = 0;
    double val_map = 0.0;
    std::optional<double> test_map;
    double wall_seconds = 0.0;
    std::vector<double> train_loss;
    std::vector<double> val_map_history;
};

/// "Ours", "BCE (FOL)", "Ours (Without Update)", ...
std::string method_label(const TrainConfig& config);

/// Splits `train` into fit and validation parts (seeded, by fraction).
struct TrainValSplit {
    std::vector<std::size_t> fit;
    std::vector<std::size_t> validation;
};
TrainValSplit split_validation(std::size_t n, double fraction, RngSeed seed);

/// Prepared inputs of a run: the pool and test sets plus the one-time
/// corruption of the pool.
struct ExperimentInputs {
    Dataset pool;
    Dataset test;
    ObservedLabelMatrix observed;  // covers every pool instance
};

/// Loads the files named in the config, or generates and corrupts in memory.
ExperimentInputs prepare_inputs(const ExperimentConfig& config);

struct RunOutcome {
    RunRecord record;
    TrainResult training;
};

/// Trains on the fit split, selects the best epoch on validation and
/// evaluates that model on the test set when `evaluate_test` is set.
RunOutcome run_experiment(const ExperimentConfig& config, const ExperimentInputs& inputs, bool evaluate_test = true);

struct SweepOutcome {
    std::vector<RunRecord> grid;  // one per (learning_rate, batch_size), test_map unset
    RunRecord selected;           // best validation mAP, test_map set
    std::size_t selected_index = 0;
};

/// Arg-max validation mAP over the grid; ties go to the lower learning
/// rate, then the smaller batch. Throws DataError for an empty grid.
SweepOutcome run_sweep(const ExperimentConfig& config, const ExperimentInputs& inputs);

// CSV with the fixed header
//   config_hash,method,setting,seed,epoch_best,val_map,test_map,wall_s
std::string csv_header();
std::string csv_row(const RunRecord& record);
/// Appends rows under an exclusive file lock, writing the header first
/// when the file is new or empty.
void append_csv(const std::string& path, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_csv(std::istream& in);

/// Marker appended to the method of a sweep's selection row.
inline constexpr const char* kSelectedSuffix = " [selected]";

struct Report {
    std::string table;  // methods x settings grid of test mAP x 100
    std::string curve;  // CSV: method,observed_percent,test_map for POL settings
};

/// Medians over repeated (method, setting) rows; grid rows without a test
/// mAP are ignored; missing cells render as an em dash.
Report build_report(const std::vector<RunRecord>& records);

/// Environment variable overriding the output directory.
inline constexpr const char* kOutputDirEnv = "MLML_OUTPUT_DIR";
std::string resolve_output_dir(const std::string& configured);

}  // namespace mlml
