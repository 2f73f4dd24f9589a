#include "mlml/experiment.hpp"

#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "mlml/errors.hpp"
#include "mlml/metrics.hpp"

namespace mlml {

// ------------------------------------------------------------------ data

std::vector<double> DataSpec::resolved_prevalence() const {
    if (prevalence.empty()) return std::vector<double>(num_classes, 0.15);
    if (prevalence.size() == 1) return std::vector<double>(num_classes, prevalence.front());
    return prevalence;
}

GeneratedData gen_data(const DataSpec& spec) {
    require(spec.num_train >= 1 && spec.num_test >= 1, "gen_data: need at least one train and one test instance");
    require(spec.num_features >= 1 && spec.num_classes >= 1, "gen_data: M and L must be >= 1");
    require(spec.noise >= 0.0, "gen_data: noise level must be non-negative");
    const auto pi = spec.resolved_prevalence();
    require(pi.size() == spec.num_classes, "gen_data: prevalence vector must have L entries");
    for (double p : pi) require(p >= 0.0 && p <= 1.0, "gen_data: prevalences must lie in [0, 1]");

    const std::size_t m = spec.num_features;
    const std::size_t l = spec.num_classes;
    RngStream rng(spec.seed, "data");

    GeneratedData out;
    out.prototypes.resize(l);
    for (auto& proto : out.prototypes) {
        double norm = 0.0;
        do {
            proto.assign(m, 0.0);
            norm = 0.0;
            for (double& v : proto) {
                v = rng.normal();
                norm += v * v;
            }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        for (double& v : proto) v /= norm;
    }

    auto make = [&](std::size_t n) {
        std::vector<double> feats(n * m, 0.0);
        LabelMatrix labels(n, l);
        for (std::size_t i = 0; i < n; ++i) {
            double* x = feats.data() + i * m;
            for (std::size_t k = 0; k < l; ++k) {
                if (!rng.bernoulli(pi[k])) continue;
                labels.set(i, k, true);
                for (std::size_t c = 0; c < m; ++c) x[c] += out.prototypes[k][c];
            }
            if (spec.noise > 0.0)
                for (std::size_t c = 0; c < m; ++c) x[c] += spec.noise * rng.normal();
        }
        return Dataset(m, std::move(feats), std::move(labels));
    };
    out.train = make(spec.num_train);
    out.test = make(spec.num_test);
    return out;
}

// ---------------------------------------------------------------- config

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "': not a number: " + v);
    }
}

long long to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        long long d = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "': not an integer: " + v);
    }
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in) {
    KeyValueConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError("config line " + std::to_string(lineno) + ": expected key=value");
        cfg.values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config: " + path);
    return parse(in);
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : to_double(key, it->second);
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : to_int(key, it->second);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw DataError("config key '" + key + "': not a boolean: " + v);
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(get(key, ""))) out.push_back(to_double(key, item));
    return out;
}

std::vector<long long> KeyValueConfig::get_ints(const std::string& key) const {
    std::vector<long long> out;
    for (const auto& item : split_list(get(key, ""))) out.push_back(to_int(key, item));
    return out;
}

void KeyValueConfig::check_known(const std::vector<std::string>& known) const {
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [k, v] : values_)
        if (!allowed.count(k)) throw DataError("unknown config key: " + k);
}

const std::vector<std::string>& experiment_config_keys() {
    static const std::vector<std::string> keys = {
        "seed", "data_seed", "corruption_seed", "n_train", "n_test", "num_features", "num_classes", "prevalence",
        "noise", "setting", "loss", "model", "hidden", "epochs", "learning_rate", "batch_size", "alpha", "beta",
        "threshold", "threshold_pseudo", "clamp_eps", "stack_size", "ambiguity", "window_start", "window_end",
        "wan_gamma", "ls_epsilon", "focal_alpha_pos", "focal_alpha_neg", "focal_gamma", "asl_gamma_pos",
        "asl_gamma_neg", "asl_margin", "no_running_average", "no_disturbance", "no_imbalance_weights",
        "no_weighted_schedule", "validation_fraction", "validate_on_observed", "learning_rates", "batch_sizes",
        "train_file", "test_file", "observed_file", "output_dir", "results_csv", "checkpoint"};
    return keys;
}

ExperimentConfig ExperimentConfig::from_key_values(const KeyValueConfig& kv) {
    kv.check_known(experiment_config_keys());
    ExperimentConfig c;
    const auto master = static_cast<RngSeed>(kv.get_int("seed", 0));

    c.data.seed = static_cast<RngSeed>(kv.get_int("data_seed", static_cast<long long>(master)));
    c.data.num_train = static_cast<std::size_t>(kv.get_int("n_train", 2000));
    c.data.num_test = static_cast<std::size_t>(kv.get_int("n_test", 1000));
    c.data.num_features = static_cast<std::size_t>(kv.get_int("num_features", 32));
    c.data.num_classes = static_cast<std::size_t>(kv.get_int("num_classes", 10));
    c.data.prevalence = kv.get_doubles("prevalence");
    c.data.noise = kv.get_double("noise", 0.3);

    c.setting = Setting::parse(kv.get("setting", "FOL"));
    c.corruption_seed = static_cast<RngSeed>(kv.get_int("corruption_seed", static_cast<long long>(master)));

    TrainConfig& t = c.train;
    t.seed = master;
    t.loss = parse_loss_choice(kv.get("loss", "proposed"));
    t.model_kind = parse_model_kind(kv.get("model", "linear"));
    t.hidden = static_cast<std::size_t>(kv.get_int("hidden", 64));
    t.epochs = static_cast<int>(kv.get_int("epochs", 10));
    t.learning_rate = kv.get_double("learning_rate", t.learning_rate);
    t.batch_size = static_cast<std::size_t>(kv.get_int("batch_size", static_cast<long long>(t.batch_size)));
    t.loss_params.alpha = kv.get_double("alpha", 0.95);
    t.loss_params.beta = kv.get_double("beta", 0.05);
    t.loss_params.threshold = kv.get_double("threshold", 0.7);
    t.threshold_pseudo_labels = kv.get_bool("threshold_pseudo", true);
    t.loss_params.clamp_eps = kv.get_double("clamp_eps", kDefaultClampEps);
    t.loss_params.wan_gamma = kv.get_double("wan_gamma", 0.0);  // 0 selects 1 / (L - 1)
    t.loss_params.ls_epsilon = kv.get_double("ls_epsilon", 0.1);
    t.loss_params.focal.alpha_pos = kv.get_double("focal_alpha_pos", 0.9);
    t.loss_params.focal.alpha_neg = kv.get_double("focal_alpha_neg", 0.1);
    t.loss_params.focal.gamma = kv.get_double("focal_gamma", 2.0);
    t.loss_params.asl.gamma_pos = kv.get_double("asl_gamma_pos", 8.0);
    t.loss_params.asl.gamma_neg = kv.get_double("asl_gamma_neg", 1.0);
    t.loss_params.asl.margin = kv.get_double("asl_margin", 0.05);
    t.pseudo.capacity = static_cast<std::size_t>(kv.get_int("stack_size", 3));
    t.pseudo.ambiguity_half_width = kv.get_double("ambiguity", 0.2);
    t.pseudo.window_start = static_cast<int>(kv.get_int("window_start", 3));
    t.pseudo.window_end = static_cast<int>(kv.get_int("window_end", 7));
    t.ablation.no_running_average = kv.get_bool("no_running_average", false);
    t.ablation.no_disturbance = kv.get_bool("no_disturbance", false);
    t.ablation.no_imbalance_weights = kv.get_bool("no_imbalance_weights", false);
    t.ablation.no_weighted_schedule = kv.get_bool("no_weighted_schedule", false);

    c.validation_fraction = kv.get_double("validation_fraction", 0.2);
    c.validate_on_observed = kv.get_bool("validate_on_observed", false);
    c.learning_rates = kv.get_doubles("learning_rates");
    for (long long b : kv.get_ints("batch_sizes")) {
        if (b < 1) throw DataError("batch_sizes entries must be >= 1");
        c.batch_sizes.push_back(static_cast<std::size_t>(b));
    }

    c.train_file = kv.get("train_file", "");
    c.test_file = kv.get("test_file", "");
    c.observed_file = kv.get("observed_file", "");
    c.output_dir = kv.get("output_dir", "");
    c.results_csv = kv.get("results_csv", "");
    c.checkpoint = kv.get("checkpoint", "");

    if (t.epochs < 1) throw DataError("epochs must be >= 1");
    if (t.batch_size < 1) throw DataError("batch_size must be >= 1");
    if (!(t.learning_rate >= 0.0)) throw DataError("learning_rate must be non-negative");
    if (!(c.validation_fraction > 0.0 && c.validation_fraction < 1.0))
        throw DataError("validation_fraction must lie in (0, 1)");
    return c;
}

std::string ExperimentConfig::canonical() const {
    std::ostringstream out;
    const auto& t = train;
    const auto& lp = t.loss_params;
    out << "n_train=" << data.num_train << "\nn_test=" << data.num_test << "\nnum_features=" << data.num_features
        << "\nnum_classes=" << data.num_classes << "\nprevalence=";
    for (std::size_t k = 0; k < data.prevalence.size(); ++k) out << (k ? "," : "") << fmt(data.prevalence[k]);
    out << "\nnoise=" << fmt(data.noise) << "\ndata_seed=" << data.seed << "\nsetting=" << setting.name()
        << "\ncorruption_seed=" << corruption_seed << "\nseed=" << t.seed << "\nloss=" << to_string(t.loss)
        << "\nmodel=" << to_string(t.model_kind) << "\nhidden=" << t.hidden << "\nepochs=" << t.epochs
        << "\nlearning_rate=" << fmt(t.learning_rate) << "\nbatch_size=" << t.batch_size << "\nalpha=" << fmt(lp.alpha)
        << "\nbeta=" << fmt(lp.beta) << "\nthreshold=" << fmt(lp.threshold)
        << "\nthreshold_pseudo=" << t.threshold_pseudo_labels << "\nclamp_eps=" << fmt(lp.clamp_eps)
        << "\nwan_gamma=" << fmt(lp.wan_gamma) << "\nls_epsilon=" << fmt(lp.ls_epsilon)
        << "\nfocal=" << fmt(lp.focal.alpha_pos) << ',' << fmt(lp.focal.alpha_neg) << ',' << fmt(lp.focal.gamma)
        << "\nasl=" << fmt(lp.asl.gamma_pos) << ',' << fmt(lp.asl.gamma_neg) << ',' << fmt(lp.asl.margin)
        << "\nstack_size=" << t.pseudo.capacity << "\nambiguity=" << fmt(t.pseudo.ambiguity_half_width)
        << "\nwindow=" << t.pseudo.window_start << ',' << t.pseudo.window_end
        << "\nablation=" << t.ablation.no_running_average << t.ablation.no_disturbance
        << t.ablation.no_imbalance_weights << t.ablation.no_weighted_schedule
        << "\nvalidation_fraction=" << fmt(validation_fraction) << "\nvalidate_on_observed=" << validate_on_observed
        << "\ntrain_file=" << train_file << "\ntest_file=" << test_file << "\nobserved_file=" << observed_file << '\n';
    return out.str();
}

std::string ExperimentConfig::hash() const {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char ch : canonical()) {
        h ^= ch;
        h *= 0x100000001B3ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ------------------------------------------------------------------ runs

std::string method_label(const TrainConfig& config) {
    std::string name = display_name(config.loss);
    if (config.ablation.any()) name += " (" + config.ablation.label() + ")";
    return name;
}

TrainValSplit split_validation(std::size_t n, double fraction, RngSeed seed) {
    require(fraction > 0.0 && fraction < 1.0, "split_validation: fraction must lie in (0, 1)");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream rng(seed, "validation");
    rng.shuffle(std::span<std::size_t>(order));
    std::size_t n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    n_val = std::clamp<std::size_t>(n_val, n > 1 ? 1 : 0, n > 0 ? n - 1 : 0);
    TrainValSplit split;
    split.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    split.fit.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.fit.begin(), split.fit.end());
    return split;
}

ExperimentInputs prepare_inputs(const ExperimentConfig& config) {
    ExperimentInputs in;
    if (config.train_file.empty() || config.test_file.empty()) {
        auto gen = gen_data(config.data);
        in.pool = config.train_file.empty() ? std::move(gen.train) : load_dataset(config.train_file);
        in.test = config.test_file.empty() ? std::move(gen.test) : load_dataset(config.test_file);
    } else {
        in.pool = load_dataset(config.train_file);
        in.test = load_dataset(config.test_file);
    }
    if (in.pool.num_classes() != in.test.num_classes() || in.pool.num_features() != in.test.num_features())
        throw DataError("train and test sets differ in shape");
    if (!config.observed_file.empty()) {
        in.observed = load_observed(config.observed_file);
        if (in.observed.rows() != in.pool.num_instances() || in.observed.cols() != in.pool.num_classes())
            throw DataError("observed-label file does not match the training set");
    } else {
        in.observed = corrupt(in.pool, config.setting, config.corruption_seed);
    }
    return in;
}

namespace {

ObservedLabelMatrix observed_subset(const ObservedLabelMatrix& obs, std::span<const std::size_t> rows) {
    ObservedLabelMatrix out(rows.size(), obs.cols(), obs.setting(), obs.seed());
    const auto& flagged = obs.flagged();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t j = 0; j < obs.cols(); ++j) out.set(r, j, obs(rows[r], j));
        if (std::binary_search(flagged.begin(), flagged.end(), rows[r])) out.flag(r);
    }
    return out;
}

LabelMatrix observed_as_labels(const ObservedLabelMatrix& obs) {
    LabelMatrix out(obs.rows(), obs.cols());
    for (std::size_t i = 0; i < obs.rows(); ++i)
        for (std::size_t j = 0; j < obs.cols(); ++j) out.set(i, j, obs(i, j) == Label::Positive);
    return out;
}

bool uses_full_labels(LossChoice loss) { return loss == LossChoice::BceFol || loss == LossChoice::BceLsFol; }

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& config, const ExperimentInputs& inputs, bool evaluate_test) {
    const auto started = std::chrono::steady_clock::now();
    const auto split = split_validation(inputs.pool.num_instances(), config.validation_fraction, config.train.seed);
    const Dataset fit = inputs.pool.subset(split.fit);
    const Dataset val = inputs.pool.subset(split.validation);

    TrainConfig tc = config.train;
    const std::size_t l = fit.num_classes();
    if (tc.loss_params.wan_gamma <= 0.0) tc.loss_params.wan_gamma = l > 1 ? 1.0 / static_cast<double>(l - 1) : 1.0;

    const bool full = uses_full_labels(tc.loss);
    const ObservedLabelMatrix fit_obs = full ? fully_observed(fit.labels()) : observed_subset(inputs.observed, split.fit);

    std::optional<LabelMatrix> val_override;
    if (config.validate_on_observed && !full)
        val_override = observed_as_labels(observed_subset(inputs.observed, split.validation));

    RunOutcome out;
    out.training = run_training(fit, fit_obs, val, tc, nullptr, val_override ? &*val_override : nullptr);

    RunRecord& rec = out.record;
    rec.config_hash = config.hash();
    rec.method = method_label(tc);
    rec.setting = full ? "FOL" : inputs.observed.setting().name();
    rec.seed = tc.seed;
    rec.epoch_best = out.training.best_epoch;
    rec.val_map = out.training.best_val_map;
    for (const auto& e : out.training.history) {
        rec.train_loss.push_back(e.train_loss);
        rec.val_map_history.push_back(e.val_map);
    }
    if (evaluate_test) rec.test_map = mean_ap(predict(out.training.best_model, inputs.test), inputs.test.labels()).mean_ap;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return out;
}

SweepOutcome run_sweep(const ExperimentConfig& config, const ExperimentInputs& inputs) {
    if (config.learning_rates.empty() || config.batch_sizes.empty())
        throw DataError("sweep: learning_rates and batch_sizes must both be non-empty");
    std::vector<double> lrs = config.learning_rates;
    std::vector<std::size_t> bss = config.batch_sizes;
    std::sort(lrs.begin(), lrs.end());
    std::sort(bss.begin(), bss.end());

    SweepOutcome out;
    std::optional<ScoringModel> best_model;
    double best_val = -1.0;
    for (double lr : lrs) {
        for (std::size_t bs : bss) {
            ExperimentConfig point = config;
            point.train.learning_rate = lr;
            point.train.batch_size = bs;
            RunOutcome run = run_experiment(point, inputs, false);
            // Strict improvement keeps the earlier (lower lr, then smaller batch) point on ties.
            if (run.record.val_map > best_val) {
                best_val = run.record.val_map;
                out.selected_index = out.grid.size();
                best_model = run.training.best_model;
            }
            out.grid.push_back(std::move(run.record));
        }
    }
    out.selected = out.grid[out.selected_index];
    out.selected.method += kSelectedSuffix;
    out.selected.test_map = mean_ap(predict(*best_model, inputs.test), inputs.test.labels()).mean_ap;
    return out;
}

// ------------------------------------------------------------------- CSV

std::string csv_header() { return "config_hash,method,setting,seed,epoch_best,val_map,test_map,wall_s"; }

std::string csv_row(const RunRecord& r) {
    char buf[64];
    std::ostringstream out;
    out << r.config_hash << ',' << r.method << ',' << r.setting << ',' << r.seed << ',' << r.epoch_best << ',';
    std::snprintf(buf, sizeof buf, "%.10f", r.val_map);
    out << buf << ',';
    if (r.test_map) {
        std::snprintf(buf, sizeof buf, "%.10f", *r.test_map);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "%.3f", r.wall_seconds);
    out << ',' << buf;
    return out.str();
}

void append_csv(const std::string& path, const std::vector<RunRecord>& records) {
    std::FILE* f = std::fopen(path.c_str(), "a+");
    if (!f) throw DataError("cannot open results CSV: " + path);
    const int fd = fileno(f);
    if (flock(fd, LOCK_EX) != 0) {
        std::fclose(f);
        throw DataError("cannot lock results CSV: " + path);
    }
    std::string text;
    std::fseek(f, 0, SEEK_END);
    if (std::ftell(f) == 0) text += csv_header() + "\n";
    for (const auto& r : records) text += csv_row(r) + "\n";
    const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size() && std::fflush(f) == 0;
    flock(fd, LOCK_UN);
    std::fclose(f);
    if (!ok) throw DataError("write failed: " + path);
}

std::vector<RunRecord> read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("results CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != csv_header()) throw DataError("results CSV: unexpected header: " + line);
    std::vector<RunRecord> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ',')) f.push_back(item);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        if (f.size() != 8) throw DataError("results CSV line " + std::to_string(lineno) + ": expected 8 fields");
        RunRecord r;
        try {
            r.config_hash = f[0];
            r.method = f[1];
            r.setting = f[2];
            r.seed = std::stoull(f[3]);
            r.epoch_best = std::stoi(f[4]);
            r.val_map = std::stod(f[5]);
            if (!f[6].empty()) r.test_map = std::stod(f[6]);
            r.wall_seconds = std::stod(f[7]);
        } catch (const std::exception&) {
            throw DataError("results CSV line " + std::to_string(lineno) + ": malformed field");
        }
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------- report

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Sort key: FOL, POL by proportion, PPL by proportion, SPL, anything else.
std::pair<int, double> setting_order(const std::string& name) {
    try {
        const Setting s = Setting::parse(name);
        switch (s.kind) {
            case Setting::Kind::FOL: return {0, 0.0};
            case Setting::Kind::POL: return {1, s.proportion};
            case Setting::Kind::PPL: return {2, s.proportion};
            case Setting::Kind::SPL: return {3, 0.0};
        }
    } catch (const std::exception&) {
    }
    return {4, 0.0};
}

}  // namespace

Report build_report(const std::vector<RunRecord>& records) {
    std::vector<std::string> methods, settings;
    std::map<std::pair<std::string, std::string>, std::vector<double>> cells;
    for (const auto& r : records) {
        if (!r.test_map) continue;
        std::string method = r.method;
        const std::string suffix = kSelectedSuffix;
        if (method.size() > suffix.size() && method.compare(method.size() - suffix.size(), suffix.size(), suffix) == 0)
            method.erase(method.size() - suffix.size());
        if (std::find(methods.begin(), methods.end(), method) == methods.end()) methods.push_back(method);
        if (std::find(settings.begin(), settings.end(), r.setting) == settings.end()) settings.push_back(r.setting);
        cells[{method, r.setting}].push_back(*r.test_map);
    }
    std::stable_sort(settings.begin(), settings.end(),
                     [](const std::string& a, const std::string& b) { return setting_order(a) < setting_order(b); });

    std::size_t width = 6;
    for (const auto& m : methods) width = std::max(width, m.size());
    std::ostringstream table;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(width), "");
    table << buf;
    for (const auto& s : settings) {
        std::snprintf(buf, sizeof buf, " | %-9s", s.c_str());
        table << buf;
    }
    table << '\n';
    for (const auto& m : methods) {
        std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(width), m.c_str());
        table << buf;
        for (const auto& s : settings) {
            auto it = cells.find({m, s});
            if (it == cells.end()) {
                table << " | —        ";  // em dash fills the cell
            } else {
                std::snprintf(buf, sizeof buf, " | %-9.1f", 100.0 * median(it->second));
                table << buf;
            }
        }
        table << '\n';
    }

    std::ostringstream curve;
    curve << "method,observed_percent,test_map\n";
    for (const auto& m : methods) {
        std::vector<std::pair<double, double>> points;
        for (const auto& s : settings) {
            auto it = cells.find({m, s});
            if (it == cells.end()) continue;
            const auto order = setting_order(s);
            if (order.first != 1) continue;
            points.emplace_back(100.0 * order.second, median(it->second));
        }
        std::sort(points.begin(), points.end());
        for (const auto& [x, y] : points) {
            std::snprintf(buf, sizeof buf, ",%g,%.10f\n", x, y);
            curve << m << buf;
        }
    }
    return {table.str(), curve.str()};
}

std::string resolve_output_dir(const std::string& configured) {
    if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return env;
    return configured.empty() ? "." : configured;
}

}  // namespace mlml
