#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mlml/rng.hpp"

namespace mlml {

/// Dense N x L binary ground-truth matrix, row-major.
class LabelMatrix {
public:
    LabelMatrix() = default;
    LabelMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    std::uint8_t operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    void set(std::size_t i, std::size_t j, bool positive) { data_[i * cols_ + j] = positive ? 1 : 0; }

    std::span<const std::uint8_t> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
    std::size_t row_positives(std::size_t i) const;

    bool operator==(const LabelMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint8_t> data_;
};

/// N instances of M real features plus their full label matrix.
class Dataset {
public:
    Dataset() = default;
    /// `features` is row-major N x M; throws ContractError on shape mismatch.
    Dataset(std::size_t num_features, std::vector<double> features, LabelMatrix labels);

    std::size_t num_instances() const noexcept { return labels_.rows(); }
    std::size_t num_features() const noexcept { return num_features_; }
    std::size_t num_classes() const noexcept { return labels_.cols(); }

    std::span<const double> features(std::size_t i) const {
        return {features_.data() + i * num_features_, num_features_};
    }
    const std::vector<double>& feature_data() const noexcept { return features_; }
    const LabelMatrix& labels() const noexcept { return labels_; }

    /// Copies the listed instances, in order, into a new dataset.
    Dataset subset(std::span<const std::size_t> indices) const;

    bool operator==(const Dataset&) const = default;

private:
    std::size_t num_features_ = 0;
    std::vector<double> features_;
    LabelMatrix labels_;
};

enum class Label : std::uint8_t { Negative = 0, Positive = 1, Missing = 2 };

struct Setting {
    enum class Kind { FOL, POL, PPL, SPL };

    Kind kind = Kind::FOL;
    /// p for POL, q for PPL; unused for FOL/SPL.
    double proportion = 1.0;

    static Setting fol() { return {Kind::FOL, 1.0}; }
    static Setting pol(double p) { return {Kind::POL, p}; }
    static Setting ppl(double q) { return {Kind::PPL, q}; }
    static Setting spl() { return {Kind::SPL, 1.0}; }

    /// Accepts "FOL", "SPL", "POL(0.4)", "POL:0.4", "PPL(0.6)", "PPL:0.6".
    static Setting parse(const std::string& text);
    /// Canonical form, e.g. "POL(0.4)". parse(name()) round-trips.
    std::string name() const;

    bool operator==(const Setting&) const = default;
};

/// Partially observed label matrix Z over {0, 1, missing}.
class ObservedLabelMatrix {
public:
    ObservedLabelMatrix() = default;
    ObservedLabelMatrix(std::size_t rows, std::size_t cols, Setting setting, RngSeed seed)
        : rows_(rows), cols_(cols), entries_(rows * cols, Label::Missing), setting_(setting), seed_(seed) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    Label operator()(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }
    void set(std::size_t i, std::size_t j, Label v) { entries_[i * cols_ + j] = v; }
    std::span<const Label> row(std::size_t i) const { return {entries_.data() + i * cols_, cols_}; }

    const Setting& setting() const noexcept { return setting_; }
    RngSeed seed() const noexcept { return seed_; }

    /// Instances whose ground truth had no positive under PPL/SPL; their
    /// rows are entirely missing.
    const std::vector<std::size_t>& flagged() const noexcept { return flagged_; }
    void flag(std::size_t i) { flagged_.push_back(i); }

    std::size_t observed_in_row(std::size_t i) const;
    std::size_t positives_in_row(std::size_t i) const;

    bool operator==(const ObservedLabelMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Label> entries_;
    Setting setting_;
    RngSeed seed_ = 0;
    std::vector<std::size_t> flagged_;
};

/// Observed matrix equal to the full ground truth.
ObservedLabelMatrix fully_observed(const LabelMatrix& labels);

struct LabelStats {
    double positives_per_instance = 0.0;  // P_p
    double observed_ratio = 0.0;          // m = T_o / T
    std::size_t observed = 0;             // T_o
    std::size_t total = 0;                // T = N * L
    std::size_t positives = 0;            // observed positives
    std::size_t negatives = 0;            // observed negatives
    double c1 = 0.0;                      // negatives / T_o, weights the positive term
    double c2 = 0.0;                      // positives / T_o, weights the negative term
};

/// Round-up count ceil(proportion * n), tolerant of representation error
/// in the product (0.1 * 30 yields 3, not 4).
std::size_t round_up_count(double proportion, std::size_t n);

/// Hides ground-truth entries according to `setting`. Deterministic per seed.
/// Throws ContractError for proportions outside (0, 1] and DataError when a
/// positive-only setting is requested on a dataset with no positives.
ObservedLabelMatrix corrupt(const LabelMatrix& labels, Setting setting, RngSeed seed);
inline ObservedLabelMatrix corrupt(const Dataset& dataset, Setting setting, RngSeed seed) {
    return corrupt(dataset.labels(), setting, seed);
}

/// Throws DataError when nothing is observed.
LabelStats compute_stats(const ObservedLabelMatrix& observed);

/// Observed-label counts in the total/per-instance layout.
struct StatsTable {
    std::string setting;
    std::size_t total_pos = 0;
    double per_pos = 0.0;
    std::size_t total_neg = 0;
    double per_neg = 0.0;

    std::string to_string() const;
};

StatsTable stats_report(const ObservedLabelMatrix& observed);

// Text formats. Dataset: header "mlml-dataset N M L", then one line per
// instance "<f1>,...,<fM> <labels over 01>". Observed: header
// "mlml-observed N M L <setting> <seed>", then lines
// "<f1>,...,<fM> <labels over 01u>".
void write_dataset(std::ostream& out, const Dataset& dataset);
Dataset read_dataset(std::istream& in);
void save_dataset(const std::string& path, const Dataset& dataset);
Dataset load_dataset(const std::string& path);

void write_observed(std::ostream& out, const ObservedLabelMatrix& observed, const Dataset& dataset);
/// Feature columns are checked for arity and otherwise ignored; the dataset
/// file stays the source of features.
ObservedLabelMatrix read_observed(std::istream& in);
void save_observed(const std::string& path, const ObservedLabelMatrix& observed, const Dataset& dataset);
ObservedLabelMatrix load_observed(const std::string& path);

}  // namespace mlml
