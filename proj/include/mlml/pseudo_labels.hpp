#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "mlml/label_space.hpp"
#include "mlml/rng.hpp"

namespace mlml {

struct PseudoConfig {
    std::size_t capacity = 3;            // n: prediction-history length
    double ambiguity_half_width = 0.2;   // d: ambiguous band is [0.5 - d, 0.5 + d]
    int window_start = 3;                // D_s: updates only when D_s < epoch < D_e
    int window_end = 7;                  // D_e
    bool disturbance = true;             // false: never inject disturbance

    bool operator==(const PseudoConfig&) const = default;
};

/// Initial soft target for every unobserved class of an instance with
/// `observed_positives` observed positives and `unobserved` missing
/// entries: min((max(P_p / m, 1) - P_i) / T_ui, 1) when the expected
/// count exceeds P_i, otherwise 0. Throws DataError when m <= 0.
double initial_pseudo_value(double positives_per_instance, double observed_ratio, std::size_t observed_positives,
                            std::size_t unobserved);

/// Pushes an ambiguous prediction away from 0.5: below 0.5 it moves down by
/// u ~ U(0, p), otherwise up by v ~ U(0, 1 - p). Predictions of exactly 0
/// or 1 are returned unchanged.
double inject_disturbance(double prediction, RngStream& rng);

/// Pseudo labels and prediction histories for every unobserved
/// (instance, class) pair. Keys are fixed at construction from the
/// observed matrix; single writer.
class PseudoState {
public:
    PseudoState() = default;

    static PseudoState init(const LabelStats& stats, const ObservedLabelMatrix& observed, PseudoConfig config = {});

    std::size_t num_instances() const noexcept { return row_offset_.empty() ? 0 : row_offset_.size() - 1; }
    std::size_t size() const noexcept { return classes_.size(); }
    const PseudoConfig& config() const noexcept { return config_; }

    /// Unobserved class indices of instance i, ascending.
    std::span<const std::size_t> classes(std::size_t i) const;
    /// Pseudo values of instance i, aligned with classes(i).
    std::span<const double> values(std::size_t i) const;

    bool contains(std::size_t i, std::size_t j) const;
    double value(std::size_t i, std::size_t j) const { return values_[key(i, j)]; }
    /// History for (i, j), oldest first.
    std::vector<double> stack(std::size_t i, std::size_t j) const;

    /// FIFO push with eviction of the oldest entry when full. Throws
    /// ContractError for non-keys and predictions outside [0, 1].
    void record_prediction(std::size_t i, std::size_t j, double prediction);
    /// True iff the history is full and every entry is within the ambiguous band.
    bool detect_ambiguous(std::size_t i, std::size_t j) const;
    /// One step of the windowed update: outside (D_s, D_e) nothing changes;
    /// inside, the prediction is recorded and the value becomes either a
    /// disturbed prediction (ambiguous history) or the history mean.
    void update(std::size_t i, std::size_t j, double prediction, int epoch, RngStream& rng);

    void write_checkpoint(std::ostream& out, int epoch) const;
    /// Returns the state and stores the recorded epoch in `epoch`.
    static PseudoState read_checkpoint(std::istream& in, int& epoch);

    /// Compares configuration, keys, values and logical stack contents.
    bool operator==(const PseudoState& other) const;

private:
    std::size_t key(std::size_t i, std::size_t j) const;
    std::size_t find(std::size_t i, std::size_t j) const;
    double stack_mean(std::size_t k) const;

    PseudoConfig config_;
    std::vector<std::size_t> row_offset_;  // N + 1 prefix offsets into the key arrays
    std::vector<std::size_t> classes_;
    std::vector<double> values_;
    std::vector<double> history_;          // size() * capacity ring buffers
    std::vector<std::size_t> head_;        // slot of the oldest entry
    std::vector<std::size_t> count_;
};

}  // namespace mlml
