#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlml/label_space.hpp"
#include "mlml/losses.hpp"
#include "mlml/model.hpp"
#include "mlml/pseudo_labels.hpp"
#include "mlml/rng.hpp"

namespace mlml {

enum class LossChoice { Proposed, AN, WAN, Focal, ASL, BceFol, BceLsFol };

std::string to_string(LossChoice choice);
LossChoice parse_loss_choice(const std::string& text);
/// Row label used in result tables, e.g. "BCE (FOL)".
std::string display_name(LossChoice choice);

struct Ablation {
    bool no_running_average = false;    // pseudo value tracks the latest prediction only
    bool no_disturbance = false;
    bool no_imbalance_weights = false;  // C1 = C2 = 1 in the unobserved loss
    bool no_weighted_schedule = false;  // observed/unobserved weights fixed at (1, 1)

    bool any() const { return no_running_average || no_disturbance || no_imbalance_weights || no_weighted_schedule; }
    /// "Without Update", "Without Disturbances", ... joined by " + ";
    /// empty when no flag is set.
    std::string label() const;
    bool operator==(const Ablation&) const = default;
};

struct TrainConfig {
    int epochs = 10;
    double learning_rate = 0.1;
    std::size_t batch_size = 8;
    LossChoice loss = LossChoice::Proposed;
    Ablation ablation;
    RngSeed seed = 0;
    ModelKind model_kind = ModelKind::Linear;
    std::size_t hidden = 64;
    LossParams loss_params;  // c1/c2 are overwritten from the observed statistics
    PseudoConfig pseudo;
    bool threshold_pseudo_labels = true;
    int stop_epoch = 0;  // > 0: return after this many epochs, for checkpointing mid-run
};

/// Focal and ASL are class sums rather than means, so their step size is
/// divided by L to keep one learning-rate grid across losses.
double effective_learning_rate(const TrainConfig& config, std::size_t num_classes);

/// Loss parameters actually used for a run: c1/c2 from the statistics (or
/// 1/1 under no_imbalance_weights).
LossParams resolve_loss_params(const TrainConfig& config, const LabelStats& stats);
/// Pseudo-label configuration after ablations (capacity 1 without the
/// running average, no disturbance when disabled).
PseudoConfig resolve_pseudo_config(const TrainConfig& config);

/// Per-instance loss over all L logits for the configured method.
/// `pseudo` may be null for baseline losses; for the proposed loss it
/// supplies the unobserved targets of instance `index`.
LossBundle instance_loss(std::span<const double> logits, std::span<const Label> observed_row, std::size_t index,
                         const PseudoState* pseudo, const TrainConfig& config, const LossParams& params, int epoch);

/// One SGD step on a single instance followed by the pseudo-label pass
/// over its unobserved classes. Returns the instance loss before the step.
double train_instance(ScoringModel& model, std::span<const double> features, std::span<const Label> observed_row,
                      std::size_t index, PseudoState* pseudo, const TrainConfig& config, const LossParams& params,
                      int epoch, RngStream& disturbance_rng);

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_map = 0.0;
};

struct TrainResult {
    ScoringModel best_model;   // parameters after the epoch with the best validation mAP
    ScoringModel final_model;  // parameters after the last epoch
    int best_epoch = 0;
    double best_val_map = 0.0;
    std::vector<EpochRecord> history;
    PseudoState pseudo;
};

/// Continuation point for run_training.
struct ResumeState {
    ScoringModel model;
    PseudoState pseudo;
    int next_epoch = 0;
};

/// Trains for config.epochs epochs over seeded shuffles of `train`,
/// evaluating mAP on `validation` after every epoch. `validation_labels`
/// overrides the validation ground truth (used to validate on observed
/// labels only). Throws DataError for an empty training set.
TrainResult run_training(const Dataset& train, const ObservedLabelMatrix& observed, const Dataset& validation,
                         const TrainConfig& config, const ResumeState* resume = nullptr,
                         const LabelMatrix* validation_labels = nullptr);

/// Row-major N x L predicted probabilities.
std::vector<double> predict(const ScoringModel& model, const Dataset& data);

}  // namespace mlml
