#include "mlml/trainer.hpp"

#include <algorithm>
#include <numeric>

#include "mlml/errors.hpp"
#include "mlml/metrics.hpp"

namespace mlml {

std::string to_string(LossChoice choice) {
    switch (choice) {
        case LossChoice::Proposed: return "proposed";
        case LossChoice::AN: return "an";
        case LossChoice::WAN: return "wan";
        case LossChoice::Focal: return "focal";
        case LossChoice::ASL: return "asl";
        case LossChoice::BceFol: return "bce_fol";
        case LossChoice::BceLsFol: return "bce_ls_fol";
    }
    return "?";
}

LossChoice parse_loss_choice(const std::string& text) {
    for (auto c : {LossChoice::Proposed, LossChoice::AN, LossChoice::WAN, LossChoice::Focal, LossChoice::ASL,
                   LossChoice::BceFol, LossChoice::BceLsFol})
        if (to_string(c) == text) return c;
    throw DataError("unknown loss choice: " + text);
}

std::string display_name(LossChoice choice) {
    switch (choice) {
        case LossChoice::Proposed: return "Ours";
        case LossChoice::AN: return "AN";
        case LossChoice::WAN: return "WAN";
        case LossChoice::Focal: return "Focal";
        case LossChoice::ASL: return "ASL";
        case LossChoice::BceFol: return "BCE (FOL)";
        case LossChoice::BceLsFol: return "BCE-LS (FOL)";
    }
    return "?";
}

std::string Ablation::label() const {
    std::string out;
    auto add = [&](bool flag, const char* name) {
        if (!flag) return;
        if (!out.empty()) out += " + ";
        out += name;
    };
    add(no_running_average, "Without Update");
    add(no_disturbance, "Without Disturbances");
    add(no_imbalance_weights, "Without Imbalance Design");
    add(no_weighted_schedule, "Without Weighted Loss");
    return out;
}

double effective_learning_rate(const TrainConfig& config, std::size_t num_classes) {
    if (config.loss == LossChoice::Focal || config.loss == LossChoice::ASL)
        return config.learning_rate / static_cast<double>(std::max<std::size_t>(num_classes, 1));
    return config.learning_rate;
}

LossParams resolve_loss_params(const TrainConfig& config, const LabelStats& stats) {
    LossParams p = config.loss_params;
    if (config.ablation.no_imbalance_weights) {
        p.c1 = 1.0;
        p.c2 = 1.0;
    } else {
        p.c1 = stats.c1;
        p.c2 = stats.c2;
    }
    return p;
}

PseudoConfig resolve_pseudo_config(const TrainConfig& config) {
    PseudoConfig p = config.pseudo;
    if (config.ablation.no_running_average) p.capacity = 1;
    if (config.ablation.no_disturbance) p.disturbance = false;
    return p;
}

namespace {

LossBundle proposed_loss(std::span<const double> logits, std::span<const Label> row, std::size_t index,
                         const PseudoState& pseudo, const TrainConfig& config, const LossParams& params, int epoch) {
    std::vector<std::size_t> obs_classes;
    std::vector<double> obs_logits, obs_targets;
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (row[j] == Label::Missing) continue;
        obs_classes.push_back(j);
        obs_logits.push_back(logits[j]);
        obs_targets.push_back(row[j] == Label::Positive ? 1.0 : 0.0);
    }
    const LossBundle observed = observed_loss(obs_logits, obs_targets);

    const auto un_classes = pseudo.classes(index);
    std::vector<double> un_logits;
    un_logits.reserve(un_classes.size());
    for (std::size_t j : un_classes) un_logits.push_back(logits[j]);
    const std::vector<double> targets = config.threshold_pseudo_labels
                                            ? threshold_pseudo(pseudo.values(index), params.threshold)
                                            : std::vector<double>(pseudo.values(index).begin(), pseudo.values(index).end());
    const LossBundle unobserved = unobserved_loss(un_logits, targets, params);

    CurriculumWeights w{1.0, 1.0};
    if (un_classes.empty()) {
        w = {1.0, 0.0};
    } else if (!config.ablation.no_weighted_schedule) {
        w = curriculum_weights(epoch, config.epochs);
    }
    return total_loss(observed, obs_classes, unobserved, un_classes, row.size(), w);
}

// Forward, loss and gradient accumulation for one instance; returns the
// loss and stores the pre-step predictions of the unobserved classes.
double accumulate_instance(const ScoringModel& model, std::span<const double> features, std::span<const Label> row,
                           std::size_t index, const PseudoState* pseudo, const TrainConfig& config,
                           const LossParams& params, int epoch, double scale, std::span<double> grad,
                           std::vector<double>& predictions) {
    const auto logits = model.forward(features);
    const LossBundle loss = instance_loss(logits, row, index, pseudo, config, params, epoch);
    model.accumulate_gradient(features, loss.grad_logits, scale, grad);
    predictions.clear();
    if (pseudo != nullptr)
        for (std::size_t j : pseudo->classes(index)) predictions.push_back(sigmoid(logits[j]));
    return loss.value;
}

void update_instance_pseudo(PseudoState& pseudo, std::size_t index, std::span<const double> predictions, int epoch,
                            RngStream& rng) {
    const auto classes = pseudo.classes(index);
    // Window epochs count from 1 so that the first D_s epochs are skipped.
    for (std::size_t a = 0; a < classes.size(); ++a) pseudo.update(index, classes[a], predictions[a], epoch + 1, rng);
}

}  // namespace

LossBundle instance_loss(std::span<const double> logits, std::span<const Label> observed_row, std::size_t index,
                         const PseudoState* pseudo, const TrainConfig& config, const LossParams& params, int epoch) {
    require(logits.size() == observed_row.size(), "instance_loss: logits and label row differ in length");
    switch (config.loss) {
        case LossChoice::Proposed:
            require(pseudo != nullptr, "instance_loss: proposed loss needs pseudo labels");
            return proposed_loss(logits, observed_row, index, *pseudo, config, params, epoch);
        case LossChoice::AN:
        case LossChoice::BceFol:
            return an_loss(logits, observed_row);
        case LossChoice::WAN:
            return wan_loss(logits, observed_row, params.wan_gamma);
        case LossChoice::Focal:
            return focal_loss(logits, assume_negative(observed_row), params.focal);
        case LossChoice::ASL:
            return asl_loss(logits, assume_negative(observed_row), params.asl, params.clamp_eps);
        case LossChoice::BceLsFol:
            return bce_ls_loss(logits, assume_negative(observed_row), params.ls_epsilon);
    }
    throw ContractError("instance_loss: unknown loss choice");
}

double train_instance(ScoringModel& model, std::span<const double> features, std::span<const Label> observed_row,
                      std::size_t index, PseudoState* pseudo, const TrainConfig& config, const LossParams& params,
                      int epoch, RngStream& disturbance_rng) {
    std::vector<double> grad(model.parameters().size(), 0.0);
    std::vector<double> predictions;
    const double value =
        accumulate_instance(model, features, observed_row, index, pseudo, config, params, epoch, 1.0, grad, predictions);
    model.apply_step(grad, effective_learning_rate(config, model.outputs()));
    if (pseudo != nullptr) update_instance_pseudo(*pseudo, index, predictions, epoch, disturbance_rng);
    return value;
}

std::vector<double> predict(const ScoringModel& model, const Dataset& data) {
    std::vector<double> out;
    out.reserve(data.num_instances() * model.outputs());
    for (std::size_t i = 0; i < data.num_instances(); ++i) {
        for (double s : model.forward(data.features(i))) out.push_back(sigmoid(s));
    }
    return out;
}

TrainResult run_training(const Dataset& train, const ObservedLabelMatrix& observed, const Dataset& validation,
                         const TrainConfig& config, const ResumeState* resume, const LabelMatrix* validation_labels) {
    if (train.num_instances() == 0) throw DataError("run_training: empty training set");
    require(observed.rows() == train.num_instances() && observed.cols() == train.num_classes(),
            "run_training: observed matrix does not match the training set");
    require(validation.num_features() == train.num_features() && validation.num_classes() == train.num_classes(),
            "run_training: validation set has a different shape");
    require(config.epochs >= 1, "run_training: epochs must be >= 1");
    require(config.batch_size >= 1, "run_training: batch size must be >= 1");
    require(config.learning_rate >= 0.0, "run_training: learning rate must be non-negative");
    const LabelMatrix& val_labels = validation_labels ? *validation_labels : validation.labels();
    require(val_labels.rows() == validation.num_instances() && val_labels.cols() == validation.num_classes(),
            "run_training: validation labels have the wrong shape");

    const bool proposed = config.loss == LossChoice::Proposed;
    LossParams params = config.loss_params;
    TrainResult result;
    int start_epoch = 0;

    if (resume != nullptr) {
        result.final_model = resume->model;
        result.pseudo = resume->pseudo;
        start_epoch = resume->next_epoch;
        if (proposed) params = resolve_loss_params(config, compute_stats(observed));
    } else {
        const std::size_t hidden = config.model_kind == ModelKind::Linear ? 0 : config.hidden;
        RngStream init_rng(config.seed, "init");
        result.final_model = ScoringModel::initialized(config.model_kind, train.num_features(), hidden,
                                                       train.num_classes(), init_rng);
        if (proposed) {
            const LabelStats stats = compute_stats(observed);
            params = resolve_loss_params(config, stats);
            result.pseudo = PseudoState::init(stats, observed, resolve_pseudo_config(config));
        }
    }

    ScoringModel& model = result.final_model;
    PseudoState* pseudo = proposed ? &result.pseudo : nullptr;
    const double lr = effective_learning_rate(config, train.num_classes());
    std::vector<std::size_t> order(train.num_instances());
    std::vector<double> grad(model.parameters().size());
    std::vector<std::vector<double>> batch_predictions(config.batch_size);
    result.best_val_map = -1.0;

    const int last = config.stop_epoch > 0 ? std::min(config.stop_epoch, config.epochs) : config.epochs;
    for (int epoch = start_epoch; epoch < last; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        RngStream shuffle_rng(config.seed, "shuffle/" + std::to_string(epoch));
        shuffle_rng.shuffle(std::span<std::size_t>(order));
        RngStream disturbance_rng(config.seed, "disturbance/" + std::to_string(epoch));

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            const double scale = 1.0 / static_cast<double>(stop - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t i = order[b];
                loss_sum += accumulate_instance(model, train.features(i), observed.row(i), i, pseudo, config, params,
                                                epoch, scale, grad, batch_predictions[b - start]);
            }
            model.apply_step(grad, lr);
            if (pseudo != nullptr)
                for (std::size_t b = start; b < stop; ++b)
                    update_instance_pseudo(*pseudo, order[b], batch_predictions[b - start], epoch, disturbance_rng);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(order.size());
        rec.val_map = mean_ap(predict(model, validation), val_labels).mean_ap;
        result.history.push_back(rec);
        if (rec.val_map > result.best_val_map) {
            result.best_val_map = rec.val_map;
            result.best_epoch = epoch;
            result.best_model = model;
        }
    }
    if (result.history.empty()) result.best_model = model;
    return result;
}

}  // namespace mlml
