#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mlml/label_space.hpp"

namespace mlml {

/// Loss value plus its gradient with respect to the scored logits.
struct LossBundle {
    double value = 0.0;
    std::vector<double> grad_logits;

    static LossBundle zero(std::size_t k) { return {0.0, std::vector<double>(k, 0.0)}; }
};

struct FocalParams {
    double alpha_pos = 0.9;
    double alpha_neg = 0.1;
    double gamma = 2.0;
};

struct AslParams {
    double gamma_pos = 8.0;
    double gamma_neg = 1.0;
    double margin = 0.05;
};

struct LossParams {
    double alpha = 0.95;  // forward cross-entropy weight
    double beta = 0.05;   // reverse cross-entropy weight
    double c1 = 0.5;      // positive-term weight, observed negatives / T_o
    double c2 = 0.5;      // negative-term weight, observed positives / T_o
    FocalParams focal;
    AslParams asl;
    double wan_gamma = 1.0 / 9.0;  // 1 / (L - 1) for L = 10
    double ls_epsilon = 0.1;
    double threshold = 0.7;
    double clamp_eps = 1e-4;
};

inline constexpr double kDefaultClampEps = 1e-4;

double sigmoid(double s);
/// log(sigmoid(s)) without overflow or cancellation.
double log_sigmoid(double s);

/// Mean binary cross-entropy of sigmoid(logits) against soft targets.
/// Throws ContractError for empty or mismatched inputs.
LossBundle bce(std::span<const double> logits, std::span<const double> targets);

/// bce restricted to an instance's observed positions; empty input gives a
/// zero bundle.
LossBundle observed_loss(std::span<const double> logits, std::span<const double> observed_targets);

enum class CfsOutput { X, Y };

/// Confidence-weighted cross-entropy over probabilities:
///   -(1/k) sum [c1 x log y + c2 (1 - x) log(1 - y)]
/// with both logs clamped below at clamp_eps. The gradient is taken with
/// respect to the logit of the argument named by `output` (the model
/// prediction); the other argument is a constant.
LossBundle cfs(std::span<const double> x, std::span<const double> y, double c1, double c2, CfsOutput output,
               double clamp_eps = kDefaultClampEps);

/// Symmetric, confidence-weighted loss on the unobserved positions:
///   alpha * [pseudo-as-target CE of the prediction]
/// + beta  * [prediction-as-target CE of the pseudo labels]
/// Pseudo values are constants for the gradient. Empty input gives a zero
/// bundle.
LossBundle unobserved_loss(std::span<const double> logits, std::span<const double> pseudo, const LossParams& params);

/// Values at or above t become 1; the rest pass through. t must lie in (0.5, 1].
std::vector<double> threshold_pseudo(std::span<const double> pseudo, double t);

struct CurriculumWeights {
    double observed = 1.0;
    double unobserved = 0.0;
};

/// ((T_e - e/2) / T_e, (e/2) / T_e) for 0 <= e <= T_e.
CurriculumWeights curriculum_weights(int epoch, int total_epochs);

/// Weighted sum of the two partial losses scattered onto `num_classes`
/// logit positions.
LossBundle total_loss(const LossBundle& observed, std::span<const std::size_t> observed_classes,
                      const LossBundle& unobserved, std::span<const std::size_t> unobserved_classes,
                      std::size_t num_classes, CurriculumWeights weights);

/// Hard targets with every missing entry read as negative.
std::vector<double> assume_negative(std::span<const Label> row);

LossBundle an_loss(std::span<const double> logits, std::span<const Label> row);
/// AN with every negative term scaled by wan_gamma in (0, 1].
LossBundle wan_loss(std::span<const double> logits, std::span<const Label> row, double wan_gamma);
/// Class-summed focal loss; throws ContractError for gamma < 0.
LossBundle focal_loss(std::span<const double> logits, std::span<const double> targets, const FocalParams& params);
/// Class-summed asymmetric loss with shifted probability max(p - margin, 0).
LossBundle asl_loss(std::span<const double> logits, std::span<const double> targets, const AslParams& params,
                    double clamp_eps = kDefaultClampEps);
/// bce against y (1 - eps) + (1 - y) eps.
LossBundle bce_ls_loss(std::span<const double> logits, std::span<const double> targets, double ls_epsilon);

}  // namespace mlml
