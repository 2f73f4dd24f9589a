#include "mlml/losses.hpp"

#include <algorithm>
#include <cmath>

#include "mlml/errors.hpp"

namespace mlml {

double sigmoid(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

double log_sigmoid(double s) {
    if (s >= 0.0) return -std::log1p(std::exp(-s));
    return s - std::log1p(std::exp(s));
}

namespace {

void check_pair(std::span<const double> a, std::span<const double> b, const char* op) {
    if (a.size() != b.size()) throw ContractError(std::string(op) + ": length mismatch");
}

void check_nonempty(std::size_t k, const char* op) {
    if (k == 0) throw ContractError(std::string(op) + ": empty input");
}

double clamped_log(double v, double eps) { return std::log(std::max(v, eps)); }

// -(1/k) sum [w_pos y log p + w_neg (1 - y) log(1 - p)] evaluated in the
// logit domain.
LossBundle weighted_ce(std::span<const double> logits, std::span<const double> targets, double w_pos, double w_neg,
                       double scale) {
    LossBundle out = LossBundle::zero(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double s = logits[i];
        const double y = targets[i];
        const double p = sigmoid(s);
        sum += w_pos * y * log_sigmoid(s) + w_neg * (1.0 - y) * log_sigmoid(-s);
        out.grad_logits[i] = -scale * (w_pos * y * (1.0 - p) - w_neg * (1.0 - y) * p);
    }
    out.value = -scale * sum;
    return out;
}

}  // namespace

LossBundle bce(std::span<const double> logits, std::span<const double> targets) {
    check_pair(logits, targets, "bce");
    check_nonempty(logits.size(), "bce");
    return weighted_ce(logits, targets, 1.0, 1.0, 1.0 / static_cast<double>(logits.size()));
}

LossBundle observed_loss(std::span<const double> logits, std::span<const double> observed_targets) {
    check_pair(logits, observed_targets, "observed_loss");
    if (logits.empty()) return {};
    return bce(logits, observed_targets);
}

LossBundle cfs(std::span<const double> x, std::span<const double> y, double c1, double c2, CfsOutput output,
               double clamp_eps) {
    check_pair(x, y, "cfs");
    check_nonempty(x.size(), "cfs");
    const double scale = 1.0 / static_cast<double>(x.size());
    LossBundle out = LossBundle::zero(x.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double ly = clamped_log(y[i], clamp_eps);
        const double l1y = clamped_log(1.0 - y[i], clamp_eps);
        sum += c1 * x[i] * ly + c2 * (1.0 - x[i]) * l1y;
        if (output == CfsOutput::X) {
            out.grad_logits[i] = -scale * x[i] * (1.0 - x[i]) * (c1 * ly - c2 * l1y);
        } else {
            const double dpos = y[i] > clamp_eps ? c1 * x[i] / y[i] : 0.0;
            const double dneg = 1.0 - y[i] > clamp_eps ? c2 * (1.0 - x[i]) / (1.0 - y[i]) : 0.0;
            out.grad_logits[i] = -scale * y[i] * (1.0 - y[i]) * (dpos - dneg);
        }
    }
    out.value = -scale * sum;
    return out;
}

LossBundle unobserved_loss(std::span<const double> logits, std::span<const double> pseudo, const LossParams& params) {
    check_pair(logits, pseudo, "unobserved_loss");
    if (logits.empty()) return {};
    const double scale = 1.0 / static_cast<double>(logits.size());
    const double eps = params.clamp_eps;

    // Forward term: pseudo labels as targets; the log is of the prediction
    // and is evaluated exactly from the logit.
    LossBundle out = weighted_ce(logits, pseudo, params.c1, params.c2, scale);
    out.value *= params.alpha;
    for (double& g : out.grad_logits) g *= params.alpha;
    if (params.beta == 0.0) return out;

    // Reverse term: prediction as the target of the clamped pseudo logs.
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double p = sigmoid(logits[i]);
        const double lq = clamped_log(pseudo[i], eps);
        const double l1q = clamped_log(1.0 - pseudo[i], eps);
        sum += params.c1 * p * lq + params.c2 * (1.0 - p) * l1q;
        out.grad_logits[i] += -params.beta * scale * p * (1.0 - p) * (params.c1 * lq - params.c2 * l1q);
    }
    out.value += -params.beta * scale * sum;
    return out;
}

std::vector<double> threshold_pseudo(std::span<const double> pseudo, double t) {
    require(t > 0.5 && t <= 1.0, "threshold_pseudo: t must lie in (0.5, 1]");
    std::vector<double> out(pseudo.begin(), pseudo.end());
    for (double& v : out)
        if (v >= t) v = 1.0;
    return out;
}

CurriculumWeights curriculum_weights(int epoch, int total_epochs) {
    require(total_epochs >= 1, "curriculum_weights: total epochs must be >= 1");
    require(epoch >= 0 && epoch <= total_epochs, "curriculum_weights: epoch outside [0, T_e]");
    const double te = total_epochs;
    const double half = 0.5 * epoch;
    return {(te - half) / te, half / te};
}

LossBundle total_loss(const LossBundle& observed, std::span<const std::size_t> observed_classes,
                      const LossBundle& unobserved, std::span<const std::size_t> unobserved_classes,
                      std::size_t num_classes, CurriculumWeights weights) {
    require(observed.grad_logits.size() == observed_classes.size(), "total_loss: observed positions mismatch");
    require(unobserved.grad_logits.size() == unobserved_classes.size(), "total_loss: unobserved positions mismatch");
    LossBundle out = LossBundle::zero(num_classes);
    out.value = weights.observed * observed.value + weights.unobserved * unobserved.value;
    for (std::size_t a = 0; a < observed_classes.size(); ++a) {
        require(observed_classes[a] < num_classes, "total_loss: class index out of range");
        out.grad_logits[observed_classes[a]] += weights.observed * observed.grad_logits[a];
    }
    for (std::size_t a = 0; a < unobserved_classes.size(); ++a) {
        require(unobserved_classes[a] < num_classes, "total_loss: class index out of range");
        out.grad_logits[unobserved_classes[a]] += weights.unobserved * unobserved.grad_logits[a];
    }
    return out;
}

std::vector<double> assume_negative(std::span<const Label> row) {
    std::vector<double> out(row.size(), 0.0);
    for (std::size_t j = 0; j < row.size(); ++j) out[j] = row[j] == Label::Positive ? 1.0 : 0.0;
    return out;
}

LossBundle an_loss(std::span<const double> logits, std::span<const Label> row) {
    require(logits.size() == row.size(), "an_loss: length mismatch");
    const auto targets = assume_negative(row);
    return bce(logits, targets);
}

LossBundle wan_loss(std::span<const double> logits, std::span<const Label> row, double wan_gamma) {
    require(logits.size() == row.size(), "wan_loss: length mismatch");
    require(wan_gamma > 0.0 && wan_gamma <= 1.0, "wan_loss: weight must lie in (0, 1]");
    check_nonempty(logits.size(), "wan_loss");
    const auto targets = assume_negative(row);
    return weighted_ce(logits, targets, 1.0, wan_gamma, 1.0 / static_cast<double>(logits.size()));
}

LossBundle focal_loss(std::span<const double> logits, std::span<const double> targets, const FocalParams& params) {
    check_pair(logits, targets, "focal_loss");
    check_nonempty(logits.size(), "focal_loss");
    require(params.gamma >= 0.0, "focal_loss: gamma must be non-negative");
    const double g = params.gamma;
    LossBundle out = LossBundle::zero(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double s = logits[i];
        const double y = targets[i];
        const double p = sigmoid(s);
        const double q = sigmoid(-s);  // 1 - p without cancellation
        const double lp = log_sigmoid(s);
        const double lq = log_sigmoid(-s);
        const double pos = params.alpha_pos * std::pow(q, g);
        const double neg = params.alpha_neg * std::pow(p, g);
        sum += y * pos * lp + (1.0 - y) * neg * lq;
        const double dpos = pos * (q - g * p * lp);
        const double dneg = neg * (g * q * lq - p);
        out.grad_logits[i] = -(y * dpos + (1.0 - y) * dneg);
    }
    out.value = -sum;
    return out;
}

LossBundle asl_loss(std::span<const double> logits, std::span<const double> targets, const AslParams& params,
                    double clamp_eps) {
    check_pair(logits, targets, "asl_loss");
    check_nonempty(logits.size(), "asl_loss");
    require(params.gamma_pos >= 0.0 && params.gamma_neg >= 0.0, "asl_loss: focusing exponents must be >= 0");
    require(params.margin >= 0.0 && params.margin < 1.0, "asl_loss: margin must lie in [0, 1)");
    const double m = params.margin;
    LossBundle out = LossBundle::zero(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double s = logits[i];
        const double y = targets[i];
        const double p = sigmoid(s);
        const double pc = sigmoid(-s);

        // Shifted probability q = max(p - m, 0) and its complement.
        double q = 0.0, qc = 1.0, lq = 0.0, lqc = 0.0, dq = 0.0;
        bool log_q_live = true;
        if (m == 0.0) {
            q = p;
            qc = pc;
            lq = log_sigmoid(s);
            lqc = log_sigmoid(-s);
            dq = p * pc;
        } else if (p > m) {
            q = p - m;
            qc = pc + m;
            log_q_live = q > clamp_eps;
            lq = clamped_log(q, clamp_eps);
            lqc = std::log(qc);
            dq = p * pc;
        } else {
            lq = std::log(clamp_eps);
            log_q_live = false;
        }

        const double gp = params.gamma_pos;
        const double gn = params.gamma_neg;
        const double pos = std::pow(qc, gp);
        const double neg = q > 0.0 ? std::pow(q, gn) : (gn == 0.0 ? 1.0 : 0.0);
        sum += y * pos * lq + (1.0 - y) * neg * lqc;

        if (dq == 0.0) continue;
        // d/dq of (1-q)^gp log q and of q^gn log(1-q)
        double dpos = log_q_live ? pos / q : 0.0;
        if (gp != 0.0) dpos -= gp * std::pow(qc, gp - 1.0) * lq;
        double dneg = -neg / qc;
        if (gn != 0.0) dneg += gn * std::pow(q, gn - 1.0) * lqc;
        out.grad_logits[i] = -(y * dpos + (1.0 - y) * dneg) * dq;
    }
    out.value = -sum;
    return out;
}

LossBundle bce_ls_loss(std::span<const double> logits, std::span<const double> targets, double ls_epsilon) {
    require(ls_epsilon >= 0.0 && ls_epsilon < 0.5, "bce_ls_loss: epsilon must lie in [0, 0.5)");
    check_pair(logits, targets, "bce_ls_loss");
    std::vector<double> smoothed(targets.begin(), targets.end());
    for (double& y : smoothed) y = y * (1.0 - ls_epsilon) + (1.0 - y) * ls_epsilon;
    return bce(logits, smoothed);
}

}  // namespace mlml
