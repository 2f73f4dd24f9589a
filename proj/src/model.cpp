#include "mlml/model.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "mlml/errors.hpp"

namespace mlml {

std::string to_string(ModelKind kind) { return kind == ModelKind::Linear ? "linear" : "mlp1"; }

ModelKind parse_model_kind(const std::string& text) {
    if (text == "linear") return ModelKind::Linear;
    if (text == "mlp1") return ModelKind::Mlp1;
    throw DataError("unknown model kind: " + text);
}

std::size_t ScoringModel::parameter_count(ModelKind kind, std::size_t inputs, std::size_t hidden, std::size_t outputs) {
    if (kind == ModelKind::Linear) return outputs * (inputs + 1);
    return hidden * (inputs + 1) + outputs * (hidden + 1);
}

ScoringModel::ScoringModel(ModelKind kind, std::size_t inputs, std::size_t hidden, std::size_t outputs)
    : kind_(kind), inputs_(inputs), hidden_(hidden), outputs_(outputs) {
    require(outputs > 0, "ScoringModel: at least one output required");
    require(kind == ModelKind::Linear ? hidden == 0 : hidden > 0,
            "ScoringModel: hidden width must be 0 for linear and positive for mlp1");
    params_.assign(parameter_count(kind, inputs, hidden, outputs), 0.0);
}

ScoringModel ScoringModel::initialized(ModelKind kind, std::size_t inputs, std::size_t hidden, std::size_t outputs,
                                       RngStream& rng) {
    ScoringModel model(kind, inputs, hidden, outputs);
    auto fill = [&](std::size_t begin, std::size_t count, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
        for (std::size_t k = begin; k < begin + count; ++k) model.params_[k] = rng.uniform(-bound, bound);
    };
    if (kind == ModelKind::Linear) {
        fill(0, model.params_.size(), inputs);
    } else {
        const std::size_t first = hidden * (inputs + 1);
        fill(0, first, inputs);
        fill(first, model.params_.size() - first, hidden);
    }
    return model;
}

void ScoringModel::check_input(std::span<const double> features) const {
    if (features.size() != inputs_)
        throw ContractError("ScoringModel: expected " + std::to_string(inputs_) + " features, got " +
                            std::to_string(features.size()));
}

namespace {

// out[r] = bias[r] + sum_c w[r * cols + c] * x[c]
void affine(const double* w, const double* bias, std::span<const double> x, std::size_t rows, double* out) {
    const std::size_t cols = x.size();
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = bias[r];
        const double* wr = w + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
        out[r] = acc;
    }
}

}  // namespace

std::vector<double> ScoringModel::forward(std::span<const double> features) const {
    check_input(features);
    std::vector<double> logits(outputs_);
    const double* p = params_.data();
    if (kind_ == ModelKind::Linear) {
        affine(p, p + outputs_ * inputs_, features, outputs_, logits.data());
        return logits;
    }
    std::vector<double> h(hidden_);
    affine(p, p + hidden_ * inputs_, features, hidden_, h.data());
    for (double& v : h) v = std::tanh(v);
    const double* w2 = p + hidden_ * (inputs_ + 1);
    affine(w2, w2 + outputs_ * hidden_, h, outputs_, logits.data());
    return logits;
}

void ScoringModel::accumulate_gradient(std::span<const double> features, std::span<const double> grad_logits,
                                       double scale, std::span<double> grad) const {
    check_input(features);
    require(grad_logits.size() == outputs_, "ScoringModel: grad_logits length must equal the number of outputs");
    require(grad.size() == params_.size(), "ScoringModel: gradient buffer has the wrong size");
    const std::size_t m = inputs_;

    if (kind_ == ModelKind::Linear) {
        double* gw = grad.data();
        double* gb = gw + outputs_ * m;
        for (std::size_t r = 0; r < outputs_; ++r) {
            const double g = scale * grad_logits[r];
            if (g == 0.0) continue;
            for (std::size_t c = 0; c < m; ++c) gw[r * m + c] += g * features[c];
            gb[r] += g;
        }
        return;
    }

    const double* p = params_.data();
    std::vector<double> h(hidden_);
    affine(p, p + hidden_ * m, features, hidden_, h.data());
    for (double& v : h) v = std::tanh(v);

    const double* w2 = p + hidden_ * (m + 1);
    double* gw1 = grad.data();
    double* gb1 = gw1 + hidden_ * m;
    double* gw2 = gb1 + hidden_;
    double* gb2 = gw2 + outputs_ * hidden_;

    std::vector<double> dh(hidden_, 0.0);
    for (std::size_t r = 0; r < outputs_; ++r) {
        const double g = scale * grad_logits[r];
        if (g == 0.0) continue;
        for (std::size_t c = 0; c < hidden_; ++c) {
            gw2[r * hidden_ + c] += g * h[c];
            dh[c] += g * w2[r * hidden_ + c];
        }
        gb2[r] += g;
    }
    for (std::size_t c = 0; c < hidden_; ++c) {
        const double dz = dh[c] * (1.0 - h[c] * h[c]);
        if (dz == 0.0) continue;
        for (std::size_t k = 0; k < m; ++k) gw1[c * m + k] += dz * features[k];
        gb1[c] += dz;
    }
}

std::vector<double> ScoringModel::backward(std::span<const double> features, std::span<const double> grad_logits) const {
    std::vector<double> grad(params_.size(), 0.0);
    accumulate_gradient(features, grad_logits, 1.0, grad);
    return grad;
}

void ScoringModel::apply_step(std::span<const double> grad, double learning_rate) {
    require(grad.size() == params_.size(), "ScoringModel: gradient has the wrong size");
    for (std::size_t k = 0; k < params_.size(); ++k) params_[k] -= learning_rate * grad[k];
}

void ScoringModel::write_checkpoint(std::ostream& out, RngSeed seed, int epoch) const {
    out << "mlml-model " << to_string(kind_) << ' ' << inputs_ << ' ' << hidden_ << ' ' << outputs_ << ' ' << seed
        << ' ' << epoch << '\n';
    char buf[32];
    for (std::size_t k = 0; k < params_.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", params_[k]);
        if (k) out << ' ';
        out << buf;
    }
    out << '\n';
}

ScoringModel ScoringModel::read_checkpoint(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw DataError("empty model checkpoint");
    std::istringstream hs(header);
    std::string tag, kind;
    std::size_t m = 0, h = 0, l = 0;
    RngSeed seed = 0;
    int epoch = 0;
    if (!(hs >> tag >> kind >> m >> h >> l >> seed >> epoch) || tag != "mlml-model")
        throw DataError("bad model checkpoint header: " + header);
    ScoringModel model(parse_model_kind(kind), m, h, l);
    for (double& v : model.params_)
        if (!(in >> v)) throw DataError("model checkpoint: truncated parameter list");
    return model;
}

}  // namespace mlml
