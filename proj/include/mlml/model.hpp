#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mlml/rng.hpp"

namespace mlml {

enum class ModelKind { Linear, Mlp1 };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

/// Minimal differentiable scorer mapping M features to L logits.
///
/// Parameter layout (row-major):
///   linear: W[L x M], b[L]
///   mlp1:   W1[H x M], b1[H], W2[L x H], b2[L], hidden activation tanh
class ScoringModel {
public:
    ScoringModel() = default;
    /// Zero-initialized model. `hidden` must be 0 for linear and > 0 for mlp1.
    ScoringModel(ModelKind kind, std::size_t inputs, std::size_t hidden, std::size_t outputs);

    /// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer.
    static ScoringModel initialized(ModelKind kind, std::size_t inputs, std::size_t hidden, std::size_t outputs,
                                    RngStream& rng);

    static std::size_t parameter_count(ModelKind kind, std::size_t inputs, std::size_t hidden, std::size_t outputs);

    ModelKind kind() const noexcept { return kind_; }
    std::size_t inputs() const noexcept { return inputs_; }
    std::size_t hidden() const noexcept { return hidden_; }
    std::size_t outputs() const noexcept { return outputs_; }

    std::span<double> parameters() noexcept { return params_; }
    std::span<const double> parameters() const noexcept { return params_; }

    std::vector<double> forward(std::span<const double> features) const;
    /// Gradient of dot(logits, grad_logits) with respect to the parameters.
    std::vector<double> backward(std::span<const double> features, std::span<const double> grad_logits) const;
    /// Adds scale * backward(features, grad_logits) into `grad`.
    void accumulate_gradient(std::span<const double> features, std::span<const double> grad_logits, double scale,
                             std::span<double> grad) const;

    /// params -= learning_rate * grad
    void apply_step(std::span<const double> grad, double learning_rate);

    // Checkpoint: "mlml-model <kind> <M> <H> <L> <seed> <epoch>" then one
    // line of space-separated parameters.
    void write_checkpoint(std::ostream& out, RngSeed seed, int epoch) const;
    static ScoringModel read_checkpoint(std::istream& in);

    bool operator==(const ScoringModel&) const = default;

private:
    void check_input(std::span<const double> features) const;

    ModelKind kind_ = ModelKind::Linear;
    std::size_t inputs_ = 0;
    std::size_t hidden_ = 0;
    std::size_t outputs_ = 0;
    std::vector<double> params_;
};

}  // namespace mlml
