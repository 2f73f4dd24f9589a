#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mlml/label_space.hpp"

namespace mlml {

/// Non-interpolated AP: precision averaged over the ranks of the positives,
/// ranking by score descending with ties broken by ascending index.
/// Returns nullopt when there are no positives.
std::optional<double> average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct EvalResult {
    std::vector<std::optional<double>> per_class_ap;
    double mean_ap = 0.0;
    std::size_t defined_classes = 0;
};

/// Per-class AP over instance rankings; `scores` is row-major N x L.
/// Classes without positives are excluded from the mean. Throws DataError
/// when no class has a positive.
EvalResult mean_ap(std::span<const double> scores, const LabelMatrix& labels);

struct PrecisionRecall {
    double precision = 0.0;
    std::optional<double> recall;  // undefined for instances without positives
};

/// Per-instance precision and recall of the top-k classes (ties by index).
PrecisionRecall precision_recall_at_k(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                      std::size_t k);

}  // namespace mlml
