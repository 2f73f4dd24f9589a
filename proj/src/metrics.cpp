#include "mlml/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "mlml/errors.hpp"

namespace mlml {

namespace {

std::vector<std::size_t> ranking(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

}  // namespace

std::optional<double> average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    require(scores.size() == labels.size(), "average_precision: length mismatch");
    const auto order = ranking(scores);
    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (labels[order[r]]) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(r + 1);
        }
    }
    if (hits == 0) return std::nullopt;
    return sum / static_cast<double>(hits);
}

EvalResult mean_ap(std::span<const double> scores, const LabelMatrix& labels) {
    const std::size_t n = labels.rows();
    const std::size_t l = labels.cols();
    require(scores.size() == n * l, "mean_ap: score matrix shape does not match labels");
    EvalResult out;
    out.per_class_ap.resize(l);
    std::vector<double> col_scores(n);
    std::vector<std::uint8_t> col_labels(n);
    double sum = 0.0;
    for (std::size_t j = 0; j < l; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            col_scores[i] = scores[i * l + j];
            col_labels[i] = labels(i, j);
        }
        out.per_class_ap[j] = average_precision(col_scores, col_labels);
        if (out.per_class_ap[j]) {
            sum += *out.per_class_ap[j];
            ++out.defined_classes;
        }
    }
    if (out.defined_classes == 0) throw DataError("mean_ap: no class has a positive label");
    out.mean_ap = sum / static_cast<double>(out.defined_classes);
    return out;
}

PrecisionRecall precision_recall_at_k(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                      std::size_t k) {
    require(scores.size() == labels.size(), "precision_recall_at_k: length mismatch");
    require(k >= 1 && k <= scores.size(), "precision_recall_at_k: k must lie in [1, L]");
    const auto order = ranking(scores);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < k; ++r) hits += labels[order[r]] ? 1 : 0;
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
    PrecisionRecall out;
    out.precision = static_cast<double>(hits) / static_cast<double>(k);
    if (positives > 0) out.recall = static_cast<double>(hits) / static_cast<double>(positives);
    return out;
}

}  // namespace mlml
