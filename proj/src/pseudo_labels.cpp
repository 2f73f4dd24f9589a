#include "mlml/pseudo_labels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "mlml/errors.hpp"

namespace mlml {

double initial_pseudo_value(double positives_per_instance, double observed_ratio, std::size_t observed_positives,
                            std::size_t unobserved) {
    if (!(observed_ratio > 0.0)) throw DataError("pseudo-label init: observed ratio must be positive");
    require(unobserved > 0, "pseudo-label init: instance has no unobserved entries");
    const double expected = std::max(positives_per_instance / observed_ratio, 1.0);
    const double have = static_cast<double>(observed_positives);
    if (expected > have) return std::min((expected - have) / static_cast<double>(unobserved), 1.0);
    return 0.0;
}

double inject_disturbance(double prediction, RngStream& rng) {
    require(prediction >= 0.0 && prediction <= 1.0, "inject_disturbance: prediction outside [0, 1]");
    if (prediction <= 0.0 || prediction >= 1.0) return prediction;
    if (prediction < 0.5) return prediction - rng.uniform_open(0.0, prediction);
    return prediction + rng.uniform_open(0.0, 1.0 - prediction);
}

PseudoState PseudoState::init(const LabelStats& stats, const ObservedLabelMatrix& observed, PseudoConfig config) {
    require(config.capacity > 0, "pseudo labels: stack capacity must be positive");
    require(config.ambiguity_half_width > 0.0 && config.ambiguity_half_width < 0.5,
            "pseudo labels: ambiguity half-width must lie in (0, 0.5)");
    if (!(stats.observed_ratio > 0.0)) throw DataError("pseudo-label init: observed ratio must be positive");

    PseudoState s;
    s.config_ = config;
    s.row_offset_.reserve(observed.rows() + 1);
    s.row_offset_.push_back(0);
    for (std::size_t i = 0; i < observed.rows(); ++i) {
        const auto row = observed.row(i);
        std::size_t unobserved = 0, positives = 0;
        for (Label v : row) {
            if (v == Label::Missing) ++unobserved;
            else if (v == Label::Positive) ++positives;
        }
        if (unobserved > 0) {
            const double init =
                initial_pseudo_value(stats.positives_per_instance, stats.observed_ratio, positives, unobserved);
            for (std::size_t j = 0; j < row.size(); ++j) {
                if (row[j] != Label::Missing) continue;
                s.classes_.push_back(j);
                s.values_.push_back(init);
            }
        }
        s.row_offset_.push_back(s.classes_.size());
    }
    s.history_.assign(s.classes_.size() * config.capacity, 0.0);
    s.head_.assign(s.classes_.size(), 0);
    s.count_.assign(s.classes_.size(), 0);
    return s;
}

std::span<const std::size_t> PseudoState::classes(std::size_t i) const {
    require(i < num_instances(), "pseudo labels: instance out of range");
    return {classes_.data() + row_offset_[i], row_offset_[i + 1] - row_offset_[i]};
}

std::span<const double> PseudoState::values(std::size_t i) const {
    require(i < num_instances(), "pseudo labels: instance out of range");
    return {values_.data() + row_offset_[i], row_offset_[i + 1] - row_offset_[i]};
}

std::size_t PseudoState::find(std::size_t i, std::size_t j) const {
    if (i >= num_instances()) return size();
    const auto first = classes_.begin() + static_cast<std::ptrdiff_t>(row_offset_[i]);
    const auto last = classes_.begin() + static_cast<std::ptrdiff_t>(row_offset_[i + 1]);
    const auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return size();
    return static_cast<std::size_t>(it - classes_.begin());
}

bool PseudoState::contains(std::size_t i, std::size_t j) const { return find(i, j) != size(); }

std::size_t PseudoState::key(std::size_t i, std::size_t j) const {
    const std::size_t k = find(i, j);
    if (k == size())
        throw ContractError("pseudo labels: (" + std::to_string(i) + ", " + std::to_string(j) +
                            ") is not an unobserved entry");
    return k;
}

std::vector<double> PseudoState::stack(std::size_t i, std::size_t j) const {
    const std::size_t k = key(i, j);
    const std::size_t n = config_.capacity;
    std::vector<double> out;
    out.reserve(count_[k]);
    for (std::size_t a = 0; a < count_[k]; ++a) out.push_back(history_[k * n + (head_[k] + a) % n]);
    return out;
}

void PseudoState::record_prediction(std::size_t i, std::size_t j, double prediction) {
    const std::size_t k = key(i, j);
    require(prediction >= 0.0 && prediction <= 1.0, "pseudo labels: prediction outside [0, 1]");
    const std::size_t n = config_.capacity;
    if (count_[k] == n) {
        history_[k * n + head_[k]] = prediction;
        head_[k] = (head_[k] + 1) % n;
    } else {
        history_[k * n + (head_[k] + count_[k]) % n] = prediction;
        ++count_[k];
    }
}

bool PseudoState::detect_ambiguous(std::size_t i, std::size_t j) const {
    const std::size_t k = key(i, j);
    const std::size_t n = config_.capacity;
    if (count_[k] < n) return false;
    const double lo = 0.5 - config_.ambiguity_half_width;
    const double hi = 0.5 + config_.ambiguity_half_width;
    for (std::size_t a = 0; a < n; ++a) {
        const double v = history_[k * n + a];
        if (v < lo || v > hi) return false;
    }
    return true;
}

double PseudoState::stack_mean(std::size_t k) const {
    const std::size_t n = config_.capacity;
    double sum = 0.0;
    for (std::size_t a = 0; a < count_[k]; ++a) sum += history_[k * n + (head_[k] + a) % n];
    return sum / static_cast<double>(count_[k]);
}

void PseudoState::update(std::size_t i, std::size_t j, double prediction, int epoch, RngStream& rng) {
    const std::size_t k = key(i, j);
    if (!(config_.window_start < epoch && epoch < config_.window_end)) return;
    record_prediction(i, j, prediction);
    if (config_.disturbance && detect_ambiguous(i, j)) {
        values_[k] = inject_disturbance(prediction, rng);
    } else {
        values_[k] = std::clamp(stack_mean(k), 0.0, 1.0);
    }
}

bool PseudoState::operator==(const PseudoState& other) const {
    if (!(config_ == other.config_) || row_offset_ != other.row_offset_ || classes_ != other.classes_ ||
        values_ != other.values_ || count_ != other.count_)
        return false;
    for (std::size_t i = 0; i < num_instances(); ++i)
        for (std::size_t j : classes(i))
            if (stack(i, j) != other.stack(i, j)) return false;
    return true;
}

void PseudoState::write_checkpoint(std::ostream& out, int epoch) const {
    char buf[32];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    };
    out << "mlml-pseudo " << num_instances() << ' ' << size() << ' ' << config_.capacity << ' '
        << num(config_.ambiguity_half_width) << ' ' << config_.window_start << ' ' << config_.window_end << ' '
        << (config_.disturbance ? 1 : 0) << ' ' << epoch << '\n';
    for (std::size_t i = 0; i < num_instances(); ++i) {
        for (std::size_t k = row_offset_[i]; k < row_offset_[i + 1]; ++k) {
            out << i << ' ' << classes_[k] << ' ' << num(values_[k]) << ' ' << count_[k];
            for (double v : stack(i, classes_[k])) out << ' ' << num(v);
            out << '\n';
        }
    }
}

PseudoState PseudoState::read_checkpoint(std::istream& in, int& epoch) {
    std::string header;
    if (!std::getline(in, header)) throw DataError("empty pseudo-label checkpoint");
    std::istringstream hs(header);
    std::string tag;
    std::size_t n = 0, keys = 0;
    int disturbance = 1;
    PseudoState s;
    if (!(hs >> tag >> n >> keys >> s.config_.capacity >> s.config_.ambiguity_half_width >> s.config_.window_start >>
          s.config_.window_end >> disturbance >> epoch) ||
        tag != "mlml-pseudo" || s.config_.capacity == 0)
        throw DataError("bad pseudo-label checkpoint header: " + header);
    s.config_.disturbance = disturbance != 0;

    const std::size_t cap = s.config_.capacity;
    s.row_offset_.assign(n + 1, 0);
    s.classes_.reserve(keys);
    s.values_.reserve(keys);
    s.history_.assign(keys * cap, 0.0);
    s.head_.assign(keys, 0);
    s.count_.reserve(keys);

    std::string line;
    std::size_t prev_i = 0;
    while (s.classes_.size() < keys && std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::size_t i = 0, j = 0, count = 0;
        double value = 0.0;
        if (!(ls >> i >> j >> value >> count) || i >= n || count > cap || i < prev_i)
            throw DataError("bad pseudo-label checkpoint record: " + line);
        const std::size_t k = s.classes_.size();
        for (std::size_t a = 0; a < count; ++a)
            if (!(ls >> s.history_[k * cap + a])) throw DataError("truncated pseudo-label stack: " + line);
        s.classes_.push_back(j);
        s.values_.push_back(value);
        s.count_.push_back(count);
        ++s.row_offset_[i + 1];
        prev_i = i;
    }
    if (s.classes_.size() != keys) throw DataError("pseudo-label checkpoint is truncated");
    for (std::size_t i = 0; i < n; ++i) s.row_offset_[i + 1] += s.row_offset_[i];
    return s;
}

}  // namespace mlml
