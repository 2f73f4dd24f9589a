#include "mlml/label_space.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mlml/errors.hpp"

namespace mlml {

std::size_t LabelMatrix::row_positives(std::size_t i) const {
    auto r = row(i);
    return static_cast<std::size_t>(std::count(r.begin(), r.end(), std::uint8_t{1}));
}

Dataset::Dataset(std::size_t num_features, std::vector<double> features, LabelMatrix labels)
    : num_features_(num_features), features_(std::move(features)), labels_(std::move(labels)) {
    require(features_.size() == num_features_ * labels_.rows(),
            "Dataset: feature count does not match N * M");
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    std::vector<double> feats;
    feats.reserve(indices.size() * num_features_);
    LabelMatrix labels(indices.size(), num_classes());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const std::size_t i = indices[r];
        require(i < num_instances(), "Dataset::subset: index out of range");
        auto f = features(i);
        feats.insert(feats.end(), f.begin(), f.end());
        for (std::size_t j = 0; j < num_classes(); ++j) labels.set(r, j, labels_(i, j) == 1);
    }
    return Dataset(num_features_, std::move(feats), std::move(labels));
}

namespace {

double parse_double(std::string_view text, const char* what) {
    // std::from_chars for double is available in libstdc++ 11.
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw DataError(std::string("cannot parse ") + what + ": '" + std::string(text) + "'");
    return v;
}

std::string format_proportion(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", p);
    return buf;
}

void check_proportion(double p) {
    if (!(p > 0.0 && p <= 1.0))
        throw ContractError("proportion must lie in (0, 1], got " + format_proportion(p));
}

}  // namespace

Setting Setting::parse(const std::string& text) {
    if (text == "FOL") return fol();
    if (text == "SPL") return spl();
    if (text.size() > 4 && (text.rfind("POL", 0) == 0 || text.rfind("PPL", 0) == 0)) {
        std::string_view rest(text);
        rest.remove_prefix(3);
        if (rest.front() == ':') {
            rest.remove_prefix(1);
        } else if (rest.front() == '(' && rest.back() == ')') {
            rest.remove_prefix(1);
            rest.remove_suffix(1);
        } else {
            throw DataError("malformed setting: " + text);
        }
        const double p = parse_double(rest, "setting proportion");
        check_proportion(p);
        return text[1] == 'O' ? pol(p) : ppl(p);
    }
    throw DataError("unknown setting: " + text);
}

std::string Setting::name() const {
    switch (kind) {
        case Kind::FOL: return "FOL";
        case Kind::SPL: return "SPL";
        case Kind::POL: return "POL(" + format_proportion(proportion) + ")";
        case Kind::PPL: return "PPL(" + format_proportion(proportion) + ")";
    }
    return "?";
}

std::size_t ObservedLabelMatrix::observed_in_row(std::size_t i) const {
    auto r = row(i);
    return static_cast<std::size_t>(std::count_if(r.begin(), r.end(), [](Label v) { return v != Label::Missing; }));
}

std::size_t ObservedLabelMatrix::positives_in_row(std::size_t i) const {
    auto r = row(i);
    return static_cast<std::size_t>(std::count(r.begin(), r.end(), Label::Positive));
}

ObservedLabelMatrix fully_observed(const LabelMatrix& labels) {
    ObservedLabelMatrix out(labels.rows(), labels.cols(), Setting::fol(), 0);
    for (std::size_t i = 0; i < labels.rows(); ++i)
        for (std::size_t j = 0; j < labels.cols(); ++j)
            out.set(i, j, labels(i, j) ? Label::Positive : Label::Negative);
    return out;
}

std::size_t round_up_count(double proportion, std::size_t n) {
    const double exact = proportion * static_cast<double>(n);
    const double nearest = std::round(exact);
    if (std::abs(exact - nearest) <= 1e-9 * std::max(1.0, exact)) return static_cast<std::size_t>(nearest);
    return static_cast<std::size_t>(std::ceil(exact));
}

namespace {

// Partial Fisher-Yates: the first k entries of `pool` become a uniform
// sample without replacement.
void sample_prefix(std::vector<std::size_t>& pool, std::size_t k, RngStream& rng) {
    for (std::size_t a = 0; a < k; ++a) {
        const std::size_t b = a + static_cast<std::size_t>(rng.below(pool.size() - a));
        std::swap(pool[a], pool[b]);
    }
}

}  // namespace

ObservedLabelMatrix corrupt(const LabelMatrix& labels, Setting setting, RngSeed seed) {
    const std::size_t n = labels.rows();
    const std::size_t l = labels.cols();
    require(n > 0 && l > 0, "corrupt: empty label matrix");

    if (setting.kind == Setting::Kind::FOL) {
        ObservedLabelMatrix out(n, l, setting, seed);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < l; ++j) out.set(i, j, labels(i, j) ? Label::Positive : Label::Negative);
        return out;
    }
    if (setting.kind == Setting::Kind::POL || setting.kind == Setting::Kind::PPL) check_proportion(setting.proportion);

    ObservedLabelMatrix out(n, l, setting, seed);
    RngStream rng(seed, "corruption");
    std::vector<std::size_t> pool;
    std::size_t retained = 0;

    for (std::size_t i = 0; i < n; ++i) {
        pool.clear();
        if (setting.kind == Setting::Kind::POL) {
            pool.resize(l);
            std::iota(pool.begin(), pool.end(), std::size_t{0});
            const std::size_t k = round_up_count(setting.proportion, l);
            sample_prefix(pool, k, rng);
            for (std::size_t a = 0; a < k; ++a)
                out.set(i, pool[a], labels(i, pool[a]) ? Label::Positive : Label::Negative);
            continue;
        }

        for (std::size_t j = 0; j < l; ++j)
            if (labels(i, j)) pool.push_back(j);
        if (pool.empty()) {
            out.flag(i);
            continue;
        }
        ++retained;
        const std::size_t k =
            setting.kind == Setting::Kind::SPL ? 1 : round_up_count(setting.proportion, pool.size());
        sample_prefix(pool, k, rng);
        for (std::size_t a = 0; a < k; ++a) out.set(i, pool[a], Label::Positive);
    }

    if (setting.kind != Setting::Kind::POL && retained == 0)
        throw DataError("corrupt: " + setting.name() + " requested but no instance has a positive label");
    return out;
}

LabelStats compute_stats(const ObservedLabelMatrix& observed) {
    LabelStats s;
    s.total = observed.rows() * observed.cols();
    for (std::size_t i = 0; i < observed.rows(); ++i) {
        for (Label v : observed.row(i)) {
            if (v == Label::Positive) ++s.positives;
            else if (v == Label::Negative) ++s.negatives;
        }
    }
    s.observed = s.positives + s.negatives;
    if (s.observed == 0) throw DataError("compute_stats: no observed entries");
    s.positives_per_instance = static_cast<double>(s.positives) / static_cast<double>(observed.rows());
    s.observed_ratio = static_cast<double>(s.observed) / static_cast<double>(s.total);
    s.c1 = static_cast<double>(s.negatives) / static_cast<double>(s.observed);
    s.c2 = static_cast<double>(s.positives) / static_cast<double>(s.observed);
    return s;
}

StatsTable stats_report(const ObservedLabelMatrix& observed) {
    StatsTable t;
    t.setting = observed.setting().name();
    for (std::size_t i = 0; i < observed.rows(); ++i) {
        for (Label v : observed.row(i)) {
            if (v == Label::Positive) ++t.total_pos;
            else if (v == Label::Negative) ++t.total_neg;
        }
    }
    const double n = observed.rows() == 0 ? 1.0 : static_cast<double>(observed.rows());
    t.per_pos = static_cast<double>(t.total_pos) / n;
    t.per_neg = static_cast<double>(t.total_neg) / n;
    return t;
}

std::string StatsTable::to_string() const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-10s| %-10s| %-9s| %-10s| %-9s\n%-10s| %-10zu| %-9.1f| %-10zu| %-9.1f\n", "",
                  "total pos", "per. pos", "total neg", "per. neg", setting.c_str(), total_pos, per_pos, total_neg,
                  per_neg);
    return buf;
}

// ---------------------------------------------------------------- file I/O

namespace {

void write_features(std::ostream& out, std::span<const double> f) {
    char buf[32];
    for (std::size_t k = 0; k < f.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", f[k]);
        if (k) out << ',';
        out << buf;
    }
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (;;) {
        std::size_t pos = s.find(sep, start);
        parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}


struct Record {
    std::string_view features;
    std::string_view labels;
};

Record split_record(std::string_view line, std::size_t lineno) {
    const auto space = line.rfind(' ');
    if (space == std::string_view::npos)
        throw DataError("line " + std::to_string(lineno) + ": expected '<features> <labels>'");
    return {line.substr(0, space), line.substr(space + 1)};
}

void parse_features(std::string_view text, std::size_t m, std::vector<double>& into, std::size_t lineno) {
    if (m == 0) {
        if (!text.empty()) throw DataError("line " + std::to_string(lineno) + ": features present but M = 0");
        return;
    }
    auto parts = split(text, ',');
    if (parts.size() != m)
        throw DataError("line " + std::to_string(lineno) + ": expected " + std::to_string(m) + " features, got " +
                        std::to_string(parts.size()));
    for (auto p : parts) into.push_back(parse_double(p, "feature"));
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    return in;
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& d) {
    out << "mlml-dataset " << d.num_instances() << ' ' << d.num_features() << ' ' << d.num_classes() << '\n';
    std::string labels(d.num_classes(), '0');
    for (std::size_t i = 0; i < d.num_instances(); ++i) {
        write_features(out, d.features(i));
        for (std::size_t j = 0; j < d.num_classes(); ++j) labels[j] = d.labels()(i, j) ? '1' : '0';
        out << ' ' << labels << '\n';
    }
}

Dataset read_dataset(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw DataError("empty dataset input");
    std::istringstream hs(header);
    std::string tag;
    std::size_t n = 0, m = 0, l = 0;
    if (!(hs >> tag >> n >> m >> l) || tag != "mlml-dataset") throw DataError("bad dataset header: " + header);

    std::vector<double> feats;
    feats.reserve(n * m);
    LabelMatrix labels(n, l);
    std::string line;
    std::size_t row = 0, lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (row >= n) throw DataError("dataset file has more records than its header declares");
        auto rec = split_record(line, lineno);
        parse_features(rec.features, m, feats, lineno);
        if (rec.labels.size() != l) throw DataError("line " + std::to_string(lineno) + ": label width mismatch");
        for (std::size_t j = 0; j < l; ++j) {
            const char c = rec.labels[j];
            if (c != '0' && c != '1') throw DataError("line " + std::to_string(lineno) + ": labels must be 0 or 1");
            labels.set(row, j, c == '1');
        }
        ++row;
    }
    if (row != n)
        throw DataError("dataset: header says " + std::to_string(n) + " records, found " + std::to_string(row));
    return Dataset(m, std::move(feats), std::move(labels));
}

void save_dataset(const std::string& path, const Dataset& dataset) {
    auto out = open_out(path);
    write_dataset(out, dataset);
    if (!out) throw DataError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
    auto in = open_in(path);
    return read_dataset(in);
}

void write_observed(std::ostream& out, const ObservedLabelMatrix& obs, const Dataset& d) {
    require(obs.rows() == d.num_instances() && obs.cols() == d.num_classes(),
            "write_observed: observed matrix does not match dataset shape");
    out << "mlml-observed " << obs.rows() << ' ' << d.num_features() << ' ' << obs.cols() << ' '
        << obs.setting().name() << ' ' << obs.seed() << '\n';
    std::string labels(obs.cols(), 'u');
    for (std::size_t i = 0; i < obs.rows(); ++i) {
        write_features(out, d.features(i));
        for (std::size_t j = 0; j < obs.cols(); ++j) {
            const Label v = obs(i, j);
            labels[j] = v == Label::Positive ? '1' : v == Label::Negative ? '0' : 'u';
        }
        out << ' ' << labels << '\n';
    }
}

ObservedLabelMatrix read_observed(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw DataError("empty observed-label input");
    std::istringstream hs(header);
    std::string tag, setting_text;
    std::size_t n = 0, m = 0, l = 0;
    RngSeed seed = 0;
    if (!(hs >> tag >> n >> m >> l >> setting_text >> seed) || tag != "mlml-observed")
        throw DataError("bad observed-label header: " + header);
    const Setting setting = Setting::parse(setting_text);

    ObservedLabelMatrix obs(n, l, setting, seed);
    std::vector<double> scratch;
    std::string line;
    std::size_t row = 0, lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (row >= n) throw DataError("observed-label file has more records than its header declares");
        auto rec = split_record(line, lineno);
        scratch.clear();
        parse_features(rec.features, m, scratch, lineno);
        if (rec.labels.size() != l) throw DataError("line " + std::to_string(lineno) + ": label width mismatch");
        std::size_t positives = 0;
        for (std::size_t j = 0; j < l; ++j) {
            switch (rec.labels[j]) {
                case '0': obs.set(row, j, Label::Negative); break;
                case '1': obs.set(row, j, Label::Positive); ++positives; break;
                case 'u': break;
                default: throw DataError("line " + std::to_string(lineno) + ": label characters must be 0, 1 or u");
            }
        }
        const bool positive_only = setting.kind == Setting::Kind::PPL || setting.kind == Setting::Kind::SPL;
        if (positive_only && positives == 0) obs.flag(row);
        ++row;
    }
    if (row != n) throw DataError("observed-label file: header says " + std::to_string(n) + " records, found " +
                                  std::to_string(row));
    return obs;
}

void save_observed(const std::string& path, const ObservedLabelMatrix& observed, const Dataset& dataset) {
    auto out = open_out(path);
    write_observed(out, observed, dataset);
    if (!out) throw DataError("write failed: " + path);
}

ObservedLabelMatrix load_observed(const std::string& path) {
    auto in = open_in(path);
    return read_observed(in);
}

}  // namespace mlml
