#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "mlml/errors.hpp"
#include "mlml/experiment.hpp"
#include "mlml/losses.hpp"
#include "mlml/metrics.hpp"
#include "mlml/pseudo_labels.hpp"

namespace py = pybind11;
using namespace mlml;

namespace {

using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U8 = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using I8 = py::array_t<std::int8_t, py::array::c_style | py::array::forcecast>;

std::span<const double> view(const F64& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

py::tuple bundle(const LossBundle& b) { return py::make_tuple(b.value, to_array(b.grad_logits)); }

LabelMatrix to_labels(const U8& y) {
    if (y.ndim() != 2) throw ContractError("labels must be a 2-D array");
    LabelMatrix m(static_cast<std::size_t>(y.shape(0)), static_cast<std::size_t>(y.shape(1)));
    auto r = y.unchecked<2>();
    for (py::ssize_t i = 0; i < y.shape(0); ++i)
        for (py::ssize_t j = 0; j < y.shape(1); ++j) m.set(i, j, r(i, j) != 0);
    return m;
}

py::array_t<std::uint8_t> from_labels(const LabelMatrix& m) {
    py::array_t<std::uint8_t> out({m.rows(), m.cols()});
    auto w = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) w(i, j) = m(i, j);
    return out;
}

// Observed rows use -1 for a missing entry.
std::vector<Label> to_row(const I8& row) {
    std::vector<Label> out;
    for (py::ssize_t j = 0; j < row.size(); ++j) {
        const auto v = row.data()[j];
        out.push_back(v < 0 ? Label::Missing : v ? Label::Positive : Label::Negative);
    }
    return out;
}

ObservedLabelMatrix to_observed(const I8& z, const std::string& setting) {
    if (z.ndim() != 2) throw ContractError("observed labels must be a 2-D array");
    ObservedLabelMatrix m(z.shape(0), z.shape(1), Setting::parse(setting), 0);
    auto r = z.unchecked<2>();
    for (py::ssize_t i = 0; i < z.shape(0); ++i)
        for (py::ssize_t j = 0; j < z.shape(1); ++j)
            m.set(i, j, r(i, j) < 0 ? Label::Missing : r(i, j) ? Label::Positive : Label::Negative);
    return m;
}

py::array_t<std::int8_t> from_observed(const ObservedLabelMatrix& m) {
    py::array_t<std::int8_t> out({m.rows(), m.cols()});
    auto w = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const Label v = m(i, j);
            w(i, j) = v == Label::Missing ? -1 : v == Label::Positive ? 1 : 0;
        }
    return out;
}

py::array_t<double> features(const Dataset& d) {
    py::array_t<double> out({d.num_instances(), d.num_features()});
    std::copy(d.feature_data().begin(), d.feature_data().end(), out.mutable_data());
    return out;
}

ExperimentConfig config_from(const py::dict& options) {
    KeyValueConfig kv;
    for (const auto& [k, v] : options) kv.set(py::str(k), py::str(v));
    return ExperimentConfig::from_key_values(kv);
}

py::dict record_dict(const RunRecord& r) {
    py::dict d;
    d["config_hash"] = r.config_hash;
    d["method"] = r.method;
    d["setting"] = r.setting;
    d["seed"] = r.seed;
    d["epoch_best"] = r.epoch_best;
    d["val_map"] = r.val_map;
    d["test_map"] = r.test_map ? py::object(py::float_(*r.test_map)) : py::object(py::none());
    d["wall_s"] = r.wall_seconds;
    d["train_loss"] = r.train_loss;
    d["val_map_history"] = r.val_map_history;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multi-label learning with missing labels: corruption, pseudo labels, losses, training, mAP";

    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);

    // Label space.
    m.def("corrupt", [](const U8& labels, const std::string& setting, RngSeed seed) {
        return from_observed(corrupt(to_labels(labels), Setting::parse(setting), seed));
    }, py::arg("labels"), py::arg("setting"), py::arg("seed"),
       "Hide labels per setting; returns an int8 matrix with -1 for missing entries.");
    m.def("compute_stats", [](const I8& observed) {
        const auto s = compute_stats(to_observed(observed, "FOL"));
        py::dict d;
        d["positives_per_instance"] = s.positives_per_instance;
        d["observed_ratio"] = s.observed_ratio;
        d["observed"] = s.observed;
        d["total"] = s.total;
        d["positives"] = s.positives;
        d["negatives"] = s.negatives;
        d["c1"] = s.c1;
        d["c2"] = s.c2;
        return d;
    }, py::arg("observed"));
    m.def("round_up_count", &round_up_count, py::arg("proportion"), py::arg("n"));

    // Pseudo labels.
    m.def("initial_pseudo_value", &initial_pseudo_value, py::arg("positives_per_instance"),
          py::arg("observed_ratio"), py::arg("observed_positives"), py::arg("unobserved"));
    m.def("inject_disturbance", [](double p, RngSeed seed) {
        RngStream rng(seed);
        return inject_disturbance(p, rng);
    }, py::arg("prediction"), py::arg("seed"));

    // Losses: each returns (value, grad_logits).
    m.def("bce", [](const F64& s, const F64& y) { return bundle(bce(view(s), view(y))); });
    m.def("observed_loss", [](const F64& s, const F64& y) { return bundle(observed_loss(view(s), view(y))); });
    m.def("cfs", [](const F64& x, const F64& y, double c1, double c2, bool grad_wrt_x) {
        return bundle(cfs(view(x), view(y), c1, c2, grad_wrt_x ? CfsOutput::X : CfsOutput::Y));
    }, py::arg("x"), py::arg("y"), py::arg("c1"), py::arg("c2"), py::arg("grad_wrt_x") = false);
    m.def("unobserved_loss", [](const F64& s, const F64& pseudo, double alpha, double beta, double c1, double c2) {
        LossParams p;
        p.alpha = alpha;
        p.beta = beta;
        p.c1 = c1;
        p.c2 = c2;
        return bundle(unobserved_loss(view(s), view(pseudo), p));
    }, py::arg("logits"), py::arg("pseudo"), py::arg("alpha") = 0.95, py::arg("beta") = 0.05, py::arg("c1") = 0.5,
       py::arg("c2") = 0.5);
    m.def("threshold_pseudo", [](const F64& v, double t) { return to_array(threshold_pseudo(view(v), t)); },
          py::arg("pseudo"), py::arg("t") = 0.7);
    m.def("curriculum_weights", [](int e, int te) {
        const auto w = curriculum_weights(e, te);
        return py::make_tuple(w.observed, w.unobserved);
    }, py::arg("epoch"), py::arg("total_epochs"));
    m.def("an_loss", [](const F64& s, const I8& row) { return bundle(an_loss(view(s), to_row(row))); });
    m.def("wan_loss", [](const F64& s, const I8& row, double g) { return bundle(wan_loss(view(s), to_row(row), g)); },
          py::arg("logits"), py::arg("row"), py::arg("wan_gamma"));
    m.def("focal_loss", [](const F64& s, const F64& y, double ap, double an, double g) {
        return bundle(focal_loss(view(s), view(y), {ap, an, g}));
    }, py::arg("logits"), py::arg("targets"), py::arg("alpha_pos") = 0.9, py::arg("alpha_neg") = 0.1,
       py::arg("gamma") = 2.0);
    m.def("asl_loss", [](const F64& s, const F64& y, double gp, double gn, double margin) {
        return bundle(asl_loss(view(s), view(y), {gp, gn, margin}));
    }, py::arg("logits"), py::arg("targets"), py::arg("gamma_pos") = 8.0, py::arg("gamma_neg") = 1.0,
       py::arg("margin") = 0.05);
    m.def("bce_ls_loss", [](const F64& s, const F64& y, double eps) { return bundle(bce_ls_loss(view(s), view(y), eps)); },
          py::arg("logits"), py::arg("targets"), py::arg("ls_epsilon") = 0.1);

    // Metrics.
    m.def("average_precision", [](const F64& scores, const U8& labels) {
        return average_precision(view(scores), {labels.data(), static_cast<std::size_t>(labels.size())});
    }, py::arg("scores"), py::arg("labels"));
    m.def("mean_ap", [](const F64& scores, const U8& labels) {
        const auto r = mean_ap(view(scores), to_labels(labels));
        return py::make_tuple(r.mean_ap, r.per_class_ap);
    }, py::arg("scores"), py::arg("labels"), "Returns (mAP, per-class APs with None for classes without positives).");
    m.def("precision_recall_at_k", [](const F64& scores, const U8& labels, std::size_t k) {
        const auto r = precision_recall_at_k(view(scores), {labels.data(), static_cast<std::size_t>(labels.size())}, k);
        return py::make_tuple(r.precision, r.recall);
    }, py::arg("scores"), py::arg("labels"), py::arg("k"));

    // Experiments.
    m.def("gen_data", [](const py::dict& options) {
        const auto cfg = config_from(options);
        const auto g = gen_data(cfg.data);
        return py::make_tuple(features(g.train), from_labels(g.train.labels()), features(g.test),
                              from_labels(g.test.labels()));
    }, py::arg("options") = py::dict(), "Returns (X_train, Y_train, X_test, Y_test) for config-style options.");
    m.def("config_hash", [](const py::dict& options) { return config_from(options).hash(); });
    m.def("run_experiment", [](const py::dict& options) {
        const auto cfg = config_from(options);
        RunRecord rec;
        {
            py::gil_scoped_release release;
            rec = run_experiment(cfg, prepare_inputs(cfg)).record;
        }
        return record_dict(rec);
    }, py::arg("options"), "Train one configuration; options use the config-file keys.");
    m.def("run_sweep", [](const py::dict& options) {
        const auto cfg = config_from(options);
        SweepOutcome out;
        {
            py::gil_scoped_release release;
            out = run_sweep(cfg, prepare_inputs(cfg));
        }
        py::list grid;
        for (const auto& r : out.grid) grid.append(record_dict(r));
        return py::make_tuple(grid, record_dict(out.selected));
    }, py::arg("options"));
}
