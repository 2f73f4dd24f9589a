#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "mlml/errors.hpp"
#include "mlml/experiment.hpp"
#include "mlml/metrics.hpp"
#include "mlml/trainer.hpp"
#include "support/test_support.hpp"

using namespace mlml;
using mlml::testing::max_relative_error;
using mlml::testing::numeric_gradient;
using mlml::testing::random_vector;

namespace {

constexpr LossChoice kAllLosses[] = {LossChoice::Proposed, LossChoice::AN,     LossChoice::WAN,
                                     LossChoice::Focal,    LossChoice::ASL,    LossChoice::BceFol,
                                     LossChoice::BceLsFol};

Dataset small_benchmark(RngSeed seed, std::size_t n = 120) {
    DataSpec spec;
    spec.num_train = n;
    spec.num_test = 60;
    spec.num_features = 8;
    spec.num_classes = 5;
    spec.prevalence.assign(5, 0.3);
    spec.seed = seed;
    return gen_data(spec).train;
}

ScoringModel random_model(ModelKind kind, std::size_t m, std::size_t l, RngStream& rng) {
    return ScoringModel::initialized(kind, m, kind == ModelKind::Linear ? 0 : 4, l, rng);
}

}  // namespace

TEST_CASE("parameter counts") {
    CHECK(ScoringModel::parameter_count(ModelKind::Linear, 32, 0, 10) == 330);
    CHECK(ScoringModel::parameter_count(ModelKind::Mlp1, 32, 64, 10) == 64 * 33 + 10 * 65);
    CHECK(ScoringModel(ModelKind::Mlp1, 3, 2, 4).parameters().size() == 2 * 4 + 4 * 3);
    CHECK_THROWS_AS(ScoringModel(ModelKind::Linear, 3, 2, 4), ContractError);
    CHECK_THROWS_AS(ScoringModel(ModelKind::Mlp1, 3, 0, 4), ContractError);
    CHECK(parse_model_kind(to_string(ModelKind::Mlp1)) == ModelKind::Mlp1);
}

TEST_CASE("forward examples") {
    const ScoringModel zero(ModelKind::Mlp1, 3, 4, 2);
    const std::vector<double> x{1.0, -2.0, 0.5};
    for (double s : zero.forward(x)) CHECK(s == 0.0);

    ScoringModel lin(ModelKind::Linear, 1, 0, 1);
    lin.parameters()[0] = 2.0;
    CHECK(lin.forward(std::vector<double>{1.0})[0] == 2.0);

    RngStream rng(41);
    ScoringModel mlp = ScoringModel::initialized(ModelKind::Mlp1, 3, 4, 2, rng);
    auto p = mlp.parameters();
    const std::size_t w2 = 4 * 3 + 4;
    for (std::size_t a = w2; a < w2 + 2 * 4; ++a) p[a] = 0.0;
    p[w2 + 8] = 0.25;
    p[w2 + 9] = -1.5;
    for (int trial = 0; trial < 5; ++trial) {
        const auto out = mlp.forward(random_vector(rng, 3, -3.0, 3.0));
        CHECK(out == std::vector<double>{0.25, -1.5});
    }
    CHECK_THROWS_AS(lin.forward(x), ContractError);
}

TEST_CASE("initialization stays within the fan-in bound") {
    RngStream rng(42);
    const auto m = ScoringModel::initialized(ModelKind::Mlp1, 16, 9, 3, rng);
    const auto p = m.parameters();
    for (std::size_t a = 0; a < 9 * 17; ++a) CHECK(std::abs(p[a]) <= 1.0 / 4.0);
    for (std::size_t a = 9 * 17; a < p.size(); ++a) CHECK(std::abs(p[a]) <= 1.0 / 3.0);
}

TEST_CASE("backward examples and finite-difference check") {
    RngStream rng(43);
    const ScoringModel lin = random_model(ModelKind::Linear, 3, 2, rng);
    const std::vector<double> x{0.5, -1.0, 2.0};
    for (double g : lin.backward(x, std::vector<double>{0.0, 0.0})) CHECK(g == 0.0);
    const auto g = lin.backward(x, std::vector<double>{3.0, -2.0});
    CHECK(std::vector<double>(g.begin(), g.begin() + 3) == std::vector<double>{1.5, -3.0, 6.0});
    CHECK(std::vector<double>(g.begin() + 3, g.begin() + 6) == std::vector<double>{-1.0, 2.0, -4.0});
    CHECK(g[6] == 3.0);
    CHECK(g[7] == -2.0);

    for (ModelKind kind : {ModelKind::Linear, ModelKind::Mlp1}) {
        for (int trial = 0; trial < 20; ++trial) {
            ScoringModel model = random_model(kind, 4, 3, rng);
            const auto feat = random_vector(rng, 4, -2.0, 2.0);
            const auto gl = random_vector(rng, 3, -1.0, 1.0);
            const auto analytic = model.backward(feat, gl);
            const auto numeric = numeric_gradient(
                [&](std::span<const double> theta) {
                    std::copy(theta.begin(), theta.end(), model.parameters().begin());
                    const auto s = model.forward(feat);
                    return std::inner_product(s.begin(), s.end(), gl.begin(), 0.0);
                },
                std::vector<double>(model.parameters().begin(), model.parameters().end()));
            CHECK(max_relative_error(analytic, numeric) < 1e-4);
        }
    }
}

TEST_CASE("end-to-end parameter gradients for every loss and model kind") {
    RngStream rng(44);
    const std::size_t m = 4, l = 5;
    LabelMatrix y(20, l);
    for (std::size_t i = 0; i < 20; ++i) {
        y.set(i, i % l, true);
        for (std::size_t j = 0; j < l; ++j)
            if (rng.bernoulli(0.3)) y.set(i, j, true);
    }
    const auto obs = corrupt(y, Setting::pol(0.4), 5);
    const auto stats = compute_stats(obs);
    PseudoConfig wide;
    wide.window_start = -100;
    wide.window_end = 100;
    auto pseudo = PseudoState::init(stats, obs, wide);
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t j : pseudo.classes(i)) pseudo.update(i, j, rng.uniform01(), 0, rng);

    for (ModelKind kind : {ModelKind::Linear, ModelKind::Mlp1}) {
        for (LossChoice choice : kAllLosses) {
            TrainConfig cfg;
            cfg.loss = choice;
            cfg.model_kind = kind;
            const LossParams params = resolve_loss_params(cfg, stats);
            for (std::size_t i = 0; i < 20; ++i) {
                ScoringModel model = random_model(kind, m, l, rng);
                const auto x = random_vector(rng, m, -1.5, 1.5);
                const auto row = obs.row(i);
                const int epoch = static_cast<int>(i % 11);
                auto loss_at = [&](std::span<const double> theta) {
                    std::copy(theta.begin(), theta.end(), model.parameters().begin());
                    return instance_loss(model.forward(x), row, i, &pseudo, cfg, params, epoch);
                };
                const std::vector<double> theta(model.parameters().begin(), model.parameters().end());
                const auto logits = model.forward(x);
                if (choice == LossChoice::ASL) {
                    bool near_hinge = false;
                    for (double s : logits) near_hinge |= std::abs(sigmoid(s) - 0.05) < 2e-3;
                    if (near_hinge) continue;
                }
                const auto analytic = model.backward(x, loss_at(theta).grad_logits);
                const auto numeric =
                    numeric_gradient([&](std::span<const double> t) { return loss_at(t).value; }, theta);
                INFO(to_string(choice), " ", to_string(kind), " instance ", i);
                CHECK(max_relative_error(analytic, numeric) < 1e-4);
            }
        }
    }
}

TEST_CASE("FOL instance under the proposed loss takes a plain BCE step") {
    RngStream rng(45);
    LabelMatrix y(1, 4);
    y.set(0, 2, true);
    const auto obs = fully_observed(y);
    const auto stats = compute_stats(obs);
    auto pseudo = PseudoState::init(stats, obs);
    TrainConfig cfg;
    cfg.learning_rate = 0.3;
    const auto params = resolve_loss_params(cfg, stats);
    ScoringModel model = random_model(ModelKind::Linear, 3, 4, rng);
    ScoringModel expected = model;
    const auto x = random_vector(rng, 3, -1.0, 1.0);

    const auto b = bce(expected.forward(x), std::vector<double>{0.0, 0.0, 1.0, 0.0});
    expected.apply_step(expected.backward(x, b.grad_logits), 0.3);
    RngStream drng(1);
    const double value = train_instance(model, x, obs.row(0), 0, &pseudo, cfg, params, 7, drng);
    CHECK(value == b.value);
    CHECK(model == expected);
}

TEST_CASE("zero learning rate leaves the model but still records predictions") {
    RngStream rng(46);
    LabelMatrix y(1, 4);
    y.set(0, 0, true);
    const auto obs = corrupt(y, Setting::ppl(1.0), 1);
    const auto stats = compute_stats(obs);
    auto pseudo = PseudoState::init(stats, obs);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    ScoringModel model = random_model(ModelKind::Mlp1, 2, 4, rng);
    const ScoringModel before = model;
    const auto x = random_vector(rng, 2, -1.0, 1.0);
    RngStream drng(2);
    train_instance(model, x, obs.row(0), 0, &pseudo, cfg, resolve_loss_params(cfg, stats), 4, drng);
    CHECK(model == before);
    const auto logits = model.forward(x);
    for (std::size_t j : pseudo.classes(0)) CHECK(pseudo.stack(0, j) == std::vector<double>{sigmoid(logits[j])});
}

TEST_CASE("weighted loss ablation combines parts with unit weights") {
    LabelMatrix y(1, 4);
    y.set(0, 1, true);
    y.set(0, 3, true);
    ObservedLabelMatrix obs(1, 4, Setting::pol(0.5), 0);
    obs.set(0, 1, Label::Positive);
    obs.set(0, 2, Label::Negative);
    const auto stats = compute_stats(obs);
    const auto pseudo = PseudoState::init(stats, obs);
    TrainConfig cfg;
    cfg.ablation.no_weighted_schedule = true;
    const auto params = resolve_loss_params(cfg, stats);
    const std::vector<double> logits{0.3, -0.2, 1.1, 0.4};

    const auto o = observed_loss(std::vector<double>{-0.2, 1.1}, std::vector<double>{1.0, 0.0});
    const auto targets = threshold_pseudo(pseudo.values(0), params.threshold);
    const auto u = unobserved_loss(std::vector<double>{0.3, 0.4}, targets, params);
    for (int e : {0, 5, 10}) {
        const auto t = instance_loss(logits, obs.row(0), 0, &pseudo, cfg, params, e);
        CHECK(t.value == doctest::Approx(o.value + u.value).epsilon(1e-14));
    }
    cfg.ablation.no_weighted_schedule = false;
    const auto w = curriculum_weights(4, cfg.epochs);
    CHECK(instance_loss(logits, obs.row(0), 0, &pseudo, cfg, params, 4).value ==
          doctest::Approx(w.observed * o.value + w.unobserved * u.value).epsilon(1e-14));
}

TEST_CASE("ablation resolution") {
    TrainConfig cfg;
    LabelStats stats;
    stats.c1 = 0.8;
    stats.c2 = 0.2;
    CHECK(resolve_loss_params(cfg, stats).c1 == 0.8);
    cfg.ablation.no_imbalance_weights = true;
    CHECK(resolve_loss_params(cfg, stats).c1 == 1.0);
    CHECK(resolve_loss_params(cfg, stats).c2 == 1.0);
    cfg.ablation.no_running_average = true;
    CHECK(resolve_pseudo_config(cfg).capacity == 1);
    CHECK(resolve_pseudo_config(cfg).disturbance);
    cfg.ablation.no_disturbance = true;
    CHECK_FALSE(resolve_pseudo_config(cfg).disturbance);
    CHECK(cfg.ablation.label() ==
          "Without Update + Without Disturbances + Without Imbalance Design");
    CHECK(Ablation{}.label().empty());

    cfg.loss = LossChoice::Focal;
    CHECK(effective_learning_rate(cfg, 10) == doctest::Approx(cfg.learning_rate / 10));
    cfg.loss = LossChoice::WAN;
    CHECK(effective_learning_rate(cfg, 10) == cfg.learning_rate);
    for (LossChoice c : kAllLosses) CHECK(parse_loss_choice(to_string(c)) == c);
    CHECK(display_name(LossChoice::BceFol) == "BCE (FOL)");
}

TEST_CASE("training-level ablation identities") {
    const Dataset d = small_benchmark(3);
    const auto obs = corrupt(d, Setting::pol(0.4), 4);
    TrainConfig cfg;
    cfg.seed = 9;
    cfg.ablation.no_disturbance = true;
    const auto r = run_training(d, obs, d, cfg);
    std::size_t checked = 0;
    for (std::size_t i = 0; i < obs.rows(); ++i) {
        for (std::size_t j : r.pseudo.classes(i)) {
            const auto st = r.pseudo.stack(i, j);
            REQUIRE(st.size() == 3);
            const double mean = (st[0] + st[1] + st[2]) / 3.0;
            CHECK(std::abs(r.pseudo.value(i, j) - mean) <= 1e-12);
            ++checked;
        }
    }
    CHECK(checked > 0);

    cfg.ablation.no_running_average = true;
    const auto latest = run_training(d, obs, d, cfg);
    for (std::size_t i = 0; i < obs.rows(); ++i)
        for (std::size_t j : latest.pseudo.classes(i)) {
            const auto st = latest.pseudo.stack(i, j);
            REQUIRE(st.size() == 1);
            CHECK(latest.pseudo.value(i, j) == st[0]);
        }

    // Pseudo keys never cover observed entries.
    for (std::size_t i = 0; i < obs.rows(); ++i)
        for (std::size_t j = 0; j < obs.cols(); ++j)
            CHECK(r.pseudo.contains(i, j) == (obs(i, j) == Label::Missing));
}

TEST_CASE("one full-batch epoch equals one manual gradient step") {
    const Dataset d = small_benchmark(5, 40);
    const auto obs = corrupt(d, Setting::pol(0.6), 6);
    TrainConfig cfg;
    cfg.loss = LossChoice::AN;
    cfg.epochs = 1;
    cfg.batch_size = d.num_instances();
    cfg.learning_rate = 0.7;
    cfg.seed = 12;

    RngStream init(cfg.seed, "init");
    ScoringModel expected = ScoringModel::initialized(ModelKind::Linear, 8, 0, 5, init);
    std::vector<double> grad(expected.parameters().size(), 0.0);
    for (std::size_t i = 0; i < d.num_instances(); ++i) {
        const auto b = an_loss(expected.forward(d.features(i)), obs.row(i));
        const auto g = expected.backward(d.features(i), b.grad_logits);
        for (std::size_t a = 0; a < g.size(); ++a) grad[a] += g[a] / static_cast<double>(d.num_instances());
    }
    expected.apply_step(grad, 0.7);
    const auto r = run_training(d, obs, d, cfg);
    CHECK(max_relative_error(r.final_model.parameters(), expected.parameters(), 1e-12) < 1e-12);
    CHECK(r.history.size() == 1);
}

TEST_CASE("training is deterministic and seed-dependent") {
    const Dataset d = small_benchmark(7);
    const auto obs = corrupt(d, Setting::pol(0.4), 8);
    for (ModelKind kind : {ModelKind::Linear, ModelKind::Mlp1}) {
        TrainConfig cfg;
        cfg.seed = 3;
        cfg.model_kind = kind;
        cfg.hidden = 6;
        const auto a = run_training(d, obs, d, cfg);
        const auto b = run_training(d, obs, d, cfg);
        CHECK(a.final_model == b.final_model);
        CHECK(a.best_model == b.best_model);
        CHECK(a.pseudo == b.pseudo);
        REQUIRE(a.history.size() == b.history.size());
        for (std::size_t e = 0; e < a.history.size(); ++e) {
            CHECK(a.history[e].train_loss == b.history[e].train_loss);
            CHECK(a.history[e].val_map == b.history[e].val_map);
        }
        cfg.seed = 4;
        CHECK_FALSE(run_training(d, obs, d, cfg).final_model == a.final_model);
    }
}

TEST_CASE("training reduces the loss on separable data") {
    DataSpec spec;
    spec.num_train = 300;
    spec.num_test = 50;
    spec.noise = 0.05;
    spec.seed = 17;
    const Dataset d = gen_data(spec).train;
    const auto obs = fully_observed(d.labels());
    TrainConfig cfg;
    cfg.learning_rate = 1.0;
    cfg.seed = 2;
    const auto r = run_training(d, obs, d, cfg);
    CHECK(r.history.back().train_loss < r.history.front().train_loss);
    CHECK(r.best_val_map > 0.9);
    CHECK(r.best_val_map == r.history[static_cast<std::size_t>(r.best_epoch)].val_map);
    const auto eval = mean_ap(predict(r.best_model, d), d.labels());
    CHECK(eval.mean_ap == r.best_val_map);
}

TEST_CASE("resuming from checkpoints continues bit-identically") {
    const Dataset d = small_benchmark(19);
    const auto obs = corrupt(d, Setting::pol(0.4), 20);
    TrainConfig cfg;
    cfg.seed = 21;
    cfg.model_kind = ModelKind::Mlp1;
    cfg.hidden = 5;
    const auto full = run_training(d, obs, d, cfg);

    TrainConfig first = cfg;
    first.stop_epoch = 5;
    const auto half = run_training(d, obs, d, first);
    REQUIRE(half.history.size() == 5);

    std::stringstream model_file, pseudo_file;
    half.final_model.write_checkpoint(model_file, cfg.seed, 5);
    half.pseudo.write_checkpoint(pseudo_file, 5);
    ResumeState resume;
    resume.model = ScoringModel::read_checkpoint(model_file);
    resume.pseudo = PseudoState::read_checkpoint(pseudo_file, resume.next_epoch);
    CHECK(resume.model == half.final_model);
    CHECK(resume.next_epoch == 5);

    const auto rest = run_training(d, obs, d, cfg, &resume);
    CHECK(rest.final_model == full.final_model);
    CHECK(rest.pseudo == full.pseudo);
    REQUIRE(rest.history.size() == 5);
    for (std::size_t e = 0; e < 5; ++e) CHECK(rest.history[e].train_loss == full.history[e + 5].train_loss);
}

TEST_CASE("training input errors") {
    const Dataset d = small_benchmark(23, 10);
    const auto obs = fully_observed(d.labels());
    TrainConfig cfg;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(run_training(d, obs, d, cfg), ContractError);
    cfg.batch_size = 4;
    const auto wrong = corrupt(small_benchmark(23, 12).labels(), Setting::fol(), 1);
    CHECK_THROWS_AS(run_training(d, wrong, d, cfg), ContractError);
    CHECK_THROWS_AS(run_training(Dataset(8, {}, LabelMatrix(0, 5)), ObservedLabelMatrix(0, 5, Setting::fol(), 0), d, cfg),
                    DataError);
}
