#include <cmath>

#include "doctest.h"
#include "enko/experiments.hpp"
#include "enko/generators.hpp"

using namespace enko;

TEST_CASE("variance aggregation splits square matrices into diag and offdiag") {
    ParamLayout layout;
    layout.add("v", {3});
    layout.add("A", {2, 2});
    layout.add("R", {2, 3});
    Tensor per = Tensor::vec({7, 8, 9, /*A*/ 1, 2, 3, 4, /*R*/ 1, 1, 1, 2, 2, 2});
    auto groups = aggregate_variances(layout, per);
    REQUIRE(groups.size() == 4);
    CHECK(groups[0].first == "v");
    CHECK(groups[0].second == doctest::Approx(8.0));
    CHECK(groups[1].first == "A.diag");
    CHECK(groups[1].second == doctest::Approx(2.5));  // (1+4)/2
    CHECK(groups[2].first == "A.offdiag");
    CHECK(groups[2].second == doctest::Approx(2.5));  // (2+3)/2
    CHECK(groups[3].first == "R");
    CHECK(groups[3].second == doctest::Approx(1.5));
}

TEST_CASE("zero per-element variances aggregate to zero") {
    ParamLayout layout;
    layout.add("A", {2, 2});
    auto groups = aggregate_variances(layout, Tensor::zeros({4}));
    for (const auto& [name, v] : groups) CHECK(v == 0.0);
}

TEST_CASE("variance experiment is invariant to estimator order") {
    GradVarSpec spec;
    spec.t_len = 8;
    spec.batch = 3;
    spec.n_simulations = 5;
    spec.seed = 3;
    auto fwd = grad_variance_experiment(spec, {ObjectiveName::enko, ObjectiveName::fivo});
    auto rev = grad_variance_experiment(spec, {ObjectiveName::fivo, ObjectiveName::enko});
    REQUIRE(fwd.size() == 2);
    REQUIRE(rev.size() == 2);
    const VarianceReport& enko_fwd = fwd[0];
    const VarianceReport& enko_rev = rev[1];
    REQUIRE(enko_fwd.estimator == "enko");
    REQUIRE(enko_rev.estimator == "enko");
    for (size_t i = 0; i < enko_fwd.groups.size(); ++i)
        CHECK(enko_fwd.groups[i].second == enko_rev.groups[i].second);
}

TEST_CASE("score-term estimator inflates transition-gradient variance") {
    GradVarSpec spec;
    spec.t_len = 30;
    spec.batch = 4;
    spec.n_simulations = 40;
    spec.seed = 5;
    auto reports = grad_variance_experiment(spec, {ObjectiveName::fivo, ObjectiveName::fivor});
    const VarianceReport& fivo = reports[0];
    const VarianceReport& fivor = reports[1];
    CHECK(fivor.group("A_f.diag") > fivo.group("A_f.diag"));
    CHECK(fivor.group("A_f.offdiag") > fivo.group("A_f.offdiag"));
}

TEST_CASE("variance experiment covers the nonlinear model") {
    GradVarSpec spec;
    spec.model_kind = "nonlinear_student";
    spec.t_len = 6;
    spec.batch = 2;
    spec.n_simulations = 4;
    spec.seed = 7;
    auto reports = grad_variance_experiment(spec, {ObjectiveName::enko});
    REQUIRE(reports.size() == 1);
    bool has_cf = false;
    for (const auto& [name, v] : reports[0].groups) {
        CHECK(v >= 0.0);
        CHECK(std::isfinite(v));
        has_cf |= name == "C_f";
    }
    CHECK(has_cf);
}

namespace {

LinearGaussianSsm sweep_teacher() {
    LinearGaussianSsm m(1, 1);
    m.set("A_f", Tensor::mat(1, 1, {0.85}));
    m.set("A_q", Tensor::mat(1, 1, {0.85}));
    m.set("A_g", Tensor::mat(1, 1, {1.0}));
    m.set_all("log_sigma_q1", std::log(0.5));
    m.set_all("log_sigma_f1", std::log(0.5));
    m.set_all("log_sigma_q", std::log(0.5));
    m.set_all("log_sigma_f", std::log(0.45));
    m.set_all("log_sigma_g", std::log(0.3));
    return m;
}

}  // namespace

TEST_CASE("single-value sweep equals a direct train plus evaluate") {
    LinearGaussianSsm teacher = sweep_teacher();
    Dataset data = simulate(teacher, 8, 12, Rng(8), 8, 3);

    TrainConfig base;
    base.learning_rate = 1e-3;
    base.epochs = 2;
    base.batch_size = 4;
    base.seed = 9;
    base.objective.kind = ObjectiveName::enko;
    base.objective.n_particles = 4;
    SweepEvalConfig ec;
    ec.context_len = 4;
    ec.horizons = {1, 2};

    SweepResult res = sweep(SweepAxis::n_particles, {4.0}, teacher, data, base, ec);
    REQUIRE(res.cells.size() == 1);
    REQUIRE(!res.cells[0].failed);
    CHECK(res.selected == 0);

    auto direct = teacher.clone();
    train(*direct, data, base);
    MseReport rep = predict_mse(*direct, data, Split::valid, base.objective, ec.context_len,
                                ec.horizons, Rng(base.seed).split(31337));
    for (size_t k = 0; k < rep.mse.size(); ++k)
        CHECK(res.cells[0].val_mse[k] == doctest::Approx(rep.mse[k]).epsilon(1e-12));
}

TEST_CASE("sweep selects the argmin and survives failing cells") {
    LinearGaussianSsm teacher = sweep_teacher();
    Dataset data = simulate(teacher, 8, 10, Rng(10), 6, 3);
    TrainConfig base;
    base.epochs = 1;
    base.batch_size = 4;
    base.seed = 11;
    base.objective.kind = ObjectiveName::enko;
    base.objective.n_particles = 4;
    SweepEvalConfig ec;
    ec.context_len = 4;
    ec.horizons = {1};

    // n_particles = 1 violates the floor and must fail without killing the sweep
    SweepResult res = sweep(SweepAxis::n_particles, {1.0, 4.0, 8.0}, teacher, data, base, ec);
    REQUIRE(res.cells.size() == 3);
    CHECK(res.cells[0].failed);
    CHECK(!res.cells[1].failed);
    CHECK(!res.cells[2].failed);
    REQUIRE(res.selected > 0);
    for (const auto& cell : res.cells)
        if (!cell.failed) CHECK(res.cells[res.selected].mean_mse <= cell.mean_mse);
}

TEST_CASE("sweep cells are independent of value order") {
    LinearGaussianSsm teacher = sweep_teacher();
    Dataset data = simulate(teacher, 8, 10, Rng(20), 6, 3);
    TrainConfig base;
    base.epochs = 1;
    base.batch_size = 4;
    base.seed = 21;
    base.objective.kind = ObjectiveName::enko;
    base.objective.n_particles = 4;
    base.objective.inflation.method = InflationConfig::Method::rtpp;
    SweepEvalConfig ec;
    ec.context_len = 4;
    ec.horizons = {1};
    SweepResult fwd =
        sweep(SweepAxis::inflation_factor, {0.1, 0.3}, teacher, data, base, ec);
    SweepResult rev =
        sweep(SweepAxis::inflation_factor, {0.3, 0.1}, teacher, data, base, ec);
    CHECK(fwd.cells[0].mean_mse == rev.cells[1].mean_mse);
    CHECK(fwd.cells[1].mean_mse == rev.cells[0].mean_mse);
}

TEST_CASE("sweep rejects an empty value list") {
    LinearGaussianSsm teacher = sweep_teacher();
    Dataset data = simulate(teacher, 6, 6, Rng(12), 4, 1);
    TrainConfig base;
    SweepEvalConfig ec;
    CHECK_THROWS_AS(sweep(SweepAxis::inflation_factor, {}, teacher, data, base, ec),
                    std::invalid_argument);
}

TEST_CASE("inflation sweep runs the rtps path") {
    LinearGaussianSsm teacher = sweep_teacher();
    Dataset data = simulate(teacher, 8, 8, Rng(13), 6, 1);
    TrainConfig base;
    base.epochs = 1;
    base.batch_size = 3;
    base.seed = 14;
    base.objective.kind = ObjectiveName::enko;
    base.objective.n_particles = 4;
    base.objective.inflation.method = InflationConfig::Method::rtpp;
    SweepEvalConfig ec;
    ec.context_len = 4;
    ec.horizons = {1, 2};
    SweepResult res =
        sweep(SweepAxis::inflation_factor, {0.1, 0.2, 0.3}, teacher, data, base, ec);
    REQUIRE(res.cells.size() == 3);
    for (const auto& cell : res.cells) {
        CHECK(!cell.failed);
        CHECK(std::isfinite(cell.mean_mse));
    }
    CHECK(res.selected >= 0);
}
