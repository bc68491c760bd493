#include <cmath>

#include "doctest.h"
#include "enko/generators.hpp"
#include "enko/kalman.hpp"
#include "enko/training.hpp"

using namespace enko;

namespace {

LinearGaussianSsm teacher_1d(std::uint64_t seed) {
    LinearGaussianSsm m(1, 1);
    Rng init(seed);
    m.init_benchmark(init);
    m.set("A_f", Tensor::mat(1, 1, {0.9}));
    m.set("A_q", Tensor::mat(1, 1, {0.9}));
    m.set("A_g", Tensor::mat(1, 1, {1.0}));
    m.set_all("log_sigma_q1", std::log(0.5));
    m.set_all("log_sigma_f1", std::log(0.5));
    m.set_all("log_sigma_q", std::log(0.45));
    m.set_all("log_sigma_f", std::log(0.4));
    m.set_all("log_sigma_g", std::log(0.3));
    return m;
}

TrainConfig quick_train(ObjectiveName kind, int epochs, std::uint64_t seed) {
    TrainConfig tc;
    tc.learning_rate = 3e-3;
    tc.epochs = epochs;
    tc.batch_size = 8;
    tc.seed = seed;
    tc.objective.kind = kind;
    tc.objective.n_particles = 4;
    return tc;
}

}  // namespace

TEST_CASE("adam leaves parameters alone under zero gradient") {
    Tensor p = Tensor::vec({1.0, -2.0});
    Tensor g = Tensor::zeros({2});
    AdamState st;
    adam_step(p, g, st, 0.1);
    adam_step(p, g, st, 0.1);
    CHECK(p(0) == 1.0);
    CHECK(p(1) == -2.0);
    CHECK(st.step == 2);
}

TEST_CASE("first adam step has magnitude ~ lr") {
    Tensor p = Tensor::vec({0.0});
    Tensor g = Tensor::vec({0.37});
    AdamState st;
    adam_step(p, g, st, 1e-3);
    CHECK(std::abs(p(0)) == doctest::Approx(1e-3).epsilon(1e-4));
    CHECK(p(0) < 0.0);  // descends along the gradient
}

TEST_CASE("repeated identical gradients never grow the step") {
    Tensor p = Tensor::vec({0.0});
    Tensor g = Tensor::vec({2.0});
    AdamState st;
    adam_step(p, g, st, 1e-2);
    double step1 = std::abs(p(0));
    double prev = p(0);
    adam_step(p, g, st, 1e-2);
    double step2 = std::abs(p(0) - prev);
    CHECK(step2 <= step1 + 1e-15);
    // closed form: with constant g, mhat/sqrt(vhat) == 1 at every step
    CHECK(step1 == doctest::Approx(1e-2).epsilon(1e-6));
    CHECK(step2 == doctest::Approx(1e-2).epsilon(1e-6));
}

TEST_CASE("zero epochs change nothing") {
    LinearGaussianSsm teacher = teacher_1d(1);
    Dataset data = simulate(teacher, 6, 10, Rng(2), 8, 2);
    LinearGaussianSsm student = teacher_1d(99);
    Tensor before = student.params();
    TrainResult res = train(student, data, quick_train(ObjectiveName::enko, 0, 3));
    CHECK(student.params().storage() == before.storage());
    CHECK(res.history.empty());
}

TEST_CASE("training is deterministic given the seed") {
    LinearGaussianSsm teacher = teacher_1d(4);
    Dataset data = simulate(teacher, 5, 12, Rng(5), 10, 2);
    auto run = [&] {
        LinearGaussianSsm student = teacher_1d(77);
        TrainResult res = train(student, data, quick_train(ObjectiveName::fivo, 3, 6));
        return std::make_pair(student.params().storage(), res);
    };
    auto [p1, r1] = run();
    auto [p2, r2] = run();
    CHECK(p1 == p2);
    REQUIRE(r1.history.size() == r2.history.size());
    for (size_t i = 0; i < r1.history.size(); ++i) {
        CHECK(r1.history[i].train_objective == r2.history[i].train_objective);
        CHECK(r1.history[i].valid_objective == r2.history[i].valid_objective);
    }
}

TEST_CASE("a non-finite parameter point skips updates and reports it") {
    LinearGaussianSsm teacher = teacher_1d(7);
    Dataset data = simulate(teacher, 5, 8, Rng(8), 6, 2);
    LinearGaussianSsm student = teacher_1d(7);
    student.params()(0) = std::numeric_limits<double>::quiet_NaN();
    TrainResult res = train(student, data, quick_train(ObjectiveName::iwae, 1, 9));
    REQUIRE(res.history.size() == 1);
    CHECK(res.history[0].skipped_batches > 0);
    CHECK(!res.diagnostics.empty());
}

TEST_CASE("training improves the validation objective on a teacher-student pair") {
    LinearGaussianSsm teacher = teacher_1d(10);
    Dataset data = simulate(teacher, 10, 48, Rng(11), 40, 8);
    LinearGaussianSsm student = teacher_1d(10);
    // perturb away from the teacher
    student.set("A_f", Tensor::mat(1, 1, {0.5}));
    student.set_all("log_sigma_g", std::log(0.8));

    TrainConfig tc = quick_train(ObjectiveName::enko, 60, 12);
    LinearGaussianSsm probe = student;
    double before = batch_objective(probe, data, data.valid_indices(), tc.objective,
                                    Rng(12).split(202), false, 1)
                        .value;
    TrainResult res = train(student, data, tc);
    CHECK(res.best_valid > before);
    CHECK(res.best_epoch >= 0);
}

TEST_CASE("objective moving average is nondecreasing early in training") {
    LinearGaussianSsm teacher = teacher_1d(13);
    Dataset data = simulate(teacher, 10, 40, Rng(14), 32, 8);
    for (ObjectiveName kind :
         {ObjectiveName::enko, ObjectiveName::fivo, ObjectiveName::iwae}) {
        // start far enough from the teacher that 100 epochs stay on the climb
        LinearGaussianSsm student = teacher_1d(13);
        student.set("A_f", Tensor::mat(1, 1, {-0.3}));
        student.set("A_q", Tensor::mat(1, 1, {-0.3}));
        student.set_all("log_sigma_g", std::log(2.5));
        TrainConfig tc = quick_train(kind, 100, 15);
        tc.learning_rate = 1e-3;
        tc.objective.n_particles = 16;  // keeps evaluation noise below the trend
        TrainResult res = train(student, data, tc);
        const int win = 10;
        int drops = 0, pairs = 0;
        auto ma = [&](int i) {
            double s = 0.0;
            for (int k = i; k < i + win; ++k) s += res.history[k].train_objective;
            return s / win;
        };
        for (int i = 0; i + win + 1 <= static_cast<int>(res.history.size()); ++i) {
            ++pairs;
            if (ma(i + 1) < ma(i) - 1e-9) ++drops;
        }
        INFO(to_string(kind) << ": " << drops << " drops over " << pairs << " pairs");
        CHECK(drops <= static_cast<int>(0.05 * pairs) + 1);
    }
}

TEST_CASE("perfect noiseless model predicts with zero error") {
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    LinearGaussianSsm m(1, 1);
    m.set("mu_q1", Tensor::vec({0.4}));
    m.set("mu_f1", Tensor::vec({0.4}));
    m.set("A_f", Tensor::mat(1, 1, {1.0}));
    m.set("A_q", Tensor::mat(1, 1, {1.0}));
    m.set("A_g", Tensor::mat(1, 1, {2.0}));
    for (const char* name : {"log_sigma_q1", "log_sigma_f1", "log_sigma_q", "log_sigma_f",
                             "log_sigma_g"})
        m.set_all(name, kNegInf);
    Dataset data = simulate(m, 8, 4, Rng(16), 2, 1);
    ObjectiveConfig cfg;
    cfg.kind = ObjectiveName::enko;
    cfg.n_particles = 4;
    MseReport rep = predict_mse(m, data, Split::test, cfg, 3, {1, 2, 5}, Rng(17));
    for (double v : rep.mse) CHECK(v == doctest::Approx(0.0).epsilon(1e-24));
}

TEST_CASE("one-step mse matches the Kalman predictive variance") {
    LinearGaussianSsm m = teacher_1d(18);
    const int t_len = 12, context = 8;
    Dataset data = simulate(m, t_len, 1000, Rng(19), 0, 0);
    ObjectiveConfig cfg;
    cfg.kind = ObjectiveName::enko;
    cfg.n_particles = 64;
    MseReport rep = predict_mse(m, data, Split::test, cfg, context, {1}, Rng(20));

    // expected: A_g P_pred A_g^T + sigma_g^2 at the step after the context
    LgssmGenerative g = m.generative();
    KalmanResult kr = kalman_filter(g, data.sequence(0));
    double p_pred = kr.pred_cov[context](0, 0);
    double expected = g.a_g(0, 0) * g.a_g(0, 0) * p_pred + g.sigma_g(0) * g.sigma_g(0);
    CHECK(rep.mse[0] == doctest::Approx(expected).epsilon(0.10));
}

TEST_CASE("prediction error is invariant to sequence order") {
    LinearGaussianSsm m = teacher_1d(21);
    Dataset data = simulate(m, 8, 12, Rng(22), 0, 0);
    ObjectiveConfig cfg;
    cfg.kind = ObjectiveName::enko;
    cfg.n_particles = 8;
    MseReport base = predict_mse(m, data, Split::test, cfg, 4, {1, 3}, Rng(23));

    // reverse the sequences in storage
    Dataset shuffled = data;
    for (int i = 0; i < data.b(); ++i)
        for (int s = 0; s < data.t(); ++s)
            for (int j = 0; j < data.dx(); ++j)
                shuffled.sequences(data.b() - 1 - i, s, j) = data.sequences(i, s, j);
    MseReport perm = predict_mse(m, shuffled, Split::test, cfg, 4, {1, 3}, Rng(23));
    for (size_t k = 0; k < base.mse.size(); ++k)
        CHECK(base.mse[k] == doctest::Approx(perm.mse[k]).epsilon(1e-12));
}

TEST_CASE("the true model beats a random model at one step ahead") {
    LinearGaussianSsm m = teacher_1d(24);
    Dataset data = simulate(m, 10, 300, Rng(25), 0, 0);
    LinearGaussianSsm rival = teacher_1d(24);
    Rng scramble(26);
    rival.init_benchmark(scramble);
    rival.set("A_f", Tensor::mat(1, 1, {-0.4}));
    rival.set("A_q", Tensor::mat(1, 1, {-0.4}));
    rival.set_all("log_sigma_f", std::log(0.9));

    ObjectiveConfig cfg;
    cfg.kind = ObjectiveName::enko;
    cfg.n_particles = 16;
    MseReport good = predict_mse(m, data, Split::test, cfg, 6, {1}, Rng(27));
    MseReport bad = predict_mse(rival, data, Split::test, cfg, 6, {1}, Rng(27));

    // bootstrap the difference of means at 99%
    const int n = 300, reps = 2000;
    // reconstruct per-sequence errors by rerunning per-sequence is costly;
    // compare with the reported stderr instead: require separation beyond
    // 3 combined standard errors (stronger than the 99% bootstrap)
    double gap = bad.mse[0] - good.mse[0];
    double se = std::sqrt(good.stderr_[0] * good.stderr_[0] +
                          bad.stderr_[0] * bad.stderr_[0]);
    INFO("good " << good.mse[0] << " bad " << bad.mse[0] << " se " << se);
    CHECK(gap > 3.0 * se);
    (void)n;
    (void)reps;
}

TEST_CASE("horizon beyond the sequence is rejected") {
    LinearGaussianSsm m = teacher_1d(28);
    Dataset data = simulate(m, 6, 4, Rng(29), 2, 1);
    ObjectiveConfig cfg;
    CHECK_THROWS_AS(predict_mse(m, data, Split::test, cfg, 4, {3}, Rng(30)),
                    std::invalid_argument);
}
