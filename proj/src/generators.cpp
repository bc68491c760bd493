#include "enko/generators.hpp"

#include <cmath>

namespace enko {

Dataset simulate(const SsmModel& model, int t_len, int b, Rng rng, int n_train, int n_valid) {
    check(t_len >= 1 && b >= 1, "simulate: need t_len >= 1 and b >= 1");
    const int dz = model.dz(), dx = model.dx();
    if (n_train < 0) n_train = (8 * b) / 10;
    if (n_valid < 0) n_valid = std::max(0, (b - n_train) / 2);
    check(n_train + n_valid <= b, "simulate: splits exceed sample count");

    Dataset ds;
    ds.sequences = Tensor::zeros({b, t_len, dx});
    ds.latents = Tensor::zeros({b, t_len, dz});
    ds.n_train = n_train;
    ds.n_valid = n_valid;
    ds.n_test = b - n_train - n_valid;
    ds.scale = Tensor::full({dx}, 1.0);
    ds.generator = model.kind();

    for (int i = 0; i < b; ++i) {
        Rng r = rng.split(i);
        ad::Tape tape;
        tape.grad_enabled = false;
        auto [leaf, bm] = model.bind_fresh(tape, false);
        ad::Node z = rsample(bm->initial_dist(1), r);
        for (int s = 0; s < t_len; ++s) {
            if (s > 0) z = rsample(bm->transition_dist(z), r);
            ad::Node x = rsample(bm->emission_dist(z), r);
            for (int j = 0; j < dz; ++j) ds.latents(i, s, j) = z.value()(0, j);
            for (int j = 0; j < dx; ++j) ds.sequences(i, s, j) = x.value()(0, j);
        }
    }
    return ds;
}

namespace {

Dataset ode_dataset(int b, int t_len, int dx, int dz) {
    Dataset ds;
    ds.sequences = Tensor::zeros({b, t_len, dx});
    ds.latents = Tensor::zeros({b, t_len, dz});
    ds.scale = Tensor::full({dx}, 1.0);
    return ds;
}

}  // namespace

Dataset fhn_generate(const FhnConfig& cfg, Rng rng) {
    check(cfg.dt > 0.0, "fhn_generate: dt must be positive");
    check(cfg.n_train + cfg.n_valid <= cfg.n_samples, "fhn_generate: splits exceed samples");
    Dataset ds = ode_dataset(cfg.n_samples, cfg.t_len, 1, 2);
    ds.n_train = cfg.n_train;
    ds.n_valid = cfg.n_valid;
    ds.n_test = cfg.n_samples - cfg.n_train - cfg.n_valid;
    ds.generator = "fhn";

    auto rhs = [&cfg](const double* y, double* dy) { fhn_rhs(cfg, y, dy); };
    for (int i = 0; i < cfg.n_samples; ++i) {
        Rng r = rng.split(i);
        double y[2];
        y[0] = (2.0 * r.uniform() - 1.0) * cfg.init_range;
        y[1] = (2.0 * r.uniform() - 1.0) * cfg.init_range;
        for (int s = 0; s < cfg.t_len; ++s) {
            if (s > 0) rk4_step(rhs, y, 2, cfg.dt);
            ds.latents(i, s, 0) = y[0];
            ds.latents(i, s, 1) = y[1];
            ds.sequences(i, s, 0) = y[0] + cfg.obs_std * r.normal();
        }
    }
    if (cfg.abs_div_scaling) ds.apply_abs_div_scaling();
    return ds;
}

Dataset lorenz_generate(const LorenzConfig& cfg, Rng rng) {
    check(cfg.dt > 0.0, "lorenz_generate: dt must be positive");
    check(cfg.n_train + cfg.n_valid <= cfg.n_samples, "lorenz_generate: splits exceed samples");
    Dataset ds = ode_dataset(cfg.n_samples, cfg.t_len, 3, 3);
    ds.n_train = cfg.n_train;
    ds.n_valid = cfg.n_valid;
    ds.n_test = cfg.n_samples - cfg.n_train - cfg.n_valid;
    ds.generator = "lorenz";

    auto rhs = [&cfg](const double* y, double* dy) { lorenz_rhs(cfg, y, dy); };
    for (int i = 0; i < cfg.n_samples; ++i) {
        Rng r = rng.split(i);
        double y[3];
        for (int j = 0; j < 3; ++j) y[j] = (2.0 * r.uniform() - 1.0) * cfg.init_range;
        for (int s = 0; s < cfg.t_len; ++s) {
            if (s > 0) rk4_step(rhs, y, 3, cfg.dt);
            for (int j = 0; j < 3; ++j) {
                ds.latents(i, s, j) = y[j];
                ds.sequences(i, s, j) = y[j] + cfg.obs_std * r.normal();
            }
        }
    }
    if (cfg.abs_div_scaling) ds.apply_abs_div_scaling();
    return ds;
}

}  // namespace enko
