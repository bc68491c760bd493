#pragma once

#include "enko/dataset.hpp"
#include "enko/rng.hpp"
#include "enko/ssm.hpp"

namespace enko {

// Ancestral sampling from a model's generative part: z1 ~ f(z1),
// z_t ~ f(.|z_{t-1}), x_t ~ g(.|z_t). No scaling applied.
Dataset simulate(const SsmModel& model, int t_len, int b, Rng rng, int n_train = -1,
                 int n_valid = -1);

struct FhnConfig {
    int n_samples = 400;
    int n_train = 200, n_valid = 40;  // rest is test
    int t_len = 40;
    double dt = 0.25;
    double obs_std = 0.1;
    // membrane dynamics: dV = V - V^3/3 - W + i_ext, dW = a (b V + d - c W)
    double a = 0.7, b = 0.8, c = 0.08, d = 0.0, i_ext = 0.0;
    double init_range = 3.0;  // initial states uniform in [-r, r]^2
    bool abs_div_scaling = true;
};

// FitzHugh-Nagumo trajectories via fixed-step RK4; the scalar observation is
// the membrane potential plus Gaussian noise.
Dataset fhn_generate(const FhnConfig& cfg, Rng rng);

struct LorenzConfig {
    int n_samples = 100;
    int n_train = 66, n_valid = 17;
    int t_len = 80;
    double dt = 0.02;
    double obs_std = 0.1;
    double sigma = 10.0, rho = 28.0, beta = 8.0 / 3.0;
    double init_range = 10.0;  // uniform in [-r, r]^3
    bool abs_div_scaling = true;
};

Dataset lorenz_generate(const LorenzConfig& cfg, Rng rng);

inline void fhn_rhs(const FhnConfig& cfg, const double* y, double* dy) {
    const double v = y[0], w = y[1];
    dy[0] = v - v * v * v / 3.0 - w + cfg.i_ext;
    dy[1] = cfg.a * (cfg.b * v + cfg.d - cfg.c * w);
}

inline void lorenz_rhs(const LorenzConfig& cfg, const double* y, double* dy) {
    dy[0] = cfg.sigma * (y[1] - y[0]);
    dy[1] = y[0] * (cfg.rho - y[2]) - y[1];
    dy[2] = y[0] * y[1] - cfg.beta * y[2];
}

// One classical RK4 step of dy/dt = rhs(y), in place. dim <= 4.
template <typename F>
inline void rk4_step(F&& rhs, double* y, int dim, double dt) {
    double k1[4], k2[4], k3[4], k4[4], tmp[4];
    rhs(y, k1);
    for (int i = 0; i < dim; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
    rhs(tmp, k2);
    for (int i = 0; i < dim; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
    rhs(tmp, k3);
    for (int i = 0; i < dim; ++i) tmp[i] = y[i] + dt * k3[i];
    rhs(tmp, k4);
    for (int i = 0; i < dim; ++i) y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

}  // namespace enko
