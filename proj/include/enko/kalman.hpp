#pragma once

#include <vector>

#include "enko/tensor.hpp"

namespace enko {

// Generative half of a linear-Gaussian state-space model:
//   z_1 ~ N(mu1, diag(sigma1^2)),  z_t = A_f z_{t-1} + N(0, diag(sigma_f^2)),
//   x_t = A_g z_t + N(0, diag(sigma_g^2)).
struct LgssmGenerative {
    Tensor mu1;      // (dz)
    Tensor sigma1;   // (dz) std
    Tensor a_f;      // (dz, dz)
    Tensor sigma_f;  // (dz)
    Tensor a_g;      // (dx, dz)
    Tensor sigma_g;  // (dx)
};

struct KalmanResult {
    double loglik = 0.0;
    std::vector<Tensor> pred_mean;  // per step, before seeing x_t
    std::vector<Tensor> pred_cov;
    std::vector<Tensor> filt_mean;  // after seeing x_t
    std::vector<Tensor> filt_cov;
};

// Exact log p(x_{1:T}) by the prediction-error decomposition, plus the
// filtering moments. x is (T, dx).
KalmanResult kalman_filter(const LgssmGenerative& m, const Tensor& x);
double kalman_loglik(const LgssmGenerative& m, const Tensor& x);

// One exact analysis step: posterior moments of z given prior N(mean, cov)
// and observation x under x = A_g z + N(0, diag(sigma_g^2)).
void kalman_analysis(const LgssmGenerative& m, const Tensor& prior_mean,
                     const Tensor& prior_cov, const Tensor& x_obs, Tensor& post_mean,
                     Tensor& post_cov);

}  // namespace enko
