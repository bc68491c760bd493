#pragma once

#include "enko/autodiff.hpp"
#include "enko/rng.hpp"
#include "enko/tensor.hpp"

namespace enko {

enum class DistFamily { gaussian, student_t };

// Diagonal distribution with differentiable parameters. mean and log_std are
// either both (d) vectors or both (n,d) matrices; the matrix form is n
// independent d-dimensional distributions, one per particle row.
struct Dist {
    DistFamily family = DistFamily::gaussian;
    ad::Node mean;
    ad::Node log_std;
    double df = 0.0;  // student_t only; fixed, not differentiated

    static Dist diag_gaussian(const ad::Node& mean, const ad::Node& log_std);
    static Dist student_t(double df, const ad::Node& loc, const ad::Node& log_scale);

    int dim() const;  // coordinate count d
    int rows() const { return mean.value().is_matrix() ? mean.value().rows() : 1; }
};

// Log density, summed over coordinates. Vector x against a vector dist gives
// a scalar; matrix x against a matrix dist gives a (n) vector of per-row
// log densities. Differentiable in x and in the distribution parameters.
ad::Node logpdf(const Dist& d, const ad::Node& x);

// Reparametrized sample: mean + std * eps for the Gaussian and
// loc + scale * (eps / sqrt(chi2_df / df)) per coordinate for the Student-t.
// Noise variates are constants on the tape, so gradients flow only through
// the distribution parameters (pathwise estimator).
ad::Node rsample(const Dist& d, Rng& rng);

// Per-coordinate Student-t noise eps/sqrt(chi2/df); exposed for tests.
double student_t_noise(double df, Rng& rng);

}  // namespace enko
