#pragma once

#include <cstdint>
#include <vector>

#include "enko/distributions.hpp"

namespace enko {

struct InflationConfig {
    enum class Method { none, rtpp, rtps };
    Method method = Method::none;
    double alpha = 0.0;  // in [0, 1]
    // Apply the RTPS blend to anomalies (deviations from the ensemble mean)
    // instead of to the particles themselves.
    bool rtps_anomaly = false;
};

struct FilterConfig {
    // Relative jitter added to diag of the observation sample covariance when
    // its Cholesky fails; the update is retried once.
    double jitter = 1e-6;
    enum class Resampling { multinomial, systematic };
    Resampling resampling = Resampling::multinomial;
    enum class Trigger { every_step, ess_below_half };
    Trigger trigger = Trigger::every_step;
};

// N latent particles at one time step plus their running log-weights.
// prev_proposed keeps the pre-filter particles of the step that produced
// `particles` (the transition-history handle some weight conventions need).
struct EnsembleState {
    ad::Node particles;       // (N, dz)
    ad::Node cum_log_weight;  // (N)
    ad::Node prev_proposed;   // (N, dz); invalid before the first step
};

// Recoverable: observation sample covariance stayed non-SPD after jitter.
class DegenerateObservationCovariance : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Stochastic (perturbed-observation) analysis step. Draws one emission sample
// per particle, builds the gain from the sample covariance of those draws and
// the cross-covariance of particles against emission means, shifts each
// particle by gain * (x_t - sample_i), then applies inflation. Fully
// recorded on the tape; log-weights are untouched.
EnsembleState enkf_update(const EnsembleState& state, const Tensor& x_t, const Dist& emission,
                          const FilterConfig& cfg, const InflationConfig& infl, Rng& rng);

ad::Node rtpp_inflate(const ad::Node& prior, const ad::Node& filtered, double alpha);
ad::Node rtps_inflate(const ad::Node& prior, const ad::Node& filtered, double alpha,
                      bool anomaly = false);
ad::Node apply_inflation(const ad::Node& prior, const ad::Node& filtered,
                         const InflationConfig& infl);

// Ancestor draws from normalized weights; count < 0 draws one per weight.
// Multinomial is iid; systematic uses one uniform offset and stratified
// inversion, so counts per index differ from count * w_i by less than one.
std::vector<std::int32_t> multinomial_resample(const Tensor& log_weights, Rng& rng,
                                               int count = -1);
std::vector<std::int32_t> systematic_resample(const Tensor& log_weights, Rng& rng,
                                              int count = -1);

Tensor normalized_weights(const Tensor& log_weights);
double ess(const Tensor& log_weights);

// Mean pairwise Euclidean distance between particle rows (diversity metric).
double mean_pairwise_distance(const Tensor& particles);

}  // namespace enko
