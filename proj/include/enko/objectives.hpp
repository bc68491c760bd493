#pragma once

#include <string>
#include <vector>

#include "enko/dataset.hpp"
#include "enko/filters.hpp"
#include "enko/ssm.hpp"

namespace enko {

enum class ObjectiveName { enko, fivo, fivor, iwae };
std::string to_string(ObjectiveName k);
ObjectiveName objective_from_string(const std::string& s);

struct ObjectiveConfig {
    ObjectiveName kind = ObjectiveName::enko;
    int n_particles = 16;
    FilterConfig filter;
    InflationConfig inflation;  // enko only
    // Evaluate the transition density in the weight numerator at the
    // particle's pre-filter proposal instead of the filtered history
    // (enko only; see README on the two conventions).
    bool transition_on_proposed = false;
    // Overrides the resampling draws (fivo/fivor), one index vector per
    // resampling event; used for frozen-ancestor gradient checks.
    const std::vector<std::vector<std::int32_t>>* forced_ancestors = nullptr;
};

struct ObjectiveResult {
    ad::Node value;      // scalar bound estimate for this sequence
    ad::Node surrogate;  // value plus fivor score terms; equals value otherwise
    double log_p_hat = 0.0;
    Tensor per_step_ess;     // (T)
    Tensor diversity;        // (T) mean pairwise particle distance, post-transform
    Tensor final_particles;  // (N, dz) carried particles after the last step
    std::vector<std::vector<std::int32_t>> ancestors;  // fivo/fivor draws per event
};

// log g(x_t|z) + log f(z|.) - log q(z|.), one entry per particle row.
ad::Node step_log_weights(const Dist& transition, const Dist& emission, const Dist& proposal,
                          const ad::Node& z, const Tensor& x_t);

// One sequence, one tape. `params` must be the bound parameter leaf on `tape`.
ObjectiveResult evaluate_objective(const SsmModel& model, const Tensor& x,
                                   const ObjectiveConfig& cfg, ad::Tape& tape,
                                   const ad::Node& params, Rng rng);

// Convenience: fresh no-grad tape, value and diagnostics only.
ObjectiveResult objective_value(const SsmModel& model, const Tensor& x,
                                const ObjectiveConfig& cfg, Rng rng);

struct BatchEval {
    double value = 0.0;  // mean objective over the batch
    Tensor grad;         // d(mean surrogate)/d(params); empty when !with_grad
    double min_ess = 0.0;
    bool finite = true;
};

// Mean objective (and gradient) over the given sequences. Per-sequence noise
// comes from rng.split(sequence index), so results do not depend on sequence
// order or thread count.
BatchEval batch_objective(const SsmModel& model, const Dataset& data,
                          const std::vector<int>& seq_indices, const ObjectiveConfig& cfg,
                          const Rng& rng, bool with_grad, int threads = 1);

}  // namespace enko
