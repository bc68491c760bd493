#pragma once

#include <map>
#include <string>
#include <vector>

#include "enko/training.hpp"

namespace enko {

struct GradVarSpec {
    std::string model_kind = "lgssm";  // lgssm | nonlinear_student
    int dx = 2, dz = 2;
    int t_len = 100;
    int n_particles = 16;
    int batch = 10;
    int n_simulations = 100;
    std::uint64_t seed = 0;
    FilterConfig filter;
    InflationConfig inflation;
    bool transition_on_proposed = false;
};

struct VarianceReport {
    std::string estimator;
    // group name -> element-averaged gradient variance (w.r.t. sigma, not
    // log sigma, for scale parameters)
    std::vector<std::pair<std::string, double>> groups;
    double group(const std::string& name) const;
};

// Element-wise variance of per-parameter-group averaged gradients over
// n_simulations independent evaluations at one fixed parameter point and one
// fixed simulated dataset. Square matrices are split into diag/offdiag
// groups; vectors and rectangular matrices are averaged over all elements.
std::vector<VarianceReport> grad_variance_experiment(
    const GradVarSpec& spec, const std::vector<ObjectiveName>& estimators);

// Aggregation helper, exposed for tests: per-element variances -> groups.
std::vector<std::pair<std::string, double>> aggregate_variances(const ParamLayout& layout,
                                                                const Tensor& per_element);

enum class SweepAxis { n_particles, inflation_factor };

struct SweepCell {
    double value = 0.0;
    std::vector<double> val_mse;  // per horizon
    double mean_mse = 0.0;
    bool failed = false;
    std::string error;
};

struct SweepResult {
    SweepAxis axis = SweepAxis::n_particles;
    std::vector<int> horizons;
    std::vector<SweepCell> cells;
    int selected = -1;  // argmin of mean validation MSE over horizons
};

struct SweepEvalConfig {
    int context_len = 10;
    std::vector<int> horizons = {1, 5, 10};
};

// Trains a fresh clone of `prototype` per axis value (same seed), evaluates
// k-step MSE on the validation split, and selects the argmin cell. A failing
// cell is recorded and the sweep continues.
SweepResult sweep(SweepAxis axis, const std::vector<double>& values,
                  const SsmModel& prototype, const Dataset& data, const TrainConfig& base,
                  const SweepEvalConfig& eval_cfg);

}  // namespace enko
