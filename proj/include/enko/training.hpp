#pragma once

#include <string>
#include <vector>

#include "enko/objectives.hpp"

namespace enko {

struct AdamState {
    Tensor m, v;
    long step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

// Standard bias-corrected Adam descent step on `params` along `grad`.
void adam_step(Tensor& params, const Tensor& grad, AdamState& state, double lr);

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 0;
    int batch_size = 16;
    std::uint64_t seed = 0;
    ObjectiveConfig objective;
    double grad_clip_norm = 0.0;  // 0 disables clipping
    int threads = 1;
};

struct EpochRecord {
    int epoch = 0;
    double train_objective = 0.0;
    double valid_objective = 0.0;
    int skipped_batches = 0;
};

struct TrainResult {
    Tensor best_params;
    double best_valid = 0.0;
    int best_epoch = -1;
    std::vector<EpochRecord> history;
    std::vector<std::string> diagnostics;
};

// Maximizes the configured objective by minibatch gradient ascent with Adam.
// Leaves the model at the best-validation parameters. Deterministic given
// cfg.seed (validation noise is held fixed across epochs). A non-finite batch
// skips its update and is reported in the epoch record.
TrainResult train(SsmModel& model, const Dataset& data, const TrainConfig& cfg);

enum class Split { train, valid, test };

struct MseReport {
    int context_len = 0;
    std::vector<int> horizons;
    std::vector<double> mse;     // per horizon, over sequences and dims
    std::vector<double> stderr_; // over sequences
};

// Filters particles through x_{1:context_len} with the configured system,
// then rolls the generative model forward (sampled transitions, emission
// means averaged over particles) with no further observations. MSE is in the
// dataset's scaled units.
MseReport predict_mse(const SsmModel& model, const Dataset& data, Split split,
                      const ObjectiveConfig& cfg, int context_len,
                      const std::vector<int>& horizons, Rng rng);

std::vector<int> split_indices(const Dataset& data, Split split);

}  // namespace enko
