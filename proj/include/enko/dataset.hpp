#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "enko/tensor.hpp"

namespace enko {

// Sequence container with contiguous train/valid/test splits. Observations
// are stored post-scaling; `scale` holds the per-channel divisors so users
// can unscale.
struct Dataset {
    Tensor sequences;  // (B, T, dx)
    Tensor latents;    // (B, T, dz) or empty
    int n_train = 0, n_valid = 0, n_test = 0;
    Tensor scale;  // (dx)
    std::string generator;
    std::string config_echo;
    std::uint64_t seed = 0;

    int b() const { return sequences.dim(0); }
    int t() const { return sequences.dim(1); }
    int dx() const { return sequences.dim(2); }
    int dz() const { return latents.empty() ? 0 : latents.dim(2); }

    Tensor sequence(int i) const;  // (T, dx)
    Tensor latent(int i) const;    // (T, dz)

    std::vector<int> train_indices() const;
    std::vector<int> valid_indices() const;
    std::vector<int> test_indices() const;

    // Divide each observation channel by its max absolute value over the
    // training split; records the divisors in `scale`.
    void apply_abs_div_scaling();
};

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);
std::string dataset_summary(const Dataset& ds);
void export_sequences_csv(const Dataset& ds, const std::string& path);

}  // namespace enko
