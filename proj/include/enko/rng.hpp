#pragma once

#include <cstdint>

namespace enko {

// Splittable pseudo-random stream. Streams are derived by hashing rather than
// by jumping, so per-particle / per-time-step substreams are reproducible
// regardless of evaluation order. Same seed, same stream.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    // Independent child stream; pure (does not advance this stream).
    Rng split(std::uint64_t stream) const;
    Rng split(std::uint64_t a, std::uint64_t b) const { return split(a).split(b); }

    std::uint64_t next_u64();
    double uniform();   // [0, 1)
    double normal();    // standard normal (Box-Muller, cached pair)
    double gamma(double shape);  // unit scale
    double chi_square(double df) { return 2.0 * gamma(0.5 * df); }

  private:
    std::uint64_t state_;
    std::uint64_t gamma_inc_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace enko
