#include "enko/rng.hpp"

#include <cmath>

namespace enko {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// derive an odd increment so distinct streams walk distinct orbits
std::uint64_t mix_gamma(std::uint64_t z) {
    z = mix64(z) | 1ULL;
    int pop = __builtin_popcountll(z ^ (z >> 1));
    if (pop < 24) z ^= 0xAAAAAAAAAAAAAAAAULL;
    return z;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : state_(mix64(seed + kGolden)), gamma_inc_(mix_gamma(seed)) {}

Rng Rng::split(std::uint64_t stream) const {
    Rng child(0);
    child.state_ = mix64(state_ + mix64(stream + kGolden));
    child.gamma_inc_ = mix_gamma(state_ ^ mix64(stream * 0xD2B74407B1CE6E93ULL + 1));
    child.has_cached_ = false;
    return child;
}

std::uint64_t Rng::next_u64() {
    state_ += gamma_inc_;
    return mix64(state_);
}

double Rng::uniform() {
    // 53-bit mantissa in [0,1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
}

double Rng::gamma(double shape) {
    // Marsaglia-Tsang squeeze; shape < 1 via the boost x(alpha+1) * u^{1/alpha}
    if (shape < 1.0) {
        double u = 0.0;
        while (u == 0.0) u = uniform();
        return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = normal();
        double t = 1.0 + c * x;
        if (t <= 0.0) continue;
        double v = t * t * t;
        double u = 0.0;
        while (u == 0.0) u = uniform();
        double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
}

}  // namespace enko
