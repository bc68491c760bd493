#include "enko/filters.hpp"

#include <algorithm>
#include <cmath>

namespace enko {

namespace {

// per-dimension sample std with the 1/(N-1) convention
ad::Node col_sample_std(const ad::Node& m) {
    const int n = m.rows();
    ad::Node centered = ad::sub_rowvec(m, ad::col_mean(m));
    ad::Node var = ad::mul_const(ad::col_mean(ad::square(centered)),
                                 static_cast<double>(n) / (n - 1.0));
    return ad::sqrt(var);
}

ad::Node centered_cols(const ad::Node& m) { return ad::sub_rowvec(m, ad::col_mean(m)); }

}  // namespace

ad::Node rtpp_inflate(const ad::Node& prior, const ad::Node& filtered, double alpha) {
    check(alpha >= 0.0 && alpha <= 1.0, "rtpp: alpha must be in [0,1]");
    check(prior.value().same_shape(filtered.value()), "rtpp: shape mismatch");
    return ad::add(ad::mul_const(prior, alpha), ad::mul_const(filtered, 1.0 - alpha));
}

ad::Node rtps_inflate(const ad::Node& prior, const ad::Node& filtered, double alpha,
                      bool anomaly) {
    check(alpha >= 0.0 && alpha <= 1.0, "rtps: alpha must be in [0,1]");
    check(prior.value().same_shape(filtered.value()), "rtps: shape mismatch");
    check(prior.value().rows() >= 2, "rtps: need at least two particles");
    ad::Node sigma_prior = col_sample_std(prior);
    ad::Node sigma_filt = col_sample_std(filtered);
    ad::Node blend = ad::add(ad::mul_const(sigma_prior, alpha),
                             ad::mul_const(sigma_filt, 1.0 - alpha));
    // guard: where the filtered spread is ~zero the factor is 1
    Tensor mask = Tensor::zeros({sigma_filt.value().dim(0)});
    for (long i = 0; i < mask.size(); ++i)
        mask.at(i) = sigma_filt.value().at(i) >= 1e-12 ? 1.0 : 0.0;
    Tensor inv_mask = mask;
    for (long i = 0; i < inv_mask.size(); ++i) inv_mask.at(i) = 1.0 - inv_mask.at(i);
    ad::Node safe_denom = ad::add(sigma_filt, filtered.tape->constant(inv_mask));
    ad::Node ones = filtered.tape->constant(Tensor::full({mask.dim(0)}, 1.0));
    ad::Node factor = ad::select(mask, ad::divide(blend, safe_denom), ones);
    if (!anomaly) return ad::mul_rowvec(filtered, factor);
    ad::Node mean = ad::col_mean(filtered);
    return ad::add_rowvec(ad::mul_rowvec(ad::sub_rowvec(filtered, mean), factor), mean);
}

ad::Node apply_inflation(const ad::Node& prior, const ad::Node& filtered,
                         const InflationConfig& infl) {
    switch (infl.method) {
        case InflationConfig::Method::none:
            return filtered;
        case InflationConfig::Method::rtpp:
            return rtpp_inflate(prior, filtered, infl.alpha);
        case InflationConfig::Method::rtps:
            return rtps_inflate(prior, filtered, infl.alpha, infl.rtps_anomaly);
    }
    return filtered;
}

EnsembleState enkf_update(const EnsembleState& state, const Tensor& x_t, const Dist& emission,
                          const FilterConfig& cfg, const InflationConfig& infl, Rng& rng) {
    const ad::Node& z = state.particles;
    const int n = z.rows();
    check(n >= 2, "enkf_update: need at least two particles");
    check(x_t.is_vector() && x_t.dim(0) == emission.dim(), "enkf_update: x_t dim mismatch");
    ad::Tape& tape = *z.tape;

    ad::Node x_samples = rsample(emission, rng);       // (N, dx) perturbed observations
    const ad::Node& x_means = emission.mean;           // (N, dx)

    ad::Node xc = centered_cols(x_samples);
    ad::Node mc = centered_cols(x_means);
    ad::Node zc = centered_cols(z);
    const double inv_nm1 = 1.0 / (n - 1.0);
    ad::Node cov_x = ad::mul_const(ad::matmul(ad::transpose(xc), xc), inv_nm1);   // (dx,dx)
    ad::Node cov_zm = ad::mul_const(ad::matmul(ad::transpose(zc), mc), inv_nm1);  // (dz,dx)

    // K^T = cov_x^{-1} cov_zm^T via Cholesky; jitter once on failure
    ad::Node chol;
    bool have = false;
    try {
        chol = ad::cholesky(cov_x);
        have = true;
    } catch (const NotPositiveDefinite&) {
    }
    if (!have) {
        double mean_diag = 0.0;
        const int dx = x_t.dim(0);
        for (int i = 0; i < dx; ++i) mean_diag += cov_x.value()(i, i);
        mean_diag = std::max(mean_diag / dx, 1e-300);
        Tensor bump = Tensor::zeros({dx, dx});
        for (int i = 0; i < dx; ++i) bump(i, i) = cfg.jitter * mean_diag;
        ad::Node jittered = ad::add(cov_x, tape.constant(bump));
        try {
            chol = ad::cholesky(jittered);
        } catch (const NotPositiveDefinite&) {
            throw DegenerateObservationCovariance(
                "enkf_update: observation covariance not SPD after jitter");
        }
    }
    ad::Node gain_t = ad::solve_upper_tri(ad::transpose(chol),
                                          ad::solve_lower_tri(chol, ad::transpose(cov_zm)));

    // innovation rows x_t - x_i, applied through the transposed gain
    ad::Node x_obs = tape.constant([&] {
        Tensor rep = Tensor::zeros({n, x_t.dim(0)});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < x_t.dim(0); ++j) rep(i, j) = x_t(j);
        return rep;
    }());
    ad::Node innovation = ad::sub(x_obs, x_samples);
    ad::Node filtered = ad::add(z, ad::matmul(innovation, gain_t));

    EnsembleState out = state;
    out.particles = apply_inflation(z, filtered, infl);
    out.prev_proposed = z;
    return out;
}

Tensor normalized_weights(const Tensor& log_weights) {
    check(log_weights.is_vector() && log_weights.size() > 0, "weights: need a vector");
    double m = log_weights(0);
    for (long i = 1; i < log_weights.size(); ++i) m = std::max(m, log_weights.at(i));
    Tensor w = log_weights;
    double s = 0.0;
    for (long i = 0; i < w.size(); ++i) {
        w.at(i) = std::exp(w.at(i) - m);
        s += w.at(i);
    }
    for (long i = 0; i < w.size(); ++i) w.at(i) /= s;
    return w;
}

double ess(const Tensor& log_weights) {
    Tensor w = normalized_weights(log_weights);
    double s2 = 0.0;
    for (long i = 0; i < w.size(); ++i) s2 += w.at(i) * w.at(i);
    return 1.0 / s2;
}

std::vector<std::int32_t> multinomial_resample(const Tensor& log_weights, Rng& rng,
                                               int count) {
    Tensor w = normalized_weights(log_weights);
    const int n = static_cast<int>(w.size());
    if (count < 0) count = n;
    std::vector<double> cum(n);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += w(i);
        cum[i] = acc;
    }
    cum[n - 1] = 1.0;
    std::vector<std::int32_t> idx(count);
    for (int i = 0; i < count; ++i) {
        double u = rng.uniform();
        idx[i] = static_cast<std::int32_t>(
            std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
    }
    return idx;
}

std::vector<std::int32_t> systematic_resample(const Tensor& log_weights, Rng& rng,
                                              int count) {
    Tensor w = normalized_weights(log_weights);
    const int n = static_cast<int>(w.size());
    if (count < 0) count = n;
    const double u0 = rng.uniform() / count;
    std::vector<std::int32_t> idx(count);
    double acc = w(0);
    int j = 0;
    for (int i = 0; i < count; ++i) {
        const double u = u0 + static_cast<double>(i) / count;
        while (u > acc && j + 1 < n) acc += w(++j);
        idx[i] = j;
    }
    return idx;
}

double mean_pairwise_distance(const Tensor& particles) {
    check(particles.is_matrix(), "mean_pairwise_distance: need a matrix");
    const int n = particles.rows(), d = particles.cols();
    if (n < 2) return 0.0;
    double total = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < d; ++k) {
                double diff = particles(i, k) - particles(j, k);
                s += diff * diff;
            }
            total += std::sqrt(s);
        }
    return total / (0.5 * n * (n - 1));
}

}  // namespace enko
