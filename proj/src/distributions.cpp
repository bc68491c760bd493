#include "enko/distributions.hpp"

#include <cmath>

namespace enko {

Dist Dist::diag_gaussian(const ad::Node& mean, const ad::Node& log_std) {
    check(mean.value().same_shape(log_std.value()), "dist: mean/log_std shape mismatch");
    Dist d;
    d.family = DistFamily::gaussian;
    d.mean = mean;
    d.log_std = log_std;
    return d;
}

Dist Dist::student_t(double df, const ad::Node& loc, const ad::Node& log_scale) {
    check(df > 0.0, "student_t: df must be positive");
    check(loc.value().same_shape(log_scale.value()), "dist: loc/log_scale shape mismatch");
    Dist d;
    d.family = DistFamily::student_t;
    d.mean = loc;
    d.log_std = log_scale;
    d.df = df;
    return d;
}

int Dist::dim() const {
    const Tensor& m = mean.value();
    return m.is_matrix() ? m.cols() : m.dim(0);
}

ad::Node logpdf(const Dist& d, const ad::Node& x) {
    if (!x.value().same_shape(d.mean.value()))
        throw std::invalid_argument("logpdf: x shape " + x.value().shape_str() +
                                    " vs mean " + d.mean.value().shape_str());
    if (d.family == DistFamily::gaussian)
        return ad::gauss_logpdf_rows(x, d.mean, d.log_std);
    return ad::student_logpdf_rows(d.df, x, d.mean, d.log_std);
}

double student_t_noise(double df, Rng& rng) {
    double eps = rng.normal();
    double chi = rng.chi_square(df);
    return eps / std::sqrt(chi / df);
}

ad::Node rsample(const Dist& d, Rng& rng) {
    const Tensor& m = d.mean.value();
    Tensor noise = Tensor::zeros(m.shape());
    if (d.family == DistFamily::gaussian) {
        for (long i = 0; i < noise.size(); ++i) noise.at(i) = rng.normal();
    } else {
        for (long i = 0; i < noise.size(); ++i) noise.at(i) = student_t_noise(d.df, rng);
    }
    ad::Node eps = d.mean.tape->constant(std::move(noise));
    return ad::add(d.mean, ad::mul(ad::exp(d.log_std), eps));
}

}  // namespace enko
