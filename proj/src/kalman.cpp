#include "enko/kalman.hpp"

#include <cmath>

namespace enko {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Tensor diag_from_std(const Tensor& s) {
    Tensor d = Tensor::zeros({s.dim(0), s.dim(0)});
    for (int i = 0; i < s.dim(0); ++i) d(i, i) = s(i) * s(i);
    return d;
}

Tensor col(const Tensor& m, int r) {
    Tensor v = Tensor::zeros({m.cols()});
    for (int j = 0; j < m.cols(); ++j) v(j) = m(r, j);
    return v;
}

}  // namespace

void kalman_analysis(const LgssmGenerative& m, const Tensor& prior_mean,
                     const Tensor& prior_cov, const Tensor& x_obs, Tensor& post_mean,
                     Tensor& post_cov) {
    const int dz = prior_mean.dim(0), dx = x_obs.dim(0);
    Tensor hg = m.a_g;
    Tensor s = add(matmul(matmul(hg, prior_cov), transposed(hg)), diag_from_std(m.sigma_g));
    // K = P H^T S^{-1}
    Tensor pht = matmul(prior_cov, transposed(hg));
    Tensor k = transposed(solve_spd(s, transposed(pht)));
    Tensor innov = Tensor::zeros({dx, 1});
    Tensor hm = matmul(hg, Tensor::mat(dz, 1, prior_mean.storage()));
    for (int i = 0; i < dx; ++i) innov(i, 0) = x_obs(i) - hm(i, 0);
    Tensor upd = matmul(k, innov);
    post_mean = prior_mean;
    for (int i = 0; i < dz; ++i) post_mean(i) += upd(i, 0);
    Tensor ikh = Tensor::eye(dz);
    Tensor kh = matmul(k, hg);
    for (int i = 0; i < dz; ++i)
        for (int j = 0; j < dz; ++j) ikh(i, j) -= kh(i, j);
    post_cov = matmul(ikh, prior_cov);
    // symmetrize against roundoff
    for (int i = 0; i < dz; ++i)
        for (int j = 0; j < i; ++j) {
            double v = 0.5 * (post_cov(i, j) + post_cov(j, i));
            post_cov(i, j) = v;
            post_cov(j, i) = v;
        }
}

KalmanResult kalman_filter(const LgssmGenerative& m, const Tensor& x) {
    check(x.is_matrix(), "kalman_filter: x must be (T, dx)");
    const int t_len = x.rows(), dx = x.cols();
    const int dz = m.mu1.dim(0);
    check(m.a_g.rows() == dx && m.a_g.cols() == dz, "kalman_filter: emission dims");

    KalmanResult out;
    Tensor mean = m.mu1;
    Tensor cov = diag_from_std(m.sigma1);
    const Tensor q = diag_from_std(m.sigma_f);
    const Tensor r = diag_from_std(m.sigma_g);

    for (int t = 0; t < t_len; ++t) {
        if (t > 0) {
            mean = [&] {
                Tensor mm = matmul(m.a_f, Tensor::mat(dz, 1, mean.storage()));
                Tensor v = Tensor::zeros({dz});
                for (int i = 0; i < dz; ++i) v(i) = mm(i, 0);
                return v;
            }();
            cov = add(matmul(matmul(m.a_f, cov), transposed(m.a_f)), q);
        }
        out.pred_mean.push_back(mean);
        out.pred_cov.push_back(cov);

        // innovation term
        Tensor s = add(matmul(matmul(m.a_g, cov), transposed(m.a_g)), r);
        Tensor xm = matmul(m.a_g, Tensor::mat(dz, 1, mean.storage()));
        Tensor innov = Tensor::zeros({dx, 1});
        for (int i = 0; i < dx; ++i) innov(i, 0) = x(t, i) - xm(i, 0);
        Tensor l = cholesky_lower(s);
        Tensor w = solve_lower(l, innov);
        double quad = 0.0;
        for (int i = 0; i < dx; ++i) quad += w(i, 0) * w(i, 0);
        double half_logdet = 0.0;
        for (int i = 0; i < dx; ++i) half_logdet += std::log(l(i, i));
        out.loglik += -0.5 * (quad + dx * kLog2Pi) - half_logdet;

        Tensor obs = col(x, t);
        Tensor pm, pc;
        kalman_analysis(m, mean, cov, obs, pm, pc);
        mean = pm;
        cov = pc;
        out.filt_mean.push_back(mean);
        out.filt_cov.push_back(cov);
    }
    return out;
}

double kalman_loglik(const LgssmGenerative& m, const Tensor& x) {
    return kalman_filter(m, x).loglik;
}

}  // namespace enko
