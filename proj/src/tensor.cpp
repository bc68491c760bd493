#include "enko/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace enko {

void check(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

Tensor Tensor::scalar(double v) {
    Tensor t;
    t.rank_ = 0;
    t.v_.assign(1, v);
    return t;
}

Tensor Tensor::zeros(const std::vector<int>& shape) { return full(shape, 0.0); }

Tensor Tensor::zeros(int n) {
    Tensor t;
    t.rank_ = 1;
    t.d_[0] = n;
    t.v_.assign(static_cast<size_t>(n), 0.0);
    return t;
}

Tensor Tensor::zeros(int r, int c) {
    Tensor t;
    t.rank_ = 2;
    t.d_[0] = r;
    t.d_[1] = c;
    t.v_.assign(static_cast<size_t>(r) * c, 0.0);
    return t;
}

Tensor Tensor::full(const std::vector<int>& shape, double v) {
    Tensor t;
    check(shape.size() <= 3, "tensor rank > 3");
    t.rank_ = static_cast<int>(shape.size());
    long n = 1;
    for (size_t i = 0; i < shape.size(); ++i) {
        check(shape[i] >= 0, "negative dimension");
        t.d_[i] = shape[i];
        n *= shape[i];
    }
    t.v_.assign(static_cast<size_t>(n), v);
    return t;
}

Tensor Tensor::eye(int n) {
    Tensor t = zeros({n, n});
    for (int i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

Tensor Tensor::vec(std::vector<double> v) {
    Tensor t;
    t.rank_ = 1;
    t.d_[0] = static_cast<int>(v.size());
    t.v_ = std::move(v);
    return t;
}

Tensor Tensor::mat(int r, int c, std::vector<double> v) {
    check(static_cast<long>(v.size()) == static_cast<long>(r) * c, "matrix data size mismatch");
    Tensor t;
    t.rank_ = 2;
    t.d_[0] = r;
    t.d_[1] = c;
    t.v_ = std::move(v);
    return t;
}

Tensor::Tensor(const std::vector<int>& shape, std::vector<double> data) {
    check(shape.size() <= 3, "tensor rank > 3");
    rank_ = static_cast<int>(shape.size());
    long n = 1;
    for (size_t i = 0; i < shape.size(); ++i) {
        d_[i] = shape[i];
        n *= shape[i];
    }
    check(n == static_cast<long>(data.size()), "shape/data size mismatch");
    v_ = std::move(data);
}

std::vector<int> Tensor::shape() const {
    std::vector<int> s(rank_);
    for (int i = 0; i < rank_; ++i) s[i] = d_[i];
    return s;
}

double Tensor::scalar_value() const {
    if (v_.size() != 1)
        throw std::invalid_argument("scalar_value on non-scalar of shape " + shape_str());
    return v_[0];
}

bool Tensor::same_shape(const Tensor& o) const {
    if (rank_ != o.rank_) return false;
    for (int i = 0; i < rank_; ++i)
        if (d_[i] != o.d_[i]) return false;
    return true;
}

bool Tensor::all_finite() const {
    for (double x : v_)
        if (!std::isfinite(x)) return false;
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '(';
    for (int i = 0; i < rank_; ++i) os << d_[i] << (i + 1 < rank_ ? "," : "");
    os << ')';
    return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check(a.is_matrix() && b.is_matrix(), "matmul needs matrices");
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul inner dims " + a.shape_str() + " x " +
                                    b.shape_str());
    const int n = a.rows(), k = a.cols(), m = b.cols();
    Tensor out = Tensor::zeros(n, m);
    for (int i = 0; i < n; ++i) {
        double* orow = out.data() + static_cast<long>(i) * m;
        for (int p = 0; p < k; ++p) {
            const double aip = a(i, p);
            const double* brow = b.data() + static_cast<long>(p) * m;
            for (int j = 0; j < m; ++j) orow[j] += aip * brow[j];
        }
    }
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check(a.is_matrix() && b.is_matrix(), "matmul_nt needs matrices");
    if (a.cols() != b.cols())
        throw std::invalid_argument("matmul_nt inner dims " + a.shape_str() + " x " +
                                    b.shape_str() + "^T");
    const int n = a.rows(), k = a.cols(), m = b.rows();
    Tensor out = Tensor::zeros(n, m);
    for (int i = 0; i < n; ++i) {
        const double* arow = a.data() + static_cast<long>(i) * k;
        double* orow = out.data() + static_cast<long>(i) * m;
        for (int j = 0; j < m; ++j) {
            const double* brow = b.data() + static_cast<long>(j) * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
            orow[j] = s;
        }
    }
    return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    check(a.is_matrix() && b.is_matrix(), "matmul_tn needs matrices");
    if (a.rows() != b.rows())
        throw std::invalid_argument("matmul_tn inner dims " + a.shape_str() + "^T x " +
                                    b.shape_str());
    const int n = a.cols(), k = a.rows(), m = b.cols();
    Tensor out = Tensor::zeros(n, m);
    for (int p = 0; p < k; ++p) {
        const double* arow = a.data() + static_cast<long>(p) * n;
        const double* brow = b.data() + static_cast<long>(p) * m;
        for (int i = 0; i < n; ++i) {
            const double aip = arow[i];
            double* orow = out.data() + static_cast<long>(i) * m;
            for (int j = 0; j < m; ++j) orow[j] += aip * brow[j];
        }
    }
    return out;
}

Tensor transposed(const Tensor& a) {
    check(a.is_matrix(), "transpose needs a matrix");
    Tensor out = Tensor::zeros({a.cols(), a.rows()});
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    check(a.same_shape(b), "add shape mismatch");
    Tensor out = a;
    for (long i = 0; i < out.size(); ++i) out.at(i) += b.at(i);
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check(a.same_shape(b), "sub shape mismatch");
    Tensor out = a;
    for (long i = 0; i < out.size(); ++i) out.at(i) -= b.at(i);
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    for (long i = 0; i < out.size(); ++i) out.at(i) *= s;
    return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    check(a.same_shape(b), "hadamard shape mismatch");
    Tensor out = a;
    for (long i = 0; i < out.size(); ++i) out.at(i) *= b.at(i);
    return out;
}

Tensor outer(const Tensor& u, const Tensor& v) {
    check(u.is_vector() && v.is_vector(), "outer needs vectors");
    Tensor out = Tensor::zeros({u.dim(0), v.dim(0)});
    for (int i = 0; i < u.dim(0); ++i)
        for (int j = 0; j < v.dim(0); ++j) out(i, j) = u(i) * v(j);
    return out;
}

double dot(const Tensor& u, const Tensor& v) {
    check(u.size() == v.size(), "dot size mismatch");
    double s = 0.0;
    for (long i = 0; i < u.size(); ++i) s += u.at(i) * v.at(i);
    return s;
}

Tensor cholesky_lower(const Tensor& a) {
    check(a.is_matrix() && a.rows() == a.cols(), "cholesky needs a square matrix");
    const int n = a.rows();
    Tensor l = Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = 0.5 * (a(i, j) + a(j, i));
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (!(s > 0.0))
                    throw NotPositiveDefinite("cholesky: pivot " + std::to_string(i) +
                                              " not positive (" + std::to_string(s) + ")");
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return l;
}

Tensor solve_lower(const Tensor& l, const Tensor& b) {
    check(l.is_matrix() && l.rows() == l.cols(), "solve_lower: L not square");
    check(b.is_matrix() && b.rows() == l.rows(), "solve_lower: rhs rows mismatch");
    const int n = l.rows(), m = b.cols();
    Tensor x = b;
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < n; ++i) {
            double s = x(i, j);
            for (int k = 0; k < i; ++k) s -= l(i, k) * x(k, j);
            check(l(i, i) != 0.0, "solve_lower: zero diagonal");
            x(i, j) = s / l(i, i);
        }
    }
    return x;
}

Tensor solve_upper(const Tensor& u, const Tensor& b) {
    check(u.is_matrix() && u.rows() == u.cols(), "solve_upper: U not square");
    check(b.is_matrix() && b.rows() == u.rows(), "solve_upper: rhs rows mismatch");
    const int n = u.rows(), m = b.cols();
    Tensor x = b;
    for (int j = 0; j < m; ++j) {
        for (int i = n - 1; i >= 0; --i) {
            double s = x(i, j);
            for (int k = i + 1; k < n; ++k) s -= u(i, k) * x(k, j);
            check(u(i, i) != 0.0, "solve_upper: zero diagonal");
            x(i, j) = s / u(i, i);
        }
    }
    return x;
}

Tensor solve_spd(const Tensor& a, const Tensor& b) {
    Tensor l = cholesky_lower(a);
    return solve_upper(transposed(l), solve_lower(l, b));
}

double logdet_spd(const Tensor& a) {
    Tensor l = cholesky_lower(a);
    double s = 0.0;
    for (int i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
    return 2.0 * s;
}

}  // namespace enko
