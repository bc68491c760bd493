#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace enko {

// Recoverable factorization failure; callers may add jitter and retry.
class NotPositiveDefinite : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Dense row-major array of 64-bit floats, rank 0..3. Rank 3 exists only as
// plain storage (datasets); all math below is rank <= 2.
class Tensor {
  public:
    Tensor() = default;

    static Tensor scalar(double v);
    static Tensor zeros(const std::vector<int>& shape);
    static Tensor zeros(int n);
    static Tensor zeros(int r, int c);
    static Tensor full(const std::vector<int>& shape, double v);
    static Tensor eye(int n);
    static Tensor vec(std::vector<double> v);
    static Tensor mat(int r, int c, std::vector<double> v);
    Tensor(const std::vector<int>& shape, std::vector<double> data);

    bool empty() const { return v_.empty(); }
    int rank() const { return rank_; }
    long size() const { return static_cast<long>(v_.size()); }
    std::vector<int> shape() const;
    int dim(int i) const { return d_[i]; }
    int rows() const { return d_[0]; }
    int cols() const { return rank_ >= 2 ? d_[1] : 1; }

    bool is_scalar() const { return rank_ == 0; }
    bool is_vector() const { return rank_ == 1; }
    bool is_matrix() const { return rank_ == 2; }

    double scalar_value() const;

    double& at(long i) { return v_[i]; }
    double at(long i) const { return v_[i]; }
    double& operator()(int i) { return v_[i]; }
    double operator()(int i) const { return v_[i]; }
    double& operator()(int i, int j) { return v_[static_cast<long>(i) * d_[1] + j]; }
    double operator()(int i, int j) const { return v_[static_cast<long>(i) * d_[1] + j]; }
    double& operator()(int i, int j, int k) {
        return v_[(static_cast<long>(i) * d_[1] + j) * d_[2] + k];
    }
    double operator()(int i, int j, int k) const {
        return v_[(static_cast<long>(i) * d_[1] + j) * d_[2] + k];
    }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    std::vector<double>& storage() { return v_; }
    const std::vector<double>& storage() const { return v_; }

    bool same_shape(const Tensor& o) const;
    bool all_finite() const;
    std::string shape_str() const;

  private:
    int rank_ = 0;
    int d_[3] = {1, 1, 1};
    std::vector<double> v_;
};

void check(bool cond, const std::string& msg);

// literal-message form; builds nothing on the passing path
inline void check(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Plain (non-differentiated) dense linear algebra. Used by the Kalman oracle,
// data generation, and the tape's backward rules.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a^T * b
Tensor transposed(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor outer(const Tensor& u, const Tensor& v);
double dot(const Tensor& u, const Tensor& v);

// Cholesky of a symmetric positive-definite matrix; reads the full matrix as
// (A + A^T)/2 and returns the lower factor. Throws NotPositiveDefinite.
Tensor cholesky_lower(const Tensor& a);
// Solve L X = B (L lower triangular) or U X = B (U upper triangular).
Tensor solve_lower(const Tensor& l, const Tensor& b);
Tensor solve_upper(const Tensor& u, const Tensor& b);
// SPD solve A X = B via Cholesky.
Tensor solve_spd(const Tensor& a, const Tensor& b);
double logdet_spd(const Tensor& a);

}  // namespace enko
