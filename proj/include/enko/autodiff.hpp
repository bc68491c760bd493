#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <vector>

#include "enko/tensor.hpp"

namespace enko::ad {

enum class Op : std::uint8_t {
    leaf,
    add,
    sub,
    mul,
    divide,
    negate,
    add_const,
    mul_const,
    matmul,
    transpose,
    tanh_fn,
    exp_fn,
    log_fn,
    sqrt_fn,
    square,
    sum_all,
    mean_all,
    logsumexp,
    sum_rows,
    col_mean,
    add_rowvec,
    sub_rowvec,
    mul_rowvec,
    replicate_row,
    concat_cols,
    concat_vec,
    gather_rows,
    slice_vec,
    reshape,
    cholesky,
    solve_lower,
    solve_upper,
    outer,
    row_outer_flatten,
    select,
    gauss_logpdf,
    student_logpdf,
};

struct Record {
    Tensor value;
    Tensor adjoint;  // allocated lazily during backward
    Op op = Op::leaf;
    bool requires_grad = false;
    std::int32_t a = -1, b = -1, c = -1;
    std::int32_t i0 = 0, i1 = 0;  // per-op integer params (offset, len, dims)
    double c0 = 0.0;              // per-op scalar param
    std::vector<std::int32_t> idx;  // gather indices / select mask
};

class Tape;

// Lightweight handle into a tape. Copyable; valid while the tape lives.
struct Node {
    Tape* tape = nullptr;
    std::int32_t id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    const Tensor& value() const;
    bool requires_grad() const;
    int rows() const { return value().rows(); }
    int cols() const { return value().cols(); }
    int rank() const { return value().rank(); }
};

// Define-by-run record of primitive operations. One tape per objective
// evaluation, single-threaded; record order is a valid forward order.
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // When false, ops still produce values but record no gradient structure.
    bool grad_enabled = true;

    Node leaf(Tensor v, bool requires_grad_flag);
    Node constant(Tensor v) { return leaf(std::move(v), false); }
    Node constant_scalar(double v) { return constant(Tensor::scalar(v)); }

    // Reverse sweep from a scalar root; populates adjoints of all
    // requires_grad nodes reachable from it.
    void backward(const Node& root);

    const Tensor& grad(const Node& n) const;
    Tensor grad_or_zero(const Node& n) const;

    std::size_t size() const { return recs_.size(); }
    Record& rec(std::int32_t i) { return recs_[i]; }
    const Record& rec(std::int32_t i) const { return recs_[i]; }

    Node push(Record r);

  private:
    void accumulate(std::int32_t id, const Tensor& g);
    void accumulate(std::int32_t id, Tensor&& g);
    void step_back(const Record& r);
    std::deque<Record> recs_;
};

// Primitive operations. Shapes are validated; violations throw
// std::invalid_argument. Cholesky throws NotPositiveDefinite on failure.
Node add(const Node& a, const Node& b);
Node sub(const Node& a, const Node& b);
Node mul(const Node& a, const Node& b);
Node divide(const Node& a, const Node& b);
Node negate(const Node& a);
Node add_const(const Node& a, double c);
Node mul_const(const Node& a, double c);
Node matmul(const Node& a, const Node& b);
Node transpose(const Node& a);
Node tanh(const Node& a);
Node exp(const Node& a);
Node log(const Node& a);
Node sqrt(const Node& a);
Node square(const Node& a);
Node sum(const Node& a);
Node mean(const Node& a);
Node logsumexp(const Node& a);  // vector -> scalar, max-subtracted
Node sum_rows(const Node& a);   // (n,d) -> (n)
Node col_mean(const Node& a);   // (n,d) -> (d)
Node add_rowvec(const Node& m, const Node& v);
Node sub_rowvec(const Node& m, const Node& v);
Node mul_rowvec(const Node& m, const Node& v);
Node replicate_row(const Node& v, int n);  // (d) -> (n,d)
Node concat_cols(const Node& a, const Node& b);
Node concat_vec(const Node& a, const Node& b);
Node gather_rows(const Node& m, const std::vector<std::int32_t>& indices);
Node slice_vec(const Node& v, int offset, int len);
Node reshape(const Node& a, const std::vector<int>& shape);
Node cholesky(const Node& a);
Node solve_lower_tri(const Node& l, const Node& b);
Node solve_upper_tri(const Node& u, const Node& b);
Node outer(const Node& u, const Node& v);
Node row_outer_flatten(const Node& a);  // (n,d) -> (n,d*d), rows are vec(z z^T)
// Elementwise mask select: out_i = mask_i != 0 ? a_i : b_i. Mask is data, not
// a differentiable input.
Node select(const Tensor& mask, const Node& a, const Node& b);

// Fused per-row diagonal log densities; x, mean/loc and log scale all share
// one shape, either (d) -> scalar or (n,d) -> (n). These sit on the hot path
// of every weight evaluation.
Node gauss_logpdf_rows(const Node& x, const Node& mean, const Node& log_std);
Node student_logpdf_rows(double df, const Node& x, const Node& loc, const Node& log_scale);

inline Node operator+(const Node& a, const Node& b) { return add(a, b); }
inline Node operator-(const Node& a, const Node& b) { return sub(a, b); }
inline Node operator*(const Node& a, const Node& b) { return mul(a, b); }
inline Node operator/(const Node& a, const Node& b) { return divide(a, b); }
inline Node operator-(const Node& a) { return negate(a); }

// Central finite differences of f at point, per coordinate.
Tensor central_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& point,
                         double step);
// Max over coordinates of |analytic - central diff| / (|central diff| + 1e-8).
double finite_diff_check(const std::function<double(const Tensor&)>& f, const Tensor& point,
                         const Tensor& analytic, double step);

}  // namespace enko::ad
