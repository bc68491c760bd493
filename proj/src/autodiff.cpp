#include "enko/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace enko::ad {

namespace {

Tape* same_tape(const Node& a, const Node& b) {
    check(a.valid() && b.valid(), "op on invalid node");
    check(a.tape == b.tape, "op on nodes from different tapes");
    return a.tape;
}

}  // namespace

const Tensor& Node::value() const {
    check(valid(), "value() on invalid node");
    return tape->rec(id).value;
}

bool Node::requires_grad() const { return valid() && tape->rec(id).requires_grad; }

Node Tape::leaf(Tensor v, bool requires_grad_flag) {
    Record r;
    r.value = std::move(v);
    r.requires_grad = grad_enabled && requires_grad_flag;
    return push(std::move(r));
}

Node Tape::push(Record r) {
    recs_.push_back(std::move(r));
    return Node{this, static_cast<std::int32_t>(recs_.size() - 1)};
}

void Tape::accumulate(std::int32_t id, const Tensor& g) {
    Record& p = recs_[id];
    if (!p.requires_grad) return;
    if (p.adjoint.empty()) {
        p.adjoint = g;
    } else {
        for (long i = 0; i < g.size(); ++i) p.adjoint.at(i) += g.at(i);
    }
}

void Tape::accumulate(std::int32_t id, Tensor&& g) {
    Record& p = recs_[id];
    if (!p.requires_grad) return;
    if (p.adjoint.empty()) {
        p.adjoint = std::move(g);
    } else {
        for (long i = 0; i < g.size(); ++i) p.adjoint.at(i) += g.at(i);
    }
}

void Tape::backward(const Node& root) {
    check(root.valid() && root.tape == this, "backward: foreign node");
    check(root.value().is_scalar(), "backward: root must be scalar, got shape " +
                                        root.value().shape_str());
    for (auto& r : recs_) r.adjoint = Tensor();
    if (!recs_[root.id].requires_grad) return;
    recs_[root.id].adjoint = Tensor::scalar(1.0);
    for (std::int32_t i = root.id; i >= 0; --i) {
        const Record& r = recs_[i];
        if (!r.requires_grad || r.adjoint.empty() || r.op == Op::leaf) continue;
        step_back(r);
    }
}

const Tensor& Tape::grad(const Node& n) const {
    check(n.valid() && n.tape == this, "grad: foreign node");
    const Tensor& g = recs_[n.id].adjoint;
    check(!g.empty(), "grad: node has no adjoint (run backward first?)");
    return g;
}

Tensor Tape::grad_or_zero(const Node& n) const {
    check(n.valid() && n.tape == this, "grad: foreign node");
    const Tensor& g = recs_[n.id].adjoint;
    if (g.empty()) return Tensor::zeros(recs_[n.id].value.shape());
    return g;
}

void Tape::step_back(const Record& r) {
    const Tensor& g = r.adjoint;
    const Tensor& out = r.value;
    switch (r.op) {
        case Op::leaf:
            break;
        case Op::add: {
            accumulate(r.a, g);
            accumulate(r.b, g);
            break;
        }
        case Op::sub: {
            accumulate(r.a, g);
            Tensor gb = g;
            for (long i = 0; i < gb.size(); ++i) gb.at(i) = -gb.at(i);
            accumulate(r.b, std::move(gb));
            break;
        }
        case Op::mul: {
            const Tensor& av = recs_[r.a].value;
            const Tensor& bv = recs_[r.b].value;
            Tensor ga = g, gb = g;
            for (long i = 0; i < g.size(); ++i) {
                ga.at(i) *= bv.at(i);
                gb.at(i) *= av.at(i);
            }
            accumulate(r.a, std::move(ga));
            accumulate(r.b, std::move(gb));
            break;
        }
        case Op::divide: {
            const Tensor& bv = recs_[r.b].value;
            Tensor ga = g, gb = g;
            for (long i = 0; i < g.size(); ++i) {
                ga.at(i) /= bv.at(i);
                gb.at(i) *= -out.at(i) / bv.at(i);
            }
            accumulate(r.a, std::move(ga));
            accumulate(r.b, std::move(gb));
            break;
        }
        case Op::negate: {
            Tensor ga = g;
            for (long i = 0; i < ga.size(); ++i) ga.at(i) = -ga.at(i);
            accumulate(r.a, std::move(ga));
            break;
        }
        case Op::add_const: {
            accumulate(r.a, g);
            break;
        }
        case Op::mul_const: {
            Tensor ga = g;
            for (long i = 0; i < ga.size(); ++i) ga.at(i) *= r.c0;
            accumulate(r.a, std::move(ga));
            break;
        }
        case Op::matmul: {
            const Tensor& av = recs_[r.a].value;
            const Tensor& bv = recs_[r.b].value;
            accumulate(r.a, matmul_nt(g, bv));
            accumulate(r.b, matmul_tn(av, g));
            break;
        }
        case Op::transpose: {
            accumulate(r.a, transposed(g));
            break;
        }
        case Op::tanh_fn: {
            Tensor ga = g;
            for (long i = 0; i < ga.size(); ++i) ga.at(i) *= 1.0 - out.at(i) * out.at(i);
            accumulate(r.a, std::move(ga));
            break;
        }
        case Op::exp_fn: {
            Tensor ga = g;
            for (long i = 0; i < ga.size(); ++i) ga.at(i) *= out.at(i);
            accumulate(r.a, std::move(ga));
            break;
        }
        case Op::log_fn: {
            const Tensor& av = recs_[r.a].value;
            Tensor ga = g;
            for (long i = 0; i < ga.size(); ++i) ga.at(i) /= av.at(i);
            accumulate(r.a, std::move(ga));
            break;
        }
        case Op::sqrt_fn: {
            Tensor ga = g;
            for (long i = 0; i < ga.size(); ++i) ga.at(i) *= 0.5 / out.at(i);
            accumulate(r.a, std::move(ga));
            break;
        }
        case Op::square: {
            const Tensor& av = recs_[r.a].value;
            Tensor ga = g;
            for (long i = 0; i < ga.size(); ++i) ga.at(i) *= 2.0 * av.at(i);
            accumulate(r.a, std::move(ga));
            break;
        }
        case Op::sum_all: {
            const Tensor& av = recs_[r.a].value;
            accumulate(r.a, Tensor::full(av.shape(), g.scalar_value()));
            break;
        }
        case Op::mean_all: {
            const Tensor& av = recs_[r.a].value;
            accumulate(r.a, Tensor::full(av.shape(), g.scalar_value() / av.size()));
            break;
        }
        case Op::logsumexp: {
            const Tensor& av = recs_[r.a].value;
            const double gs = g.scalar_value();
            const double lse = out.scalar_value();
            Tensor ga = Tensor::zeros(av.shape());
            for (long i = 0; i < av.size(); ++i) ga.at(i) = gs * std::exp(av.at(i) - lse);
            accumulate(r.a, std::move(ga));
            break;
        }
        case Op::sum_rows: {
            const Tensor& av = recs_[r.a].value;
            Tensor ga = Tensor::zeros(av.shape());
            for (int i = 0; i < av.rows(); ++i)
                for (int j = 0; j < av.cols(); ++j) ga(i, j) = g(i);
            accumulate(r.a, std::move(ga));
            break;
        }
        case Op::col_mean: {
            const Tensor& av = recs_[r.a].value;
            const double inv_n = 1.0 / av.rows();
            Tensor ga = Tensor::zeros(av.shape());
            for (int i = 0; i < av.rows(); ++i)
                for (int j = 0; j < av.cols(); ++j) ga(i, j) = g(j) * inv_n;
            accumulate(r.a, std::move(ga));
            break;
        }
        case Op::add_rowvec:
        case Op::sub_rowvec: {
            const Tensor& mv = recs_[r.a].value;
            const double sgn = r.op == Op::add_rowvec ? 1.0 : -1.0;
            accumulate(r.a, g);
            Tensor gv = Tensor::zeros({mv.cols()});
            for (int i = 0; i < mv.rows(); ++i)
                for (int j = 0; j < mv.cols(); ++j) gv(j) += sgn * g(i, j);
            accumulate(r.b, std::move(gv));
            break;
        }
        case Op::mul_rowvec: {
            const Tensor& mv = recs_[r.a].value;
            const Tensor& vv = recs_[r.b].value;
            Tensor gm = g;
            Tensor gv = Tensor::zeros({mv.cols()});
            for (int i = 0; i < mv.rows(); ++i)
                for (int j = 0; j < mv.cols(); ++j) {
                    gm(i, j) *= vv(j);
                    gv(j) += g(i, j) * mv(i, j);
                }
            accumulate(r.a, std::move(gm));
            accumulate(r.b, std::move(gv));
            break;
        }
        case Op::replicate_row: {
            const Tensor& vv = recs_[r.a].value;
            Tensor gv = Tensor::zeros(vv.shape());
            for (int i = 0; i < out.rows(); ++i)
                for (int j = 0; j < out.cols(); ++j) gv(j) += g(i, j);
            accumulate(r.a, std::move(gv));
            break;
        }
        case Op::concat_cols: {
            const Tensor& av = recs_[r.a].value;
            const Tensor& bv = recs_[r.b].value;
            Tensor ga = Tensor::zeros(av.shape());
            Tensor gb = Tensor::zeros(bv.shape());
            for (int i = 0; i < out.rows(); ++i) {
                for (int j = 0; j < av.cols(); ++j) ga(i, j) = g(i, j);
                for (int j = 0; j < bv.cols(); ++j) gb(i, j) = g(i, av.cols() + j);
            }
            accumulate(r.a, std::move(ga));
            accumulate(r.b, std::move(gb));
            break;
        }
        case Op::concat_vec: {
            const Tensor& av = recs_[r.a].value;
            const Tensor& bv = recs_[r.b].value;
            Tensor ga = Tensor::zeros(av.shape());
            Tensor gb = Tensor::zeros(bv.shape());
            for (int i = 0; i < av.dim(0); ++i) ga(i) = g(i);
            for (int i = 0; i < bv.dim(0); ++i) gb(i) = g(av.dim(0) + i);
            accumulate(r.a, std::move(ga));
            accumulate(r.b, std::move(gb));
            break;
        }
        case Op::gather_rows: {
            const Tensor& av = recs_[r.a].value;
            Tensor ga = Tensor::zeros(av.shape());
            for (size_t i = 0; i < r.idx.size(); ++i)
                for (int j = 0; j < av.cols(); ++j)
                    ga(r.idx[i], j) += g(static_cast<int>(i), j);
            accumulate(r.a, std::move(ga));
            break;
        }
        case Op::slice_vec: {
            const Tensor& av = recs_[r.a].value;
            Tensor ga = Tensor::zeros(av.shape());
            for (int i = 0; i < r.i1; ++i) ga(r.i0 + i) = g(i);
            accumulate(r.a, std::move(ga));
            break;
        }
        case Op::reshape: {
            const Tensor& av = recs_[r.a].value;
            Tensor ga(av.shape(), g.storage());
            accumulate(r.a, std::move(ga));
            break;
        }
        case Op::cholesky: {
            // reverse of A -> L with A read as (A + A^T)/2; the result is the
            // symmetric adjoint, so per-entry finite differences match
            const Tensor& l = out;
            const int n = l.rows();
            Tensor p = matmul_tn(l, g);
            Tensor s = Tensor::zeros({n, n});
            for (int i = 0; i < n; ++i) {
                s(i, i) = 0.5 * p(i, i);
                for (int j = 0; j < i; ++j) s(i, j) = p(i, j);
            }
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    double v = 0.5 * (s(i, j) + s(j, i));
                    s(i, j) = v;
                    s(j, i) = v;
                }
            Tensor w = enko::solve_upper(transposed(l), s);
            Tensor abar = transposed(enko::solve_upper(transposed(l), transposed(w)));
            accumulate(r.a, std::move(abar));
            break;
        }
        case Op::solve_lower: {
            const Tensor& lv = recs_[r.a].value;
            Tensor gb = enko::solve_upper(transposed(lv), g);
            Tensor gl = matmul_nt(gb, out);
            for (int i = 0; i < gl.rows(); ++i)
                for (int j = 0; j < gl.cols(); ++j) gl(i, j) = i >= j ? -gl(i, j) : 0.0;
            accumulate(r.a, std::move(gl));
            accumulate(r.b, std::move(gb));
            break;
        }
        case Op::solve_upper: {
            const Tensor& uv = recs_[r.a].value;
            Tensor gb = enko::solve_lower(transposed(uv), g);
            Tensor gu = matmul_nt(gb, out);
            for (int i = 0; i < gu.rows(); ++i)
                for (int j = 0; j < gu.cols(); ++j) gu(i, j) = i <= j ? -gu(i, j) : 0.0;
            accumulate(r.a, std::move(gu));
            accumulate(r.b, std::move(gb));
            break;
        }
        case Op::outer: {
            const Tensor& uv = recs_[r.a].value;
            const Tensor& vv = recs_[r.b].value;
            Tensor gu = Tensor::zeros(uv.shape());
            Tensor gv = Tensor::zeros(vv.shape());
            for (int i = 0; i < uv.dim(0); ++i)
                for (int j = 0; j < vv.dim(0); ++j) {
                    gu(i) += g(i, j) * vv(j);
                    gv(j) += g(i, j) * uv(i);
                }
            accumulate(r.a, std::move(gu));
            accumulate(r.b, std::move(gv));
            break;
        }
        case Op::row_outer_flatten: {
            const Tensor& av = recs_[r.a].value;
            const int d = av.cols();
            Tensor ga = Tensor::zeros(av.shape());
            for (int i = 0; i < av.rows(); ++i)
                for (int j = 0; j < d; ++j) {
                    double s = 0.0;
                    for (int k = 0; k < d; ++k)
                        s += g(i, j * d + k) * av(i, k) + g(i, k * d + j) * av(i, k);
                    ga(i, j) = s;
                }
            accumulate(r.a, std::move(ga));
            break;
        }
        case Op::select: {
            const Tensor& av = recs_[r.a].value;
            Tensor ga = Tensor::zeros(av.shape());
            Tensor gb = Tensor::zeros(av.shape());
            for (long i = 0; i < g.size(); ++i) {
                if (r.idx[i] != 0)
                    ga.at(i) = g.at(i);
                else
                    gb.at(i) = g.at(i);
            }
            accumulate(r.a, std::move(ga));
            accumulate(r.b, std::move(gb));
            break;
        }
        case Op::gauss_logpdf: {
            const Tensor& xv = recs_[r.a].value;
            const Tensor& mv = recs_[r.b].value;
            const Tensor& lv = recs_[r.c].value;
            const bool mat = xv.is_matrix();
            const int rows = mat ? xv.rows() : 1;
            const int cols = mat ? xv.cols() : xv.dim(0);
            Tensor gx = Tensor::zeros(xv.shape());
            Tensor gm = Tensor::zeros(xv.shape());
            Tensor gl = Tensor::zeros(xv.shape());
            for (int i = 0; i < rows; ++i) {
                const double gi = mat ? g(i) : g.scalar_value();
                for (int j = 0; j < cols; ++j) {
                    const long k = static_cast<long>(i) * cols + j;
                    const double inv_s = std::exp(-lv.at(k));
                    const double z = (xv.at(k) - mv.at(k)) * inv_s;
                    gx.at(k) = -gi * z * inv_s;
                    gm.at(k) = gi * z * inv_s;
                    gl.at(k) = gi * (z * z - 1.0);
                }
            }
            accumulate(r.a, std::move(gx));
            accumulate(r.b, std::move(gm));
            accumulate(r.c, std::move(gl));
            break;
        }
        case Op::student_logpdf: {
            const Tensor& xv = recs_[r.a].value;
            const Tensor& mv = recs_[r.b].value;
            const Tensor& lv = recs_[r.c].value;
            const double nu = r.c0;
            const bool mat = xv.is_matrix();
            const int rows = mat ? xv.rows() : 1;
            const int cols = mat ? xv.cols() : xv.dim(0);
            Tensor gx = Tensor::zeros(xv.shape());
            Tensor gm = Tensor::zeros(xv.shape());
            Tensor gl = Tensor::zeros(xv.shape());
            for (int i = 0; i < rows; ++i) {
                const double gi = mat ? g(i) : g.scalar_value();
                for (int j = 0; j < cols; ++j) {
                    const long k = static_cast<long>(i) * cols + j;
                    const double inv_s = std::exp(-lv.at(k));
                    const double z = (xv.at(k) - mv.at(k)) * inv_s;
                    const double dz = (nu + 1.0) * z / (nu + z * z);
                    gx.at(k) = -gi * dz * inv_s;
                    gm.at(k) = gi * dz * inv_s;
                    gl.at(k) = gi * (dz * z - 1.0);
                }
            }
            accumulate(r.a, std::move(gx));
            accumulate(r.b, std::move(gm));
            accumulate(r.c, std::move(gl));
            break;
        }
    }
}

namespace {

Node binary(Tape* t, Op op, const Node& a, const Node& b, Tensor value) {
    Record r;
    r.value = std::move(value);
    if (t->grad_enabled && (a.requires_grad() || b.requires_grad())) {
        r.requires_grad = true;
        r.op = op;
        r.a = a.id;
        r.b = b.id;
    }
    return t->push(std::move(r));
}

Node unary(const Node& a, Op op, Tensor value) {
    check(a.valid(), "op on invalid node");
    Record r;
    r.value = std::move(value);
    if (a.tape->grad_enabled && a.requires_grad()) {
        r.requires_grad = true;
        r.op = op;
        r.a = a.id;
    }
    return a.tape->push(std::move(r));
}

}  // namespace

Node add(const Node& a, const Node& b) {
    Tape* t = same_tape(a, b);
    return binary(t, Op::add, a, b, enko::add(a.value(), b.value()));
}

Node sub(const Node& a, const Node& b) {
    Tape* t = same_tape(a, b);
    return binary(t, Op::sub, a, b, enko::sub(a.value(), b.value()));
}

Node mul(const Node& a, const Node& b) {
    Tape* t = same_tape(a, b);
    return binary(t, Op::mul, a, b, enko::hadamard(a.value(), b.value()));
}

Node divide(const Node& a, const Node& b) {
    Tape* t = same_tape(a, b);
    check(a.value().same_shape(b.value()), "divide shape mismatch");
    Tensor v = a.value();
    for (long i = 0; i < v.size(); ++i) v.at(i) /= b.value().at(i);
    return binary(t, Op::divide, a, b, std::move(v));
}

Node negate(const Node& a) {
    Tensor v = a.value();
    for (long i = 0; i < v.size(); ++i) v.at(i) = -v.at(i);
    return unary(a, Op::negate, std::move(v));
}

Node add_const(const Node& a, double c) {
    Tensor v = a.value();
    for (long i = 0; i < v.size(); ++i) v.at(i) += c;
    Node n = unary(a, Op::add_const, std::move(v));
    return n;
}

Node mul_const(const Node& a, double c) {
    Tensor v = a.value();
    for (long i = 0; i < v.size(); ++i) v.at(i) *= c;
    Node n = unary(a, Op::mul_const, std::move(v));
    a.tape->rec(n.id).c0 = c;
    return n;
}

Node matmul(const Node& a, const Node& b) {
    Tape* t = same_tape(a, b);
    return binary(t, Op::matmul, a, b, enko::matmul(a.value(), b.value()));
}

Node transpose(const Node& a) { return unary(a, Op::transpose, transposed(a.value())); }

Node tanh(const Node& a) {
    Tensor v = a.value();
    for (long i = 0; i < v.size(); ++i) v.at(i) = std::tanh(v.at(i));
    return unary(a, Op::tanh_fn, std::move(v));
}

Node exp(const Node& a) {
    Tensor v = a.value();
    for (long i = 0; i < v.size(); ++i) v.at(i) = std::exp(v.at(i));
    return unary(a, Op::exp_fn, std::move(v));
}

Node log(const Node& a) {
    Tensor v = a.value();
    for (long i = 0; i < v.size(); ++i) v.at(i) = std::log(v.at(i));
    return unary(a, Op::log_fn, std::move(v));
}

Node sqrt(const Node& a) {
    Tensor v = a.value();
    for (long i = 0; i < v.size(); ++i) v.at(i) = std::sqrt(v.at(i));
    return unary(a, Op::sqrt_fn, std::move(v));
}

Node square(const Node& a) {
    Tensor v = a.value();
    for (long i = 0; i < v.size(); ++i) v.at(i) *= v.at(i);
    return unary(a, Op::square, std::move(v));
}

Node sum(const Node& a) {
    double s = 0.0;
    for (long i = 0; i < a.value().size(); ++i) s += a.value().at(i);
    return unary(a, Op::sum_all, Tensor::scalar(s));
}

Node mean(const Node& a) {
    check(a.value().size() > 0, "mean of empty tensor");
    double s = 0.0;
    for (long i = 0; i < a.value().size(); ++i) s += a.value().at(i);
    return unary(a, Op::mean_all, Tensor::scalar(s / a.value().size()));
}

Node logsumexp(const Node& a) {
    const Tensor& v = a.value();
    check(v.is_vector() && v.size() > 0, "logsumexp needs a nonempty vector");
    double m = v(0);
    for (long i = 1; i < v.size(); ++i) m = std::max(m, v.at(i));
    if (!std::isfinite(m)) return unary(a, Op::logsumexp, Tensor::scalar(m));
    double s = 0.0;
    for (long i = 0; i < v.size(); ++i) s += std::exp(v.at(i) - m);
    return unary(a, Op::logsumexp, Tensor::scalar(m + std::log(s)));
}

Node sum_rows(const Node& a) {
    const Tensor& v = a.value();
    check(v.is_matrix(), "sum_rows needs a matrix");
    Tensor out = Tensor::zeros({v.rows()});
    for (int i = 0; i < v.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < v.cols(); ++j) s += v(i, j);
        out(i) = s;
    }
    return unary(a, Op::sum_rows, std::move(out));
}

Node col_mean(const Node& a) {
    const Tensor& v = a.value();
    check(v.is_matrix() && v.rows() > 0, "col_mean needs a nonempty matrix");
    Tensor out = Tensor::zeros({v.cols()});
    for (int i = 0; i < v.rows(); ++i)
        for (int j = 0; j < v.cols(); ++j) out(j) += v(i, j);
    for (int j = 0; j < v.cols(); ++j) out(j) /= v.rows();
    return unary(a, Op::col_mean, std::move(out));
}

namespace {

Node rowvec_op(Op op, const Node& m, const Node& v) {
    Tape* t = same_tape(m, v);
    const Tensor& mv = m.value();
    const Tensor& vv = v.value();
    if (!(mv.is_matrix() && vv.is_vector() && mv.cols() == vv.dim(0)))
        throw std::invalid_argument("rowvec op shape mismatch " + mv.shape_str() + " vs " +
                                    vv.shape_str());
    Tensor out = mv;
    for (int i = 0; i < mv.rows(); ++i)
        for (int j = 0; j < mv.cols(); ++j) {
            if (op == Op::add_rowvec) out(i, j) += vv(j);
            if (op == Op::sub_rowvec) out(i, j) -= vv(j);
            if (op == Op::mul_rowvec) out(i, j) *= vv(j);
        }
    return binary(t, op, m, v, std::move(out));
}

}  // namespace

Node add_rowvec(const Node& m, const Node& v) { return rowvec_op(Op::add_rowvec, m, v); }
Node sub_rowvec(const Node& m, const Node& v) { return rowvec_op(Op::sub_rowvec, m, v); }
Node mul_rowvec(const Node& m, const Node& v) { return rowvec_op(Op::mul_rowvec, m, v); }

Node replicate_row(const Node& v, int n) {
    const Tensor& vv = v.value();
    check(vv.is_vector() && n >= 1, "replicate_row needs a vector and n >= 1");
    Tensor out = Tensor::zeros({n, vv.dim(0)});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < vv.dim(0); ++j) out(i, j) = vv(j);
    return unary(v, Op::replicate_row, std::move(out));
}

Node concat_cols(const Node& a, const Node& b) {
    Tape* t = same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    check(av.is_matrix() && bv.is_matrix() && av.rows() == bv.rows(),
          "concat_cols row mismatch");
    Tensor out = Tensor::zeros({av.rows(), av.cols() + bv.cols()});
    for (int i = 0; i < av.rows(); ++i) {
        for (int j = 0; j < av.cols(); ++j) out(i, j) = av(i, j);
        for (int j = 0; j < bv.cols(); ++j) out(i, av.cols() + j) = bv(i, j);
    }
    return binary(t, Op::concat_cols, a, b, std::move(out));
}

Node concat_vec(const Node& a, const Node& b) {
    Tape* t = same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    check(av.is_vector() && bv.is_vector(), "concat_vec needs vectors");
    Tensor out = Tensor::zeros({av.dim(0) + bv.dim(0)});
    for (int i = 0; i < av.dim(0); ++i) out(i) = av(i);
    for (int i = 0; i < bv.dim(0); ++i) out(av.dim(0) + i) = bv(i);
    return binary(t, Op::concat_vec, a, b, std::move(out));
}

Node gather_rows(const Node& m, const std::vector<std::int32_t>& indices) {
    const Tensor& mv = m.value();
    check(mv.is_matrix(), "gather_rows needs a matrix");
    for (auto i : indices) check(i >= 0 && i < mv.rows(), "gather_rows index out of range");
    Tensor out = Tensor::zeros({static_cast<int>(indices.size()), mv.cols()});
    for (size_t i = 0; i < indices.size(); ++i)
        for (int j = 0; j < mv.cols(); ++j) out(static_cast<int>(i), j) = mv(indices[i], j);
    Node n = unary(m, Op::gather_rows, std::move(out));
    if (m.tape->rec(n.id).requires_grad) m.tape->rec(n.id).idx = indices;
    return n;
}

Node slice_vec(const Node& v, int offset, int len) {
    const Tensor& vv = v.value();
    check(vv.is_vector() && offset >= 0 && len >= 0 && offset + len <= vv.dim(0),
          "slice_vec out of range");
    Tensor out = Tensor::zeros({len});
    for (int i = 0; i < len; ++i) out(i) = vv(offset + i);
    Node n = unary(v, Op::slice_vec, std::move(out));
    Record& r = v.tape->rec(n.id);
    r.i0 = offset;
    r.i1 = len;
    return n;
}

Node reshape(const Node& a, const std::vector<int>& shape) {
    Tensor out(shape, a.value().storage());
    return unary(a, Op::reshape, std::move(out));
}

Node cholesky(const Node& a) {
    return unary(a, Op::cholesky, cholesky_lower(a.value()));
}

Node solve_lower_tri(const Node& l, const Node& b) {
    Tape* t = same_tape(l, b);
    return binary(t, Op::solve_lower, l, b, enko::solve_lower(l.value(), b.value()));
}

Node solve_upper_tri(const Node& u, const Node& b) {
    Tape* t = same_tape(u, b);
    return binary(t, Op::solve_upper, u, b, enko::solve_upper(u.value(), b.value()));
}

Node outer(const Node& u, const Node& v) {
    Tape* t = same_tape(u, v);
    return binary(t, Op::outer, u, v, enko::outer(u.value(), v.value()));
}

Node row_outer_flatten(const Node& a) {
    const Tensor& av = a.value();
    check(av.is_matrix(), "row_outer_flatten needs a matrix");
    const int n = av.rows(), d = av.cols();
    Tensor out = Tensor::zeros({n, d * d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) out(i, j * d + k) = av(i, j) * av(i, k);
    return unary(a, Op::row_outer_flatten, std::move(out));
}

Node select(const Tensor& mask, const Node& a, const Node& b) {
    Tape* t = same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    check(av.same_shape(bv) && mask.same_shape(av), "select shape mismatch");
    Tensor out = av;
    std::vector<std::int32_t> m(static_cast<size_t>(mask.size()));
    for (long i = 0; i < mask.size(); ++i) {
        m[i] = mask.at(i) != 0.0 ? 1 : 0;
        if (m[i] == 0) out.at(i) = bv.at(i);
    }
    Node n = binary(t, Op::select, a, b, std::move(out));
    if (t->rec(n.id).requires_grad) t->rec(n.id).idx = std::move(m);
    return n;
}

namespace {

constexpr double kLog2PiAd = 1.8378770664093454835606594728112;

Node ternary(Op op, const Node& x, const Node& m, const Node& l, Tensor value, double c0) {
    Tape* t = same_tape(x, m);
    check(l.valid() && l.tape == t, "op on nodes from different tapes");
    Record r;
    r.value = std::move(value);
    if (t->grad_enabled && (x.requires_grad() || m.requires_grad() || l.requires_grad())) {
        r.requires_grad = true;
        r.op = op;
        r.a = x.id;
        r.b = m.id;
        r.c = l.id;
        r.c0 = c0;
    }
    return t->push(std::move(r));
}

}  // namespace

Node gauss_logpdf_rows(const Node& x, const Node& mean, const Node& log_std) {
    const Tensor& xv = x.value();
    check(xv.same_shape(mean.value()) && xv.same_shape(log_std.value()),
          "gauss_logpdf_rows: shape mismatch");
    const bool mat = xv.is_matrix();
    const int rows = mat ? xv.rows() : 1;
    const int cols = mat ? xv.cols() : xv.dim(0);
    Tensor out = mat ? Tensor::zeros({rows}) : Tensor::scalar(0.0);
    const Tensor& mv = mean.value();
    const Tensor& lv = log_std.value();
    for (int i = 0; i < rows; ++i) {
        double acc = -0.5 * kLog2PiAd * cols;
        for (int j = 0; j < cols; ++j) {
            const long k = static_cast<long>(i) * cols + j;
            const double z = (xv.at(k) - mv.at(k)) * std::exp(-lv.at(k));
            acc += -0.5 * z * z - lv.at(k);
        }
        out.at(i) = acc;
    }
    return ternary(Op::gauss_logpdf, x, mean, log_std, std::move(out), 0.0);
}

Node student_logpdf_rows(double df, const Node& x, const Node& loc, const Node& log_scale) {
    const Tensor& xv = x.value();
    check(df > 0.0, "student_logpdf_rows: df must be positive");
    check(xv.same_shape(loc.value()) && xv.same_shape(log_scale.value()),
          "student_logpdf_rows: shape mismatch");
    const bool mat = xv.is_matrix();
    const int rows = mat ? xv.rows() : 1;
    const int cols = mat ? xv.cols() : xv.dim(0);
    const double cst =
        std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) - 0.5 * std::log(df * M_PI);
    Tensor out = mat ? Tensor::zeros({rows}) : Tensor::scalar(0.0);
    const Tensor& mv = loc.value();
    const Tensor& lv = log_scale.value();
    for (int i = 0; i < rows; ++i) {
        double acc = cst * cols;
        for (int j = 0; j < cols; ++j) {
            const long k = static_cast<long>(i) * cols + j;
            const double z = (xv.at(k) - mv.at(k)) * std::exp(-lv.at(k));
            acc += -0.5 * (df + 1.0) * std::log1p(z * z / df) - lv.at(k);
        }
        out.at(i) = acc;
    }
    return ternary(Op::student_logpdf, x, loc, log_scale, std::move(out), df);
}

Tensor central_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& point,
                         double step) {
    check(step > 0.0, "central_diff_grad: step must be positive");
    Tensor g = Tensor::zeros(point.shape());
    Tensor p = point;
    for (long i = 0; i < point.size(); ++i) {
        const double x = p.at(i);
        p.at(i) = x + step;
        const double fp = f(p);
        p.at(i) = x - step;
        const double fm = f(p);
        p.at(i) = x;
        g.at(i) = (fp - fm) / (2.0 * step);
    }
    return g;
}

double finite_diff_check(const std::function<double(const Tensor&)>& f, const Tensor& point,
                         const Tensor& analytic, double step) {
    check(analytic.same_shape(point), "finite_diff_check: gradient shape mismatch");
    Tensor fd = central_diff_grad(f, point, step);
    double worst = 0.0;
    for (long i = 0; i < fd.size(); ++i) {
        double err = std::abs(analytic.at(i) - fd.at(i)) / (std::abs(fd.at(i)) + 1e-8);
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace enko::ad
