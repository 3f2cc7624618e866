#include "salsketch/ad.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <utility>

namespace salsketch::ad {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

void require_same_tape(const Var& a, const Var& b, const char* op) {
  if (a.tape != b.tape) throw Error(std::string(op) + ": vars from different tapes");
}

bool track(const Var& a) { return a.tape->grad_enabled() && a.tape->needs_grad(a.id); }

}  // namespace

const Matrix& Var::v() const {
  if (!valid()) throw Error("use of invalid ad::Var");
  return tape->val(id);
}

double Var::scalar() const {
  const Matrix& m = v();
  if (m.rows() != 1 || m.cols() != 1) {
    throw ShapeError("scalar() on " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     " var");
  }
  return m(0, 0);
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_ && requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant_scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Var Tape::make(Matrix value, bool requires_grad, std::function<void()> pull) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.pull = std::move(pull);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Tape::value(Var x) const { return val(x.id); }

const Matrix& Tape::grad(Var x) const { return nodes_[static_cast<std::size_t>(x.id)].grad; }

Matrix& Tape::grad_acc(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

bool Tape::has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad.size() != 0; }

void Tape::backward(Var root) {
  if (!grad_enabled_) throw Error("backward() on a gradient-disabled tape");
  if (root.tape != this) throw Error("backward(): root from another tape");
  const Matrix& rv = val(root.id);
  if (rv.rows() != 1 || rv.cols() != 1) throw ShapeError("backward(): root must be 1x1");
  grad_acc(root.id).setConstant(1.0);
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || !n.pull) continue;
    if (n.grad.size() == 0) continue;  // no path to the root
    n.pull();
  }
}

// ---------------------------------------------------------------------------
// Elementwise and scalar ops.

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  require_same_shape(a, b, "add");
  Tape* t = a.tape;
  const bool rg = track(a) || track(b);
  const int ai = a.id, bi = b.id, oi = static_cast<int>(t->node_count());
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, bi, oi] {
      const Matrix& g = t->grad_acc(oi);
      if (t->needs_grad(ai)) t->grad_acc(ai) += g;
      if (t->needs_grad(bi)) t->grad_acc(bi) += g;
    };
  }
  return t->make(a.v() + b.v(), rg, std::move(pull));
}

Var sub(Var a, Var b) {
  require_same_tape(a, b, "sub");
  require_same_shape(a, b, "sub");
  Tape* t = a.tape;
  const bool rg = track(a) || track(b);
  const int ai = a.id, bi = b.id, oi = static_cast<int>(t->node_count());
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, bi, oi] {
      const Matrix& g = t->grad_acc(oi);
      if (t->needs_grad(ai)) t->grad_acc(ai) += g;
      if (t->needs_grad(bi)) t->grad_acc(bi) -= g;
    };
  }
  return t->make(a.v() - b.v(), rg, std::move(pull));
}

Var mul(Var a, Var b) {
  require_same_tape(a, b, "mul");
  require_same_shape(a, b, "mul");
  Tape* t = a.tape;
  const bool rg = track(a) || track(b);
  const int ai = a.id, bi = b.id, oi = static_cast<int>(t->node_count());
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, bi, oi] {
      const Matrix& g = t->grad_acc(oi);
      if (t->needs_grad(ai)) t->grad_acc(ai) += g.cwiseProduct(t->val(bi));
      if (t->needs_grad(bi)) t->grad_acc(bi) += g.cwiseProduct(t->val(ai));
    };
  }
  return t->make(a.v().cwiseProduct(b.v()), rg, std::move(pull));
}

Var div(Var a, Var b) {
  require_same_tape(a, b, "div");
  require_same_shape(a, b, "div");
  Tape* t = a.tape;
  const bool rg = track(a) || track(b);
  const int ai = a.id, bi = b.id, oi = static_cast<int>(t->node_count());
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, bi, oi] {
      const Matrix& g = t->grad_acc(oi);
      const Matrix& bv = t->val(bi);
      if (t->needs_grad(ai)) t->grad_acc(ai) += g.cwiseQuotient(bv);
      if (t->needs_grad(bi)) {
        t->grad_acc(bi) -= g.cwiseProduct(t->val(ai)).cwiseQuotient(bv.cwiseProduct(bv));
      }
    };
  }
  return t->make(a.v().cwiseQuotient(b.v()), rg, std::move(pull));
}

Var scale(Var a, double s) {
  Tape* t = a.tape;
  const bool rg = track(a);
  const int ai = a.id, oi = static_cast<int>(t->node_count());
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, oi, s] { t->grad_acc(ai) += s * t->grad_acc(oi); };
  }
  return t->make(a.v() * s, rg, std::move(pull));
}

Var add_scalar(Var a, double s) {
  Tape* t = a.tape;
  const bool rg = track(a);
  const int ai = a.id, oi = static_cast<int>(t->node_count());
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, oi] { t->grad_acc(ai) += t->grad_acc(oi); };
  }
  return t->make(Matrix((a.v().array() + s).matrix()), rg, std::move(pull));
}

Var neg(Var a) { return scale(a, -1.0); }

Var tanh_(Var a) {
  Tape* t = a.tape;
  const bool rg = track(a);
  const int ai = a.id, oi = static_cast<int>(t->node_count());
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, oi] {
      const Matrix& y = t->val(oi);
      t->grad_acc(ai).array() += t->grad_acc(oi).array() * (1.0 - y.array().square());
    };
  }
  return t->make(Matrix(a.v().array().tanh().matrix()), rg, std::move(pull));
}

Var sigmoid_(Var a) {
  Tape* t = a.tape;
  const bool rg = track(a);
  const int ai = a.id, oi = static_cast<int>(t->node_count());
  Matrix y = (1.0 / (1.0 + (-a.v().array()).exp())).matrix();
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, oi] {
      const Matrix& yv = t->val(oi);
      t->grad_acc(ai).array() += t->grad_acc(oi).array() * yv.array() * (1.0 - yv.array());
    };
  }
  return t->make(std::move(y), rg, std::move(pull));
}

Var relu_(Var a) {
  Tape* t = a.tape;
  const bool rg = track(a);
  const int ai = a.id, oi = static_cast<int>(t->node_count());
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, oi] {
      const Matrix& x = t->val(ai);
      t->grad_acc(ai).array() +=
          t->grad_acc(oi).array() * (x.array() > 0.0).cast<double>();
    };
  }
  return t->make(a.v().cwiseMax(0.0), rg, std::move(pull));
}

Var exp_(Var a) {
  Tape* t = a.tape;
  const bool rg = track(a);
  const int ai = a.id, oi = static_cast<int>(t->node_count());
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, oi] {
      t->grad_acc(ai).array() += t->grad_acc(oi).array() * t->val(oi).array();
    };
  }
  return t->make(Matrix(a.v().array().exp().matrix()), rg, std::move(pull));
}

Var log_(Var a) {
  Tape* t = a.tape;
  const bool rg = track(a);
  const int ai = a.id, oi = static_cast<int>(t->node_count());
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, oi] {
      t->grad_acc(ai).array() += t->grad_acc(oi).array() / t->val(ai).array();
    };
  }
  return t->make(Matrix(a.v().array().log().matrix()), rg, std::move(pull));
}

Var abs_(Var a) {
  Tape* t = a.tape;
  const bool rg = track(a);
  const int ai = a.id, oi = static_cast<int>(t->node_count());
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, oi] {
      const Matrix& x = t->val(ai);
      t->grad_acc(ai).array() += t->grad_acc(oi).array() * x.array().sign();
    };
  }
  return t->make(Matrix(a.v().array().abs().matrix()), rg, std::move(pull));
}

Var square(Var a) {
  Tape* t = a.tape;
  const bool rg = track(a);
  const int ai = a.id, oi = static_cast<int>(t->node_count());
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, oi] {
      t->grad_acc(ai).array() += 2.0 * t->grad_acc(oi).array() * t->val(ai).array();
    };
  }
  return t->make(Matrix(a.v().array().square().matrix()), rg, std::move(pull));
}

Var clamp_(Var a, double lo, double hi) {
  if (!(lo < hi)) throw Error("clamp_: lo must be < hi");
  Tape* t = a.tape;
  const bool rg = track(a);
  const int ai = a.id, oi = static_cast<int>(t->node_count());
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, oi, lo, hi] {
      const Matrix& x = t->val(ai);
      const auto mask = (x.array() >= lo && x.array() <= hi).cast<double>();
      t->grad_acc(ai).array() += t->grad_acc(oi).array() * mask;
    };
  }
  return t->make(a.v().cwiseMax(lo).cwiseMin(hi), rg, std::move(pull));
}

// ---------------------------------------------------------------------------
// Linear algebra and structure.

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dims " + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()));
  }
  Tape* t = a.tape;
  const bool rg = track(a) || track(b);
  const int ai = a.id, bi = b.id, oi = static_cast<int>(t->node_count());
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, bi, oi] {
      const Matrix& g = t->grad_acc(oi);
      if (t->needs_grad(ai)) t->grad_acc(ai) += g * t->val(bi).transpose();
      if (t->needs_grad(bi)) t->grad_acc(bi) += t->val(ai).transpose() * g;
    };
  }
  return t->make(a.v() * b.v(), rg, std::move(pull));
}

Var transpose(Var a) {
  Tape* t = a.tape;
  const bool rg = track(a);
  const int ai = a.id, oi = static_cast<int>(t->node_count());
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, oi] { t->grad_acc(ai) += t->grad_acc(oi).transpose(); };
  }
  return t->make(a.v().transpose(), rg, std::move(pull));
}

Var broadcast_add_col(Var a, Var col) {
  require_same_tape(a, col, "broadcast_add_col");
  if (col.cols() != 1 || col.rows() != a.rows()) {
    throw ShapeError("broadcast_add_col: col must be " + std::to_string(a.rows()) + "x1");
  }
  Tape* t = a.tape;
  const bool rg = track(a) || track(col);
  const int ai = a.id, ci = col.id, oi = static_cast<int>(t->node_count());
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, ci, oi] {
      const Matrix& g = t->grad_acc(oi);
      if (t->needs_grad(ai)) t->grad_acc(ai) += g;
      if (t->needs_grad(ci)) t->grad_acc(ci) += g.rowwise().sum();
    };
  }
  Matrix y = a.v();
  y.colwise() += Eigen::VectorXd(col.v().col(0));
  return t->make(std::move(y), rg, std::move(pull));
}

Var concat_rows(Var a, Var b) {
  require_same_tape(a, b, "concat_rows");
  if (a.cols() != b.cols()) throw ShapeError("concat_rows: column count mismatch");
  Tape* t = a.tape;
  const bool rg = track(a) || track(b);
  const int ai = a.id, bi = b.id, oi = static_cast<int>(t->node_count());
  const Eigen::Index ra = a.rows(), rb = b.rows(), c = a.cols();
  Matrix y(ra + rb, c);
  y.topRows(ra) = a.v();
  y.bottomRows(rb) = b.v();
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, bi, oi, ra, rb] {
      const Matrix& g = t->grad_acc(oi);
      if (t->needs_grad(ai)) t->grad_acc(ai) += g.topRows(ra);
      if (t->needs_grad(bi)) t->grad_acc(bi) += g.bottomRows(rb);
    };
  }
  return t->make(std::move(y), rg, std::move(pull));
}

Var slice_rows(Var a, int r0, int n) {
  if (r0 < 0 || n <= 0 || r0 + n > a.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(r0) + "," + std::to_string(r0 + n) +
                     ") out of " + std::to_string(a.rows()) + " rows");
  }
  Tape* t = a.tape;
  const bool rg = track(a);
  const int ai = a.id, oi = static_cast<int>(t->node_count());
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, oi, r0, n] {
      t->grad_acc(ai).middleRows(r0, n) += t->grad_acc(oi);
    };
  }
  return t->make(a.v().middleRows(r0, n), rg, std::move(pull));
}

// ---------------------------------------------------------------------------
// Reductions.

Var sum_all(Var a) {
  Tape* t = a.tape;
  const bool rg = track(a);
  const int ai = a.id, oi = static_cast<int>(t->node_count());
  Matrix y(1, 1);
  y(0, 0) = a.v().sum();
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, oi] { t->grad_acc(ai).array() += t->grad_acc(oi)(0, 0); };
  }
  return t->make(std::move(y), rg, std::move(pull));
}

Var mean_all(Var a) {
  Tape* t = a.tape;
  const double n = static_cast<double>(a.v().size());
  if (n == 0.0) throw ShapeError("mean_all: empty matrix");
  const bool rg = track(a);
  const int ai = a.id, oi = static_cast<int>(t->node_count());
  Matrix y(1, 1);
  y(0, 0) = a.v().mean();
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, oi, n] { t->grad_acc(ai).array() += t->grad_acc(oi)(0, 0) / n; };
  }
  return t->make(std::move(y), rg, std::move(pull));
}

Var max_all(Var a) {
  Tape* t = a.tape;
  const bool rg = track(a);
  const int ai = a.id, oi = static_cast<int>(t->node_count());
  Eigen::Index r = 0, c = 0;
  Matrix y(1, 1);
  y(0, 0) = a.v().maxCoeff(&r, &c);
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, oi, r, c] { t->grad_acc(ai)(r, c) += t->grad_acc(oi)(0, 0); };
  }
  return t->make(std::move(y), rg, std::move(pull));
}

Var softmax_all(Var a) {
  Tape* t = a.tape;
  const bool rg = track(a);
  const int ai = a.id, oi = static_cast<int>(t->node_count());
  const Matrix& x = a.v();
  const double m = x.maxCoeff();
  Matrix y = (x.array() - m).exp().matrix();
  y /= y.sum();
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, oi] {
      const Matrix& yv = t->val(oi);
      const Matrix& g = t->grad_acc(oi);
      const double dot = g.cwiseProduct(yv).sum();
      t->grad_acc(ai).array() += yv.array() * (g.array() - dot);
    };
  }
  return t->make(std::move(y), rg, std::move(pull));
}

Var log_softmax_all(Var a) {
  Tape* t = a.tape;
  const bool rg = track(a);
  const int ai = a.id, oi = static_cast<int>(t->node_count());
  const Matrix& x = a.v();
  const double m = x.maxCoeff();
  const double lse = m + std::log((x.array() - m).exp().sum());
  Matrix y = (x.array() - lse).matrix();
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, oi] {
      const Matrix& yv = t->val(oi);
      const Matrix& g = t->grad_acc(oi);
      const double gsum = g.sum();
      t->grad_acc(ai).array() += g.array() - yv.array().exp() * gsum;
    };
  }
  return t->make(std::move(y), rg, std::move(pull));
}

Var logsumexp_all(Var a) {
  Tape* t = a.tape;
  const bool rg = track(a);
  const int ai = a.id, oi = static_cast<int>(t->node_count());
  const Matrix& x = a.v();
  const double m = x.maxCoeff();
  Matrix y(1, 1);
  y(0, 0) = m + std::log((x.array() - m).exp().sum());
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, oi] {
      const Matrix& x2 = t->val(ai);
      const double lse = t->val(oi)(0, 0);
      t->grad_acc(ai).array() += (x2.array() - lse).exp() * t->grad_acc(oi)(0, 0);
    };
  }
  return t->make(std::move(y), rg, std::move(pull));
}

Var div_by_scalar(Var a, Var s) {
  require_same_tape(a, s, "div_by_scalar");
  if (s.rows() != 1 || s.cols() != 1) throw ShapeError("div_by_scalar: divisor must be 1x1");
  Tape* t = a.tape;
  const bool rg = track(a) || track(s);
  const int ai = a.id, si = s.id, oi = static_cast<int>(t->node_count());
  std::function<void()> pull;
  if (rg) {
    pull = [t, ai, si, oi] {
      const Matrix& g = t->grad_acc(oi);
      const double sv = t->val(si)(0, 0);
      if (t->needs_grad(ai)) t->grad_acc(ai) += g / sv;
      if (t->needs_grad(si)) {
        t->grad_acc(si)(0, 0) -= g.cwiseProduct(t->val(ai)).sum() / (sv * sv);
      }
    };
  }
  return t->make(a.v() / s.v()(0, 0), rg, std::move(pull));
}

// ---------------------------------------------------------------------------
// Spatial ops.

Matrix im2col(const Matrix& x, const ConvSpec& s) {
  if (x.rows() != s.c_in || x.cols() != static_cast<Eigen::Index>(s.h) * s.w) {
    throw ShapeError("im2col: input is " + std::to_string(x.rows()) + "x" +
                     std::to_string(x.cols()) + ", spec wants " + std::to_string(s.c_in) + "x" +
                     std::to_string(s.h * s.w));
  }
  const int ho = s.out_h(), wo = s.out_w();
  Matrix cols = Matrix::Zero(static_cast<Eigen::Index>(s.c_in) * s.kh * s.kw,
                             static_cast<Eigen::Index>(ho) * wo);
  for (int c = 0; c < s.c_in; ++c) {
    for (int ky = 0; ky < s.kh; ++ky) {
      for (int kx = 0; kx < s.kw; ++kx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * s.kh + ky) * s.kw + kx;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * s.stride - s.pad + ky;
          if (iy < 0 || iy >= s.h) continue;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * s.stride - s.pad + kx;
            if (ix < 0 || ix >= s.w) continue;
            cols(row, static_cast<Eigen::Index>(oy) * wo + ox) =
                x(c, static_cast<Eigen::Index>(iy) * s.w + ix);
          }
        }
      }
    }
  }
  return cols;
}

Matrix col2im(const Matrix& cols, const ConvSpec& s) {
  const int ho = s.out_h(), wo = s.out_w();
  if (cols.rows() != static_cast<Eigen::Index>(s.c_in) * s.kh * s.kw ||
      cols.cols() != static_cast<Eigen::Index>(ho) * wo) {
    throw ShapeError("col2im: shape mismatch");
  }
  Matrix x = Matrix::Zero(s.c_in, static_cast<Eigen::Index>(s.h) * s.w);
  for (int c = 0; c < s.c_in; ++c) {
    for (int ky = 0; ky < s.kh; ++ky) {
      for (int kx = 0; kx < s.kw; ++kx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * s.kh + ky) * s.kw + kx;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * s.stride - s.pad + ky;
          if (iy < 0 || iy >= s.h) continue;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * s.stride - s.pad + kx;
            if (ix < 0 || ix >= s.w) continue;
            x(c, static_cast<Eigen::Index>(iy) * s.w + ix) +=
                cols(row, static_cast<Eigen::Index>(oy) * wo + ox);
          }
        }
      }
    }
  }
  return x;
}

Var conv2d(Var x, Var w, Var b, const ConvSpec& spec) {
  require_same_tape(x, w, "conv2d");
  require_same_tape(x, b, "conv2d");
  if (w.cols() != static_cast<Eigen::Index>(spec.c_in) * spec.kh * spec.kw) {
    throw ShapeError("conv2d: weight cols " + std::to_string(w.cols()) + " != c_in*kh*kw " +
                     std::to_string(spec.c_in * spec.kh * spec.kw));
  }
  if (b.rows() != w.rows() || b.cols() != 1) throw ShapeError("conv2d: bias must be c_out x 1");
  Tape* t = x.tape;
  Matrix cols = im2col(x.v(), spec);
  Matrix y = w.v() * cols;
  y.colwise() += Eigen::VectorXd(b.v().col(0));
  const bool rg = track(x) || track(w) || track(b);
  const int xi = x.id, wi = w.id, bci = b.id, oi = static_cast<int>(t->node_count());
  std::function<void()> pull;
  if (rg) {
    auto cached = std::make_shared<Matrix>(std::move(cols));
    ConvSpec sp = spec;
    pull = [t, xi, wi, bci, oi, cached, sp] {
      const Matrix& g = t->grad_acc(oi);
      if (t->needs_grad(wi)) t->grad_acc(wi) += g * cached->transpose();
      if (t->needs_grad(bci)) t->grad_acc(bci) += g.rowwise().sum();
      if (t->needs_grad(xi)) t->grad_acc(xi) += col2im(t->val(wi).transpose() * g, sp);
    };
  }
  return t->make(std::move(y), rg, std::move(pull));
}

Var maxpool2(Var x, int h, int w) {
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2: side not even (" + std::to_string(h) + "x" + std::to_string(w) +
                     ")");
  }
  if (x.cols() != static_cast<Eigen::Index>(h) * w) throw ShapeError("maxpool2: bad spatial size");
  Tape* t = x.tape;
  const int c = static_cast<int>(x.rows());
  const int ho = h / 2, wo = w / 2;
  const Matrix& xv = x.v();
  Matrix y(c, static_cast<Eigen::Index>(ho) * wo);
  auto arg = std::make_shared<std::vector<Eigen::Index>>(
      static_cast<std::size_t>(c) * ho * wo);
  for (int ci = 0; ci < c; ++ci) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        Eigen::Index best_idx = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const Eigen::Index idx = static_cast<Eigen::Index>(2 * oy + dy) * w + (2 * ox + dx);
            const double v = xv(ci, idx);
            if (v > best) {
              best = v;
              best_idx = idx;
            }
          }
        }
        const Eigen::Index o = static_cast<Eigen::Index>(oy) * wo + ox;
        y(ci, o) = best;
        (*arg)[static_cast<std::size_t>(ci) * ho * wo + static_cast<std::size_t>(o)] = best_idx;
      }
    }
  }
  const bool rg = track(x);
  const int xi = x.id, oi = static_cast<int>(t->node_count());
  std::function<void()> pull;
  if (rg) {
    pull = [t, xi, oi, arg, c, ho, wo] {
      const Matrix& g = t->grad_acc(oi);
      Matrix& gx = t->grad_acc(xi);
      for (int ci = 0; ci < c; ++ci) {
        for (Eigen::Index o = 0; o < static_cast<Eigen::Index>(ho) * wo; ++o) {
          gx(ci, (*arg)[static_cast<std::size_t>(ci) * ho * wo + static_cast<std::size_t>(o)]) +=
              g(ci, o);
        }
      }
    };
  }
  return t->make(std::move(y), rg, std::move(pull));
}

Var linmap(Var x, std::shared_ptr<const SparseMap> plan) {
  if (!plan) throw Error("linmap: null plan");
  if (x.cols() != plan->cols()) {
    throw ShapeError("linmap: input cols " + std::to_string(x.cols()) + " != plan cols " +
                     std::to_string(plan->cols()));
  }
  Tape* t = x.tape;
  Matrix y = (*plan * x.v().transpose()).transpose();
  const bool rg = track(x);
  const int xi = x.id, oi = static_cast<int>(t->node_count());
  std::function<void()> pull;
  if (rg) {
    pull = [t, xi, oi, plan] { t->grad_acc(xi) += t->grad_acc(oi) * (*plan); };
  }
  return t->make(std::move(y), rg, std::move(pull));
}

}  // namespace salsketch::ad
