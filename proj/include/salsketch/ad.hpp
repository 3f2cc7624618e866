#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "salsketch/common.hpp"
#include "salsketch/image.hpp"

namespace salsketch::ad {

class Tape;

// Handle into a tape node. Cheap to copy; invalid when default constructed.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Matrix& v() const;
  Eigen::Index rows() const { return v().rows(); }
  Eigen::Index cols() const { return v().cols(); }
  double scalar() const;  // requires 1x1
};

// Spatial layout for conv-style ops: feature maps are stored as one matrix with
// one row per channel and one column per pixel (row-major spatial order).
struct ConvSpec {
  int c_in = 0;
  int h = 0;
  int w = 0;
  int kh = 3;
  int kw = 3;
  int stride = 1;
  int pad = 1;

  int out_h() const { return (h + 2 * pad - kh) / stride + 1; }
  int out_w() const { return (w + 2 * pad - kw) / stride + 1; }
};

Matrix im2col(const Matrix& x, const ConvSpec& s);
Matrix col2im(const Matrix& cols, const ConvSpec& s);

// Reverse-mode tape. Records a closure per op when gradients are enabled;
// with gradients disabled the same ops run value-only, so inference and
// training share one code path.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var leaf(Matrix value, bool requires_grad = false);
  Var constant(Matrix value) { return leaf(std::move(value), false); }
  Var constant_scalar(double v);

  const Matrix& value(Var x) const;
  // Gradient of the last backward() root w.r.t. x; zero-sized if untouched.
  const Matrix& grad(Var x) const;
  void backward(Var root);

  std::size_t node_count() const { return nodes_.size(); }

  // Op-authoring interface (used by the free functions below).
  Var make(Matrix value, bool requires_grad, std::function<void()> pull);
  const Matrix& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  Matrix& grad_acc(int id);
  bool has_grad(int id) const;

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void()> pull;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
};

// Elementwise / scalar ops.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);
Var tanh_(Var a);
Var sigmoid_(Var a);
Var relu_(Var a);
Var exp_(Var a);
Var log_(Var a);
Var abs_(Var a);
Var square(Var a);
Var clamp_(Var a, double lo, double hi);

// Linear algebra / structure.
Var matmul(Var a, Var b);
Var transpose(Var a);
Var broadcast_add_col(Var a, Var col);
Var concat_rows(Var a, Var b);
Var slice_rows(Var a, int r0, int n);

// Reductions over all entries.
Var sum_all(Var a);
Var mean_all(Var a);
Var max_all(Var a);
Var softmax_all(Var a);
Var log_softmax_all(Var a);
Var logsumexp_all(Var a);

// a / s with s a 1x1 var, broadcast over a.
Var div_by_scalar(Var a, Var s);

// Spatial ops on channel-row feature matrices.
Var conv2d(Var x, Var w, Var b, const ConvSpec& spec);
Var maxpool2(Var x, int h, int w);
Var linmap(Var x, std::shared_ptr<const SparseMap> plan);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace salsketch::ad
