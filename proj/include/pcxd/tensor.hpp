// SPDX-License-Identifier: Apache-2.0
//
// Dense f64 tensors plus a reverse-mode gradient tape. Everything else in the
// library expresses its math on these two types. Tensors are immutable values
// once handed to a tape; a Tape is confined to one logical training step.

#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcxd {

#ifdef PCXD_REAL_FLOAT
using real = float;
#else
using real = double;
#endif

// Raised whenever an operation would store a NaN/Inf result.
struct NonFiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, real v);
  static Tensor from(std::vector<int> shape, std::vector<real> data);
  static Tensor row(std::vector<real> v);  // 1 x n
  static Tensor scalar(real v);            // 1 x 1
  static Tensor identity(int n);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  // 2-D accessors (most ops are matrix-shaped; rank is checked).
  int rows() const;
  int cols() const;
  real& at(int i, int j);
  real at(int i, int j) const;

  real* data() { return data_.data(); }
  const real* data() const { return data_.data(); }
  real& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  real operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  bool all_finite() const;

private:
  std::vector<int> shape_;
  std::vector<real> data_;
};

class Tape;

// Cheap handle to a tape node. Valid for the lifetime of its tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor& val() const;
  int rows() const { return val().rows(); }
  int cols() const { return val().cols(); }
  real item() const;  // value of a 1x1 node
};

// Reverse-mode tape. Node order is creation order, which is a topological
// order of the computation; backward replays it in exact reverse so that two
// identical forward passes produce bitwise-identical gradients.
class Tape {
public:
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var constant_scalar(real v) { return constant(Tensor::scalar(v)); }

  // Used by op implementations: appends a node whose gradient flows to
  // `parents` through `backward`. The result must be finite.
  Var emplace(const char* op_name, Tensor value, const std::vector<Var>& parents,
              BackwardFn backward);

  const Tensor& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }
  size_t size() const { return nodes_.size(); }

  // Seeds d(root)/d(root) = 1 and accumulates into every reachable node that
  // requires grad. May be called repeatedly on one tape (buffers reset).
  void backward(Var root);

  // Gradient of the last backward() root w.r.t. node v; zeros if unreached.
  Tensor grad(Var v) const;

  // Accumulates into a parent's gradient buffer (called from BackwardFn).
  void accumulate(int id, const Tensor& g);

private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

// ---------------------------------------------------------------------------
// Plain (non-tape) kernels shared by forward ops and backward closures.
// Fixed left-to-right accumulation everywhere; no parallel reductions.
// ---------------------------------------------------------------------------
namespace tmath {
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, real c);
Tensor colsum(const Tensor& a);  // m x n -> 1 x n
real sum(const Tensor& a);
real stable_sigmoid(real x);
real stable_softplus(real x);
}  // namespace tmath

// ---------------------------------------------------------------------------
// Differentiable ops.
// ---------------------------------------------------------------------------
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var add_rowvec(Var a, Var v);   // a: m x n, v: 1 x n broadcast over rows
Var scale(Var a, real c);
Var scale_by(Var a, Var s);     // s: 1 x 1 broadcast
Var exp_op(Var a);
Var log_op(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var softplus(Var a);
Var clamp(Var a, real lo, real hi);
Var sum(Var a);    // -> 1 x 1
Var mean(Var a);   // -> 1 x 1
Var softmax_rows(Var x);
Var layer_norm(Var x, Var gain, Var bias, real eps = real(1e-5));
Var slice_cols(Var a, int c0, int c1);
Var slice_rows(Var a, int r0, int r1);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var gather_rows(Var a, std::vector<int> idx);
Var colmax(Var a);  // m x n -> 1 x n, first row wins ties
Var minimum(Var a, Var b);  // elementwise; a wins ties
Var maximum(Var a, Var b);  // elementwise; a wins ties

}  // namespace pcxd
