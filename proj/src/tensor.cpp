// SPDX-License-Identifier: Apache-2.0

#include "pcxd/tensor.hpp"

#include <cmath>
#include <cstring>
#include <utility>

namespace pcxd {

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  int64_t n = 1;
  for (int d : shape_) {
    if (d <= 0) throw std::invalid_argument("Tensor: extents must be positive");
    n *= d;
  }
  data_.assign(static_cast<size_t>(n), real(0));
}

Tensor Tensor::full(std::vector<int> shape, real v) {
  Tensor t(std::move(shape));
  for (auto& x : t.data_) x = v;
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<real> data) {
  Tensor t;
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("Tensor: extents must be positive");
    n *= d;
  }
  if (n != static_cast<int64_t>(data.size()))
    throw std::invalid_argument("Tensor: shape/data length mismatch");
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

Tensor Tensor::row(std::vector<real> v) {
  const int n = static_cast<int>(v.size());
  return from({1, n}, std::move(v));
}

Tensor Tensor::scalar(real v) { return from({1, 1}, {v}); }

Tensor Tensor::identity(int n) {
  Tensor t({n, n});
  for (int i = 0; i < n; ++i) t.at(i, i) = real(1);
  return t;
}

int Tensor::rows() const {
  if (rank() != 2) throw std::invalid_argument("Tensor: rank-2 expected");
  return shape_[0];
}

int Tensor::cols() const {
  if (rank() != 2) throw std::invalid_argument("Tensor: rank-2 expected");
  return shape_[1];
}

real& Tensor::at(int i, int j) {
  return data_[static_cast<size_t>(i) * static_cast<size_t>(cols()) + static_cast<size_t>(j)];
}

real Tensor::at(int i, int j) const {
  return data_[static_cast<size_t>(i) * static_cast<size_t>(cols()) + static_cast<size_t>(j)];
}

bool Tensor::all_finite() const {
  for (real v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

const Tensor& Var::val() const {
  if (!valid()) throw std::invalid_argument("Var: unbound handle");
  return tape->value(id);
}

real Var::item() const {
  const Tensor& t = val();
  if (t.size() != 1) throw std::invalid_argument("Var::item: not a scalar");
  return t[0];
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NonFiniteError("leaf: non-finite value");
  nodes_.push_back(Node{std::move(value), requires_grad, nullptr});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::emplace(const char* op_name, Tensor value, const std::vector<Var>& parents,
                  BackwardFn backward) {
  bool rg = false;
  for (const Var& p : parents) {
    if (p.tape != this) throw std::invalid_argument("Tape: operand from another tape");
    rg = rg || nodes_[static_cast<size_t>(p.id)].requires_grad;
  }
  if (!value.all_finite())
    throw NonFiniteError(std::string(op_name) + ": non-finite result");
  nodes_.push_back(Node{std::move(value), rg, rg ? std::move(backward) : nullptr});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(Var root) {
  if (root.tape != this) throw std::invalid_argument("backward: root from another tape");
  const Tensor& rv = value(root.id);
  if (rv.size() != 1) throw std::invalid_argument("backward: root must be scalar");
  grads_.assign(nodes_.size(), Tensor{});
  grads_[static_cast<size_t>(root.id)] = Tensor::full(rv.shape(), real(1));
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.requires_grad || !n.backward) continue;
    const Tensor& g = grads_[static_cast<size_t>(i)];
    if (g.empty()) continue;  // unreachable from root
    n.backward(*this, g);
  }
}

Tensor Tape::grad(Var v) const {
  if (v.tape != this) throw std::invalid_argument("grad: foreign handle");
  const Tensor& g = grads_.at(static_cast<size_t>(v.id));
  if (g.empty()) return Tensor::zeros(value(v.id).shape());
  return g;
}

void Tape::accumulate(int id, const Tensor& g) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.requires_grad) return;
  Tensor& slot = grads_[static_cast<size_t>(id)];
  if (slot.empty()) {
    slot = g;
    return;
  }
  if (!slot.same_shape(g)) throw std::invalid_argument("accumulate: shape mismatch");
  for (int64_t i = 0; i < slot.size(); ++i) slot[i] += g[i];
}

// ---------------------------------------------------------------------------
// Plain kernels
// ---------------------------------------------------------------------------
namespace tmath {

Tensor matmul(const Tensor& a, const Tensor& b) {
  const int m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) throw std::invalid_argument("matmul: inner dimensions disagree");
  Tensor out({m, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      real acc = 0;
      for (int x = 0; x < k; ++x) acc += a.at(i, x) * b.at(x, j);
      out.at(i, j) = acc;
    }
  return out;
}

Tensor transpose(const Tensor& a) {
  Tensor out({a.cols(), a.rows()});
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("add: shape mismatch");
  Tensor out = a;
  for (int64_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("sub: shape mismatch");
  Tensor out = a;
  for (int64_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("mul: shape mismatch");
  Tensor out = a;
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

Tensor scale(const Tensor& a, real c) {
  Tensor out = a;
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= c;
  return out;
}

Tensor colsum(const Tensor& a) {
  Tensor out({1, a.cols()});
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out.at(0, j) += a.at(i, j);
  return out;
}

real sum(const Tensor& a) {
  real acc = 0;
  for (int64_t i = 0; i < a.size(); ++i) acc += a[i];
  return acc;
}

real stable_sigmoid(real x) {
  if (x >= 0) {
    const real e = std::exp(-x);
    return real(1) / (real(1) + e);
  }
  const real e = std::exp(x);
  return e / (real(1) + e);
}

real stable_softplus(real x) {
  // max(x,0) + log1p(exp(-|x|)); exact and overflow-free
  const real m = x > 0 ? x : real(0);
  return m + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace tmath

// ---------------------------------------------------------------------------
// Differentiable ops
// ---------------------------------------------------------------------------

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw std::invalid_argument("op: unbound Var");
  return *a.tape;
}

Tape& same_tape(Var a, Var b) {
  Tape& t = tape_of(a);
  if (b.tape != &t) throw std::invalid_argument("op: operands on different tapes");
  return t;
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  Tensor out = tmath::matmul(a.val(), b.val());
  const int ai = a.id, bi = b.id;
  return t.emplace("matmul", std::move(out), {a, b}, [ai, bi](Tape& tp, const Tensor& g) {
    tp.accumulate(ai, tmath::matmul(g, tmath::transpose(tp.value(bi))));
    tp.accumulate(bi, tmath::matmul(tmath::transpose(tp.value(ai)), g));
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const int ai = a.id;
  return t.emplace("transpose", tmath::transpose(a.val()), {a},
                   [ai](Tape& tp, const Tensor& g) { tp.accumulate(ai, tmath::transpose(g)); });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const int ai = a.id, bi = b.id;
  return t.emplace("add", tmath::add(a.val(), b.val()), {a, b},
                   [ai, bi](Tape& tp, const Tensor& g) {
                     tp.accumulate(ai, g);
                     tp.accumulate(bi, g);
                   });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const int ai = a.id, bi = b.id;
  return t.emplace("sub", tmath::sub(a.val(), b.val()), {a, b},
                   [ai, bi](Tape& tp, const Tensor& g) {
                     tp.accumulate(ai, g);
                     tp.accumulate(bi, tmath::scale(g, real(-1)));
                   });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const int ai = a.id, bi = b.id;
  return t.emplace("mul", tmath::mul(a.val(), b.val()), {a, b},
                   [ai, bi](Tape& tp, const Tensor& g) {
                     tp.accumulate(ai, tmath::mul(g, tp.value(bi)));
                     tp.accumulate(bi, tmath::mul(g, tp.value(ai)));
                   });
}

Var div(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  if (!av.same_shape(bv)) throw std::invalid_argument("div: shape mismatch");
  Tensor out = av;
  for (int64_t i = 0; i < out.size(); ++i) out[i] /= bv[i];
  const int ai = a.id, bi = b.id;
  return t.emplace("div", std::move(out), {a, b}, [ai, bi](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value(ai);
    const Tensor& y = tp.value(bi);
    Tensor ga = g, gb = g;
    for (int64_t i = 0; i < g.size(); ++i) {
      ga[i] = g[i] / y[i];
      gb[i] = -g[i] * x[i] / (y[i] * y[i]);
    }
    tp.accumulate(ai, ga);
    tp.accumulate(bi, gb);
  });
}

Var neg(Var a) { return scale(a, real(-1)); }

Var add_rowvec(Var a, Var v) {
  Tape& t = same_tape(a, v);
  const Tensor& av = a.val();
  const Tensor& vv = v.val();
  if (vv.rows() != 1 || vv.cols() != av.cols())
    throw std::invalid_argument("add_rowvec: v must be 1 x cols(a)");
  Tensor out = av;
  for (int i = 0; i < av.rows(); ++i)
    for (int j = 0; j < av.cols(); ++j) out.at(i, j) += vv.at(0, j);
  const int ai = a.id, vi = v.id;
  return t.emplace("add_rowvec", std::move(out), {a, v}, [ai, vi](Tape& tp, const Tensor& g) {
    tp.accumulate(ai, g);
    tp.accumulate(vi, tmath::colsum(g));
  });
}

Var scale(Var a, real c) {
  Tape& t = tape_of(a);
  const int ai = a.id;
  return t.emplace("scale", tmath::scale(a.val(), c), {a},
                   [ai, c](Tape& tp, const Tensor& g) { tp.accumulate(ai, tmath::scale(g, c)); });
}

Var scale_by(Var a, Var s) {
  Tape& t = same_tape(a, s);
  if (s.val().size() != 1) throw std::invalid_argument("scale_by: s must be 1x1");
  const real sv = s.val()[0];
  Tensor out = tmath::scale(a.val(), sv);
  const int ai = a.id, si = s.id;
  return t.emplace("scale_by", std::move(out), {a, s}, [ai, si, sv](Tape& tp, const Tensor& g) {
    tp.accumulate(ai, tmath::scale(g, sv));
    const Tensor& av = tp.value(ai);
    real ds = 0;
    for (int64_t i = 0; i < g.size(); ++i) ds += g[i] * av[i];
    tp.accumulate(si, Tensor::scalar(ds));
  });
}

namespace {

// Shared scaffolding for elementwise unary ops: fn computes the value,
// dfn the local derivative from (x, y).
template <class Fn, class Dfn>
Var unary_op(const char* name, Var a, Fn fn, Dfn dfn) {
  Tape& t = tape_of(a);
  const Tensor& av = a.val();
  Tensor out = av;
  for (int64_t i = 0; i < out.size(); ++i) out[i] = fn(av[i]);
  const int ai = a.id, self = static_cast<int>(t.size());
  return t.emplace(name, std::move(out), {a}, [ai, self, dfn](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value(ai);
    const Tensor& y = tp.value(self);
    Tensor ga = g;
    for (int64_t i = 0; i < g.size(); ++i) ga[i] = g[i] * dfn(x[i], y[i]);
    tp.accumulate(ai, ga);
  });
}

}  // namespace

Var exp_op(Var a) {
  return unary_op("exp", a, [](real x) { return std::exp(x); },
                  [](real, real y) { return y; });
}

Var log_op(Var a) {
  return unary_op("log", a, [](real x) { return std::log(x); },
                  [](real x, real) { return real(1) / x; });
}

Var sigmoid(Var a) {
  return unary_op("sigmoid", a, [](real x) { return tmath::stable_sigmoid(x); },
                  [](real, real y) { return y * (real(1) - y); });
}

Var relu(Var a) {
  return unary_op("relu", a, [](real x) { return x > 0 ? x : real(0); },
                  [](real x, real) { return x > 0 ? real(1) : real(0); });
}

Var softplus(Var a) {
  return unary_op("softplus", a, [](real x) { return tmath::stable_softplus(x); },
                  [](real x, real) { return tmath::stable_sigmoid(x); });
}

Var clamp(Var a, real lo, real hi) {
  if (lo > hi) throw std::invalid_argument("clamp: lo > hi");
  return unary_op("clamp", a,
                  [lo, hi](real x) { return x < lo ? lo : (x > hi ? hi : x); },
                  [lo, hi](real x, real) { return (x >= lo && x <= hi) ? real(1) : real(0); });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  const int ai = a.id;
  return t.emplace("sum", Tensor::scalar(tmath::sum(a.val())), {a},
                   [ai](Tape& tp, const Tensor& g) {
                     tp.accumulate(ai, Tensor::full(tp.value(ai).shape(), g[0]));
                   });
}

Var mean(Var a) {
  const int64_t n = a.val().size();
  return scale(sum(a), real(1) / static_cast<real>(n));
}

Var softmax_rows(Var x) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.val();
  const int m = xv.rows(), n = xv.cols();
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    real mx = xv.at(i, 0);
    for (int j = 1; j < n; ++j) mx = std::max(mx, xv.at(i, j));
    real denom = 0;
    for (int j = 0; j < n; ++j) {
      const real e = std::exp(xv.at(i, j) - mx);
      out.at(i, j) = e;
      denom += e;
    }
    for (int j = 0; j < n; ++j) out.at(i, j) /= denom;
  }
  const int xi = x.id, self = static_cast<int>(t.size());
  return t.emplace("softmax_rows", std::move(out), {x}, [xi, self](Tape& tp, const Tensor& g) {
    const Tensor& y = tp.value(self);
    Tensor gx = g;
    for (int i = 0; i < y.rows(); ++i) {
      real dot = 0;
      for (int j = 0; j < y.cols(); ++j) dot += g.at(i, j) * y.at(i, j);
      for (int j = 0; j < y.cols(); ++j) gx.at(i, j) = y.at(i, j) * (g.at(i, j) - dot);
    }
    tp.accumulate(xi, gx);
  });
}

Var layer_norm(Var x, Var gain, Var bias, real eps) {
  Tape& t = tape_of(x);
  if (gain.tape != &t || bias.tape != &t)
    throw std::invalid_argument("layer_norm: operands on different tapes");
  const Tensor& xv = x.val();
  const Tensor& gv = gain.val();
  const Tensor& bv = bias.val();
  const int m = xv.rows(), d = xv.cols();
  if (gv.rows() != 1 || gv.cols() != d || bv.rows() != 1 || bv.cols() != d)
    throw std::invalid_argument("layer_norm: gain/bias must be 1 x d");
  if (d < 1) throw std::invalid_argument("layer_norm: d >= 1 required");

  Tensor y({m, d}), xhat({m, d}), inv_sigma({m, 1});
  for (int i = 0; i < m; ++i) {
    real mu = 0;
    for (int j = 0; j < d; ++j) mu += xv.at(i, j);
    mu /= d;
    real var = 0;
    for (int j = 0; j < d; ++j) {
      const real c = xv.at(i, j) - mu;
      var += c * c;
    }
    var /= d;
    const real is = real(1) / std::sqrt(var + eps);
    inv_sigma.at(i, 0) = is;
    for (int j = 0; j < d; ++j) {
      xhat.at(i, j) = (xv.at(i, j) - mu) * is;
      y.at(i, j) = gv.at(0, j) * xhat.at(i, j) + bv.at(0, j);
    }
  }
  const int xi = x.id, gi = gain.id, bi = bias.id;
  return t.emplace(
      "layer_norm", std::move(y), {x, gain, bias},
      [xi, gi, bi, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](
          Tape& tp, const Tensor& g) {
        const Tensor& gv = tp.value(gi);
        const int m = g.rows(), d = g.cols();
        Tensor gx({m, d}), ggain({1, d}), gbias({1, d});
        for (int i = 0; i < m; ++i) {
          // ghat = gain .* g; dx = (ghat - mean(ghat) - xhat*mean(ghat.*xhat)) / sigma
          real mean_gh = 0, mean_ghx = 0;
          for (int j = 0; j < d; ++j) {
            const real gh = gv.at(0, j) * g.at(i, j);
            mean_gh += gh;
            mean_ghx += gh * xhat.at(i, j);
          }
          mean_gh /= d;
          mean_ghx /= d;
          const real is = inv_sigma.at(i, 0);
          for (int j = 0; j < d; ++j) {
            const real gh = gv.at(0, j) * g.at(i, j);
            gx.at(i, j) = (gh - mean_gh - xhat.at(i, j) * mean_ghx) * is;
            ggain.at(0, j) += g.at(i, j) * xhat.at(i, j);
            gbias.at(0, j) += g.at(i, j);
          }
        }
        tp.accumulate(xi, gx);
        tp.accumulate(gi, ggain);
        tp.accumulate(bi, gbias);
      });
}

Var slice_cols(Var a, int c0, int c1) {
  Tape& t = tape_of(a);
  const Tensor& av = a.val();
  const int m = av.rows(), n = av.cols();
  if (c0 < 0 || c1 > n || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
  Tensor out({m, c1 - c0});
  for (int i = 0; i < m; ++i)
    for (int j = c0; j < c1; ++j) out.at(i, j - c0) = av.at(i, j);
  const int ai = a.id;
  return t.emplace("slice_cols", std::move(out), {a}, [ai, c0, n](Tape& tp, const Tensor& g) {
    Tensor ga({g.rows(), n});
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) ga.at(i, j + c0) = g.at(i, j);
    tp.accumulate(ai, ga);
  });
}

Var slice_rows(Var a, int r0, int r1) {
  Tape& t = tape_of(a);
  const Tensor& av = a.val();
  const int m = av.rows(), n = av.cols();
  if (r0 < 0 || r1 > m || r0 >= r1) throw std::invalid_argument("slice_rows: bad range");
  Tensor out({r1 - r0, n});
  for (int i = r0; i < r1; ++i)
    for (int j = 0; j < n; ++j) out.at(i - r0, j) = av.at(i, j);
  const int ai = a.id;
  return t.emplace("slice_rows", std::move(out), {a}, [ai, r0, m](Tape& tp, const Tensor& g) {
    Tensor ga({m, g.cols()});
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) ga.at(i + r0, j) = g.at(i, j);
    tp.accumulate(ai, ga);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  Tape& t = tape_of(parts[0]);
  const int m = parts[0].val().rows();
  int n = 0;
  for (const Var& p : parts) {
    if (p.tape != &t) throw std::invalid_argument("concat_cols: different tapes");
    if (p.val().rows() != m) throw std::invalid_argument("concat_cols: row mismatch");
    n += p.val().cols();
  }
  Tensor out({m, n});
  std::vector<int> ids, offs;
  int off = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.val();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < pv.cols(); ++j) out.at(i, off + j) = pv.at(i, j);
    ids.push_back(p.id);
    offs.push_back(off);
    off += pv.cols();
  }
  return t.emplace("concat_cols", std::move(out), parts,
                   [ids, offs](Tape& tp, const Tensor& g) {
                     for (size_t k = 0; k < ids.size(); ++k) {
                       const Tensor& pv = tp.value(ids[k]);
                       Tensor gp({pv.rows(), pv.cols()});
                       for (int i = 0; i < pv.rows(); ++i)
                         for (int j = 0; j < pv.cols(); ++j) gp.at(i, j) = g.at(i, offs[k] + j);
                       tp.accumulate(ids[k], gp);
                     }
                   });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  Tape& t = tape_of(parts[0]);
  const int n = parts[0].val().cols();
  int m = 0;
  for (const Var& p : parts) {
    if (p.tape != &t) throw std::invalid_argument("concat_rows: different tapes");
    if (p.val().cols() != n) throw std::invalid_argument("concat_rows: col mismatch");
    m += p.val().rows();
  }
  Tensor out({m, n});
  std::vector<int> ids, offs;
  int off = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.val();
    for (int i = 0; i < pv.rows(); ++i)
      for (int j = 0; j < n; ++j) out.at(off + i, j) = pv.at(i, j);
    ids.push_back(p.id);
    offs.push_back(off);
    off += pv.rows();
  }
  return t.emplace("concat_rows", std::move(out), parts,
                   [ids, offs](Tape& tp, const Tensor& g) {
                     for (size_t k = 0; k < ids.size(); ++k) {
                       const Tensor& pv = tp.value(ids[k]);
                       Tensor gp({pv.rows(), pv.cols()});
                       for (int i = 0; i < pv.rows(); ++i)
                         for (int j = 0; j < pv.cols(); ++j) gp.at(i, j) = g.at(offs[k] + i, j);
                       tp.accumulate(ids[k], gp);
                     }
                   });
}

Var gather_rows(Var a, std::vector<int> idx) {
  Tape& t = tape_of(a);
  const Tensor& av = a.val();
  const int m = av.rows(), n = av.cols();
  Tensor out({static_cast<int>(idx.size()), n});
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= m) throw std::out_of_range("gather_rows: index out of range");
    for (int j = 0; j < n; ++j) out.at(static_cast<int>(i), j) = av.at(idx[i], j);
  }
  const int ai = a.id;
  return t.emplace("gather_rows", std::move(out), {a},
                   [ai, idx = std::move(idx), m](Tape& tp, const Tensor& g) {
                     Tensor ga({m, g.cols()});
                     for (size_t i = 0; i < idx.size(); ++i)
                       for (int j = 0; j < g.cols(); ++j)
                         ga.at(idx[i], j) += g.at(static_cast<int>(i), j);
                     tp.accumulate(ai, ga);
                   });
}

Var colmax(Var a) {
  Tape& t = tape_of(a);
  const Tensor& av = a.val();
  const int m = av.rows(), n = av.cols();
  Tensor out({1, n});
  std::vector<int> arg(static_cast<size_t>(n), 0);
  for (int j = 0; j < n; ++j) {
    real best = av.at(0, j);
    for (int i = 1; i < m; ++i)
      if (av.at(i, j) > best) {
        best = av.at(i, j);
        arg[static_cast<size_t>(j)] = i;
      }
    out.at(0, j) = best;
  }
  const int ai = a.id;
  return t.emplace("colmax", std::move(out), {a},
                   [ai, arg = std::move(arg), m](Tape& tp, const Tensor& g) {
                     Tensor ga({m, g.cols()});
                     for (int j = 0; j < g.cols(); ++j)
                       ga.at(arg[static_cast<size_t>(j)], j) = g.at(0, j);
                     tp.accumulate(ai, ga);
                   });
}

namespace {

Var min_or_max(const char* name, Var a, Var b, bool take_max) {
  Tape& t = same_tape(a, b);
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  if (!av.same_shape(bv)) throw std::invalid_argument("minimum/maximum: shape mismatch");
  Tensor out = av;
  for (int64_t i = 0; i < out.size(); ++i)
    out[i] = take_max ? (bv[i] > av[i] ? bv[i] : av[i]) : (bv[i] < av[i] ? bv[i] : av[i]);
  const int ai = a.id, bi = b.id;
  return t.emplace(name, std::move(out), {a, b},
                   [ai, bi, take_max](Tape& tp, const Tensor& g) {
                     const Tensor& x = tp.value(ai);
                     const Tensor& y = tp.value(bi);
                     Tensor ga = g, gb = g;
                     for (int64_t i = 0; i < g.size(); ++i) {
                       const bool b_wins = take_max ? (y[i] > x[i]) : (y[i] < x[i]);
                       ga[i] = b_wins ? real(0) : g[i];
                       gb[i] = b_wins ? g[i] : real(0);
                     }
                     tp.accumulate(ai, ga);
                     tp.accumulate(bi, gb);
                   });
}

}  // namespace

Var minimum(Var a, Var b) { return min_or_max("minimum", a, b, false); }
Var maximum(Var a, Var b) { return min_or_max("maximum", a, b, true); }

}  // namespace pcxd
