// SPDX-License-Identifier: Apache-2.0

#include "pcxd/diffattn.hpp"

#include <cmath>

namespace pcxd {

int64_t DiffAttnParams::param_count() const {
  int64_t n = 0;
  n += 4 * static_cast<int64_t>(d_model) * d_model;               // W_Q/K/V/O
  n += 4 * static_cast<int64_t>(n_heads) * d_head();              // lambda vectors
  n += 2 * static_cast<int64_t>(n_heads) * 2 * d_head();          // LN gain/bias
  return n;
}

DiffAttnParams make_diffattn_params(int d_model, int n_heads, SplitMix64& rng, bool head_ln) {
  if (n_heads <= 0 || d_model % (2 * n_heads) != 0)
    throw std::invalid_argument("diffattn: d_model must be divisible by 2*n_heads");
  DiffAttnParams p;
  p.d_model = d_model;
  p.n_heads = n_heads;
  p.head_ln = head_ln;
  const int dh = p.d_head();
  p.w_q = init_linear(d_model, d_model, rng);
  p.w_k = init_linear(d_model, d_model, rng);
  p.w_v = init_linear(d_model, d_model, rng);
  p.w_o = init_linear(d_model, d_model, rng);
  p.lambda_q1 = randn({n_heads, dh}, rng, real(0.1));
  p.lambda_k1 = randn({n_heads, dh}, rng, real(0.1));
  p.lambda_q2 = randn({n_heads, dh}, rng, real(0.1));
  p.lambda_k2 = randn({n_heads, dh}, rng, real(0.1));
  p.ln_gain = Tensor::full({n_heads, 2 * dh}, real(1));
  p.ln_bias = Tensor::zeros({n_heads, 2 * dh});
  return p;
}

DiffAttnVars lift(Tape& tape, const DiffAttnParams& p, bool requires_grad) {
  DiffAttnVars v;
  v.d_model = p.d_model;
  v.n_heads = p.n_heads;
  v.head_ln = p.head_ln;
  v.w_q = tape.leaf(p.w_q, requires_grad);
  v.w_k = tape.leaf(p.w_k, requires_grad);
  v.w_v = tape.leaf(p.w_v, requires_grad);
  v.w_o = tape.leaf(p.w_o, requires_grad);
  v.lambda_q1 = tape.leaf(p.lambda_q1, requires_grad);
  v.lambda_k1 = tape.leaf(p.lambda_k1, requires_grad);
  v.lambda_q2 = tape.leaf(p.lambda_q2, requires_grad);
  v.lambda_k2 = tape.leaf(p.lambda_k2, requires_grad);
  v.ln_gain = tape.leaf(p.ln_gain, requires_grad);
  v.ln_bias = tape.leaf(p.ln_bias, requires_grad);
  return v;
}

QkvProjection project_qkv(Var query_src, Var kv_src, const DiffAttnVars& p) {
  if (query_src.cols() != p.d_model || kv_src.cols() != p.d_model)
    throw std::invalid_argument("project_qkv: width mismatch with d_model");
  return {matmul(query_src, p.w_q), matmul(kv_src, p.w_k), matmul(kv_src, p.w_v)};
}

HeadSplit split_heads(Var q, Var k, Var v, const DiffAttnVars& p) {
  const int dh = p.d_head();
  if (p.d_model != 2 * p.n_heads * dh)
    throw std::invalid_argument("split_heads: d_model not divisible by 2*n_heads");
  HeadSplit hs;
  for (int h = 0; h < p.n_heads; ++h) {
    const int c1 = 2 * h * dh, c2 = (2 * h + 1) * dh;
    hs.q1.push_back(slice_cols(q, c1, c1 + dh));
    hs.q2.push_back(slice_cols(q, c2, c2 + dh));
    hs.k1.push_back(slice_cols(k, c1, c1 + dh));
    hs.k2.push_back(slice_cols(k, c2, c2 + dh));
    hs.v.push_back(slice_cols(v, h * 2 * dh, (h + 1) * 2 * dh));
  }
  return hs;
}

Var lambda_value(const DiffAttnVars& p) {
  std::vector<Var> per_head;
  per_head.reserve(static_cast<size_t>(p.n_heads));
  for (int h = 0; h < p.n_heads; ++h) {
    Var lq1 = slice_rows(p.lambda_q1, h, h + 1);
    Var lk1 = slice_rows(p.lambda_k1, h, h + 1);
    Var lq2 = slice_rows(p.lambda_q2, h, h + 1);
    Var lk2 = slice_rows(p.lambda_k2, h, h + 1);
    Var e1 = exp_op(clamp(sum(mul(lq1, lk1)), real(-50), real(50)));
    Var e2 = exp_op(clamp(sum(mul(lq2, lk2)), real(-50), real(50)));
    per_head.push_back(sub(e1, e2));
  }
  return concat_cols(per_head);  // 1 x n_heads
}

namespace {

// Shared head loop; `differential` toggles the A_2 subtraction so the
// standard-attention reference stays in one place.
Var attention_impl(Var query_src, Var kv_src, const DiffAttnVars& p, AttnTrace* trace,
                   bool differential) {
  if (query_src.cols() != p.d_model || kv_src.cols() != p.d_model)
    throw std::invalid_argument("diff_attention: inputs must share d_model");
  const int dh = p.d_head();
  const real inv_sqrt_dh = real(1) / std::sqrt(static_cast<real>(dh));

  QkvProjection qkv = project_qkv(query_src, kv_src, p);
  HeadSplit hs = split_heads(qkv.q, qkv.k, qkv.v, p);
  Var lam = differential ? lambda_value(p) : Var{};

  if (trace) {
    trace->a1.clear();
    trace->a2.clear();
    trace->head_pre_ln.clear();
    trace->lambda_value = differential ? lam.val() : Tensor::zeros({1, p.n_heads});
  }

  std::vector<Var> head_outs;
  head_outs.reserve(static_cast<size_t>(p.n_heads));
  for (int h = 0; h < p.n_heads; ++h) {
    Var a1 = softmax_rows(scale(matmul(hs.q1[h], transpose(hs.k1[h])), inv_sqrt_dh));
    Var head;
    if (differential) {
      Var a2 = softmax_rows(scale(matmul(hs.q2[h], transpose(hs.k2[h])), inv_sqrt_dh));
      Var lam_h = slice_cols(lam, h, h + 1);
      Var kernel = sub(a1, scale_by(a2, lam_h));
      head = matmul(kernel, hs.v[h]);
      if (trace) {
        trace->a1.push_back(a1.val());
        trace->a2.push_back(a2.val());
      }
    } else {
      head = matmul(a1, hs.v[h]);
      if (trace) {
        trace->a1.push_back(a1.val());
        trace->a2.push_back(a1.val());
      }
    }
    if (trace) trace->head_pre_ln.push_back(head.val());
    if (p.head_ln) {
      Var gain = slice_rows(p.ln_gain, h, h + 1);
      Var bias = slice_rows(p.ln_bias, h, h + 1);
      head = layer_norm(head, gain, bias);
    }
    head_outs.push_back(head);
  }
  Var cat = concat_cols(head_outs);
  if (!p.head_ln) {
    // one LN over the concatenated d_model channels, params flattened
    Var gain = concat_cols([&] {
      std::vector<Var> gs;
      for (int h = 0; h < p.n_heads; ++h) gs.push_back(slice_rows(p.ln_gain, h, h + 1));
      return gs;
    }());
    Var bias = concat_cols([&] {
      std::vector<Var> bs;
      for (int h = 0; h < p.n_heads; ++h) bs.push_back(slice_rows(p.ln_bias, h, h + 1));
      return bs;
    }());
    cat = layer_norm(cat, gain, bias);
  }
  return matmul(cat, p.w_o);
}

}  // namespace

Var diff_attention(Var query_src, Var kv_src, const DiffAttnVars& p, AttnTrace* trace) {
  return attention_impl(query_src, kv_src, p, trace, true);
}

Var standard_attention(Var query_src, Var kv_src, const DiffAttnVars& p, AttnTrace* trace) {
  return attention_impl(query_src, kv_src, p, trace, false);
}

// ---------------------------------------------------------------------------
// Plain multi-head self-attention
// ---------------------------------------------------------------------------

SelfAttnParams make_selfattn_params(int d_model, int n_heads, SplitMix64& rng) {
  if (n_heads <= 0 || d_model % n_heads != 0)
    throw std::invalid_argument("selfattn: d_model must be divisible by n_heads");
  SelfAttnParams p;
  p.d_model = d_model;
  p.n_heads = n_heads;
  p.w_q = init_linear(d_model, d_model, rng);
  p.w_k = init_linear(d_model, d_model, rng);
  p.w_v = init_linear(d_model, d_model, rng);
  p.w_o = init_linear(d_model, d_model, rng);
  return p;
}

SelfAttnVars lift(Tape& tape, const SelfAttnParams& p, bool requires_grad) {
  SelfAttnVars v;
  v.d_model = p.d_model;
  v.n_heads = p.n_heads;
  v.w_q = tape.leaf(p.w_q, requires_grad);
  v.w_k = tape.leaf(p.w_k, requires_grad);
  v.w_v = tape.leaf(p.w_v, requires_grad);
  v.w_o = tape.leaf(p.w_o, requires_grad);
  return v;
}

Var self_attention(Var x, const SelfAttnVars& p) {
  if (x.cols() != p.d_model) throw std::invalid_argument("self_attention: width mismatch");
  const int dh = p.d_model / p.n_heads;
  const real inv_sqrt_dh = real(1) / std::sqrt(static_cast<real>(dh));
  Var q = matmul(x, p.w_q), k = matmul(x, p.w_k), v = matmul(x, p.w_v);
  std::vector<Var> heads;
  heads.reserve(static_cast<size_t>(p.n_heads));
  for (int h = 0; h < p.n_heads; ++h) {
    Var qh = slice_cols(q, h * dh, (h + 1) * dh);
    Var kh = slice_cols(k, h * dh, (h + 1) * dh);
    Var vh = slice_cols(v, h * dh, (h + 1) * dh);
    Var a = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt_dh));
    heads.push_back(matmul(a, vh));
  }
  return matmul(concat_cols(heads), p.w_o);
}

}  // namespace pcxd
