// SPDX-License-Identifier: Apache-2.0
//
// Single-layer multi-head cross-modal differential attention. Q and K are
// split into two channels per logical head; the output is built from the
// difference of the two attention kernels, A_1 - lambda * A_2, with a
// learnable per-head lambda. The same operator backs both PLDA directions
// and the LDA filter stages.

#pragma once

#include <vector>

#include "pcxd/rng.hpp"
#include "pcxd/tensor.hpp"

namespace pcxd {

struct DiffAttnParams {
  int d_model = 0;
  int n_heads = 0;   // logical heads; d_head = d_model / (2 * n_heads)
  bool head_ln = true;  // per-head LN over 2*d_head channels vs one LN over d_model

  Tensor w_q, w_k, w_v, w_o;                              // d_model x d_model
  Tensor lambda_q1, lambda_k1, lambda_q2, lambda_k2;      // n_heads x d_head
  Tensor ln_gain, ln_bias;                                // n_heads x 2*d_head

  int d_head() const { return d_model / (2 * n_heads); }
  int64_t param_count() const;
};

// lambda vectors start near zero (N(0, 0.1)) so suppression is learned.
DiffAttnParams make_diffattn_params(int d_model, int n_heads, SplitMix64& rng,
                                    bool head_ln = true);

// Tape handles for one layer's parameters, lifted once per step.
struct DiffAttnVars {
  Var w_q, w_k, w_v, w_o;
  Var lambda_q1, lambda_k1, lambda_q2, lambda_k2;
  Var ln_gain, ln_bias;
  int d_model = 0;
  int n_heads = 0;
  bool head_ln = true;
  int d_head() const { return d_model / (2 * n_heads); }
};

DiffAttnVars lift(Tape& tape, const DiffAttnParams& p, bool requires_grad);

// Per-head diagnostics; rows of a1/a2 each sum to 1.
struct AttnTrace {
  std::vector<Tensor> a1, a2;      // n_heads entries of m x n
  Tensor lambda_value;             // 1 x n_heads
  std::vector<Tensor> head_pre_ln; // n_heads entries of m x 2*d_head
};

struct QkvProjection {
  Var q, k, v;
};

// Q = query_src * W_Q, K = kv_src * W_K, V = kv_src * W_V.
QkvProjection project_qkv(Var query_src, Var kv_src, const DiffAttnVars& p);

// Channel split: head h reads Q columns [2h*d_head, (2h+1)*d_head) as channel
// 1 and the next d_head columns as channel 2; V head h is 2*d_head wide.
struct HeadSplit {
  std::vector<Var> q1, q2, k1, k2, v;
};
HeadSplit split_heads(Var q, Var k, Var v, const DiffAttnVars& p);

// Per-head lambda = exp(sum(lq1*lk1)) - exp(sum(lq2*lk2)); the dot products
// are clamped to [-50, 50] before exp. Returns 1 x n_heads.
Var lambda_value(const DiffAttnVars& p);

Var diff_attention(Var query_src, Var kv_src, const DiffAttnVars& p,
                   AttnTrace* trace = nullptr);

// Single-channel reference: softmax attention from the (Q_1, K_1) channels
// with the same V heads, LN, and W_O. Used both as the lambda-zero comparison
// target and as the plain-attention mode of the full pipeline.
Var standard_attention(Var query_src, Var kv_src, const DiffAttnVars& p,
                       AttnTrace* trace = nullptr);

// Plain multi-head self-attention used by the LDA refinement stage.
struct SelfAttnParams {
  int d_model = 0;
  int n_heads = 0;  // full-width heads, d = d_model / n_heads
  Tensor w_q, w_k, w_v, w_o;
  int64_t param_count() const { return 4 * static_cast<int64_t>(d_model) * d_model; }
};

SelfAttnParams make_selfattn_params(int d_model, int n_heads, SplitMix64& rng);

struct SelfAttnVars {
  Var w_q, w_k, w_v, w_o;
  int d_model = 0;
  int n_heads = 0;
};

SelfAttnVars lift(Tape& tape, const SelfAttnParams& p, bool requires_grad);

Var self_attention(Var x, const SelfAttnVars& p);

}  // namespace pcxd
