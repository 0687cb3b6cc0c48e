// SPDX-License-Identifier: Apache-2.0

#include "pcxd/plda.hpp"

namespace pcxd {

PldaParams make_plda_params(int d_sem, int n_heads, SplitMix64& rng, bool head_ln) {
  PldaParams p;
  p.v2t = make_diffattn_params(d_sem, n_heads, rng, head_ln);
  p.t2v = make_diffattn_params(d_sem, n_heads, rng, head_ln);
  return p;
}

PldaVars lift(Tape& tape, const PldaParams& p, bool requires_grad) {
  return {lift(tape, p.v2t, requires_grad), lift(tape, p.t2v, requires_grad)};
}

PldaOutput plda_forward(Var f_v4, Var f_t, const PldaVars& p, AttnKind kind) {
  if (f_v4.cols() != f_t.cols())
    throw std::invalid_argument("plda_forward: visual and text widths differ");
  PldaOutput out;
  if (kind == AttnKind::differential) {
    out.k_v2t = diff_attention(f_v4, f_t, p.v2t, &out.trace_v2t);
    out.k_t2v = diff_attention(f_t, f_v4, p.t2v, &out.trace_t2v);
  } else {
    out.k_v2t = standard_attention(f_v4, f_t, p.v2t, &out.trace_v2t);
    out.k_t2v = standard_attention(f_t, f_v4, p.t2v, &out.trace_t2v);
  }
  return out;
}

FusionParams make_fusion_params(int d_sem, int d3, int d2, int d_mod, SplitMix64& rng) {
  FusionParams p;
  p.proj3 = init_linear(d_sem + d3, d_mod, rng);
  p.bias3 = Tensor::zeros({1, d_mod});
  p.proj2 = init_linear(d_mod + d2, d_mod, rng);
  p.bias2 = Tensor::zeros({1, d_mod});
  p.pool_proj = init_linear(d_sem, d_mod, rng);
  p.pool_bias = Tensor::zeros({1, d_mod});
  return p;
}

FusionVars lift(Tape& tape, const FusionParams& p, bool requires_grad) {
  FusionVars v;
  v.proj3 = tape.leaf(p.proj3, requires_grad);
  v.bias3 = tape.leaf(p.bias3, requires_grad);
  v.proj2 = tape.leaf(p.proj2, requires_grad);
  v.bias2 = tape.leaf(p.bias2, requires_grad);
  v.pool_proj = tape.leaf(p.pool_proj, requires_grad);
  v.pool_bias = tape.leaf(p.pool_bias, requires_grad);
  return v;
}

Var fuse_multiscale(Var k_v2t, Var f_v3, Var f_v2, const std::vector<int>& map3,
                    const std::vector<int>& map2, const FusionVars& fp) {
  if (static_cast<int>(map3.size()) != f_v3.rows())
    throw std::invalid_argument("fuse_multiscale: map3 must route every n3 row");
  if (static_cast<int>(map2.size()) != f_v2.rows())
    throw std::invalid_argument("fuse_multiscale: map2 must route every point");
  Var up3 = gather_rows(k_v2t, map3);
  Var h3 = add_rowvec(matmul(concat_cols({up3, f_v3}), fp.proj3), fp.bias3);
  Var up2 = gather_rows(h3, map2);
  return add_rowvec(matmul(concat_cols({up2, f_v2}), fp.proj2), fp.bias2);
}

MaxBlockSource max_block_source_from_string(const std::string& s) {
  if (s == "fv4") return MaxBlockSource::fv4;
  if (s == "kt2v") return MaxBlockSource::kt2v;
  if (s == "ft") return MaxBlockSource::ft;
  if (s == "kv2t") return MaxBlockSource::kv2t;
  throw std::invalid_argument("max_block_source: expected fv4|kt2v|ft|kv2t, got " + s);
}

std::string to_string(MaxBlockSource s) {
  switch (s) {
    case MaxBlockSource::fv4: return "fv4";
    case MaxBlockSource::kt2v: return "kt2v";
    case MaxBlockSource::ft: return "ft";
    case MaxBlockSource::kv2t: return "kv2t";
  }
  return "?";
}

Var max_pool_text(Var tokens, const FusionVars& fp) {
  if (tokens.rows() < 1) throw std::invalid_argument("max_pool_text: empty token list");
  return add_rowvec(matmul(colmax(tokens), fp.pool_proj), fp.pool_bias);
}

}  // namespace pcxd
