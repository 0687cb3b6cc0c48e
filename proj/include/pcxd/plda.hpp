// SPDX-License-Identifier: Apache-2.0
//
// Point-level differential attention: one visual-queried and one
// text-queried differential attention pass over the high-level features,
// plus the index-map upsampling that fuses the attended features back into
// the full-resolution visual stream, and the pooled-text Max block.

#pragma once

#include "pcxd/diffattn.hpp"
#include "pcxd/tensor.hpp"

namespace pcxd {

enum class AttnKind { differential, standard };

struct PldaParams {
  DiffAttnParams v2t;  // visual queries attending to text
  DiffAttnParams t2v;  // text queries attending to visual
};

PldaParams make_plda_params(int d_sem, int n_heads, SplitMix64& rng, bool head_ln = true);

struct PldaVars {
  DiffAttnVars v2t, t2v;
};

PldaVars lift(Tape& tape, const PldaParams& p, bool requires_grad);

struct PldaOutput {
  Var k_v2t;  // n_sem x d_sem, visual-queried text-attended features
  Var k_t2v;  // l_t x d_sem, text-queried visual-attended features
  AttnTrace trace_v2t, trace_t2v;
};

// The two directions use independent parameter sets.
PldaOutput plda_forward(Var f_v4, Var f_t, const PldaVars& p,
                        AttnKind kind = AttnKind::differential);

// Upsampling projections. d_mid/d_out both default to the model width; they
// are kept separate so concatenation-preserving configurations exist.
struct FusionParams {
  Tensor proj3, bias3;  // (d_sem + d3) x d_mid
  Tensor proj2, bias2;  // (d_mid + d2) x d_out
  Tensor pool_proj, pool_bias;  // d_sem x d_out Max-block projection
};

FusionParams make_fusion_params(int d_sem, int d3, int d2, int d_mod, SplitMix64& rng);

struct FusionVars {
  Var proj3, bias3, proj2, bias2, pool_proj, pool_bias;
};

FusionVars lift(Tape& tape, const FusionParams& p, bool requires_grad);

// Nearest-parent index gather at each scale: map3 routes every row of the
// n3-scale to a k_v2t row, map2 routes every full-resolution point to an
// n3-scale row. Concatenate with the scale's own features, then project.
Var fuse_multiscale(Var k_v2t, Var f_v3, Var f_v2, const std::vector<int>& map3,
                    const std::vector<int>& map2, const FusionVars& fp);

// Table-style Max block source switch.
enum class MaxBlockSource { fv4, kt2v, ft, kv2t };

MaxBlockSource max_block_source_from_string(const std::string& s);
std::string to_string(MaxBlockSource s);

// Column-wise max over tokens followed by a linear projection; 1 x d_out.
Var max_pool_text(Var tokens, const FusionVars& fp);

}  // namespace pcxd
