// SPDX-License-Identifier: Apache-2.0
//
// Cluster-level differential attention. Spatial relation modeling first:
// FPS centroids, centroid-KNN clusters, a shared pointwise MLP over
// centroid-relative coordinates, EdgeConv over the centroid graph, and a
// linear centroid projection. Two LDA filter-then-enhance branches then fold
// the relation features into the visual and text streams.
//
// Cluster selection is discrete; coordinates are treated as constants inside
// SRM, so no gradient flows through FPS/KNN.

#pragma once

#include <vector>

#include "pcxd/diffattn.hpp"
#include "pcxd/plda.hpp"
#include "pcxd/tensor.hpp"

namespace pcxd {

// Greedy farthest point sampling over n x 3 coordinates. Ties break toward
// the lower index; `start` is the first selected index.
std::vector<int> fps(const Tensor& points, int m, int start = 0);

struct ClusterAssignment {
  std::vector<int> centroid_indices;      // N_clust
  std::vector<std::vector<int>> members;  // N_clust lists of exactly S_clust
  Tensor centroids;                       // N_clust x 3
};

// Per centroid, the S_clust nearest points (ties toward the lower index).
// Duplication across clusters is permitted.
ClusterAssignment knn_partition(const Tensor& points, const std::vector<int>& centroid_indices,
                                int s_clust);

struct SrmParams {
  int d_mod = 0;
  Tensor intra_w1, intra_b1;  // 3 -> d_mod/2
  Tensor intra_w2, intra_b2;  // d_mod/2 -> d_mod
  Tensor edge_w, edge_b;      // 2*d_mod -> d_mod
  Tensor w_o, b_o;            // 3 -> d_mod
};

SrmParams make_srm_params(int d_mod, SplitMix64& rng);

struct SrmVars {
  Var intra_w1, intra_b1, intra_w2, intra_b2;
  Var edge_w, edge_b;
  Var w_o, b_o;
  int d_mod = 0;
};

SrmVars lift(Tape& tape, const SrmParams& p, bool requires_grad);

// Centroid-relative coordinates through the shared two-layer MLP, max-pooled
// per cluster. Output: N_clust x d_mod.
Var intra_encoder(Tape& tape, const Tensor& points, const ClusterAssignment& assign,
                  const SrmVars& p);

// EdgeConv over the kNN centroid graph: edge feature [f_i ; f_j - f_i]
// through a shared MLP, max over neighbors.
Var edgeconv(Tape& tape, Var f_irel, const Tensor& centroids, int k_graph, const SrmVars& p);

// F_ctr = O * W_o + b_o.
Var centroid_project(Tape& tape, const Tensor& centroids, const SrmVars& p);

struct SrmOutput {
  Var f_irel;  // N_clust x d_mod
  Var f_orel;  // N_clust x d_mod
  Var f_ctr;   // N_clust x d_mod
  ClusterAssignment assign;
};

SrmOutput srm_forward(Tape& tape, const Tensor& xyz, int n_clust, int k_graph,
                      const SrmVars& p, int fps_start = 0);

// ---------------------------------------------------------------------------
// LDA block: differential filtering then self-attention refinement. The text
// branch adds the filtered features directly (no MLP on the residual).
// ---------------------------------------------------------------------------
struct LdaParams {
  DiffAttnParams diff;
  bool has_mlp = true;
  Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;  // d_mod -> d_mod -> d_mod
  SelfAttnParams sa;
};

LdaParams make_lda_params(int d_mod, int n_heads, bool with_mlp, SplitMix64& rng);

struct LdaVars {
  DiffAttnVars diff;
  bool has_mlp = true;
  Var mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  SelfAttnVars sa;
};

LdaVars lift(Tape& tape, const LdaParams& p, bool requires_grad);

Var lda_block(Var query_feats, Var kv_feats, const LdaVars& p,
              AttnKind kind = AttnKind::differential, AttnTrace* trace = nullptr);

// ---------------------------------------------------------------------------
// Full CLDA pass
// ---------------------------------------------------------------------------
struct CldaParams {
  int n_clust = 8;
  int k_graph = 8;
  SrmParams srm;
  LdaParams lda_v;  // visual branch, MLP residual
  LdaParams lda_t;  // text branch, direct residual
  Tensor ln_v_gain, ln_v_bias, ln_t_gain, ln_t_bias;  // 1 x d_mod
};

CldaParams make_clda_params(int d_mod, int n_heads, int n_clust, int k_graph,
                            SplitMix64& rng);

struct CldaVars {
  int n_clust = 8;
  int k_graph = 8;
  SrmVars srm;
  LdaVars lda_v, lda_t;
  Var ln_v_gain, ln_v_bias, ln_t_gain, ln_t_bias;
};

CldaVars lift(Tape& tape, const CldaParams& p, bool requires_grad);

struct CldaOutput {
  Var f_v;  // n_p x d_mod
  Var f_t;  // l_t x d_mod
  SrmOutput srm;
};

CldaOutput clda_forward(Var f_v, Var f_t, const Tensor& xyz, const CldaVars& p,
                        AttnKind kind = AttnKind::differential, int fps_start = 0);

}  // namespace pcxd
