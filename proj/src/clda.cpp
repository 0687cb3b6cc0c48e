// SPDX-License-Identifier: Apache-2.0

#include "pcxd/clda.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pcxd {

namespace {

real sqdist3(const Tensor& pts, int i, int j) {
  real acc = 0;
  for (int c = 0; c < 3; ++c) {
    const real d = pts.at(i, c) - pts.at(j, c);
    acc += d * d;
  }
  return acc;
}

}  // namespace

std::vector<int> fps(const Tensor& points, int m, int start) {
  const int n = points.rows();
  if (points.cols() != 3) throw std::invalid_argument("fps: points must be n x 3");
  if (m < 1 || m > n) throw std::invalid_argument("fps: need 1 <= m <= n");
  if (start < 0 || start >= n) throw std::invalid_argument("fps: start out of range");

  std::vector<int> selected;
  selected.reserve(static_cast<size_t>(m));
  std::vector<real> min_d(static_cast<size_t>(n), std::numeric_limits<real>::infinity());
  std::vector<bool> chosen(static_cast<size_t>(n), false);
  int cur = start;
  selected.push_back(cur);
  chosen[static_cast<size_t>(cur)] = true;
  for (int it = 1; it < m; ++it) {
    int best = -1;
    real best_d = -1;
    for (int i = 0; i < n; ++i) {
      const real d = sqdist3(points, i, cur);
      if (d < min_d[static_cast<size_t>(i)]) min_d[static_cast<size_t>(i)] = d;
      if (chosen[static_cast<size_t>(i)]) continue;
      // strictly-greater keeps the lowest index on ties
      if (min_d[static_cast<size_t>(i)] > best_d) {
        best_d = min_d[static_cast<size_t>(i)];
        best = i;
      }
    }
    selected.push_back(best);
    chosen[static_cast<size_t>(best)] = true;
    cur = best;
  }
  return selected;
}

ClusterAssignment knn_partition(const Tensor& points, const std::vector<int>& centroid_indices,
                                int s_clust) {
  const int n = points.rows();
  if (s_clust < 1 || s_clust > n)
    throw std::invalid_argument("knn_partition: need 1 <= S_clust <= n");
  ClusterAssignment out;
  out.centroid_indices = centroid_indices;
  out.centroids = Tensor({static_cast<int>(centroid_indices.size()), 3});
  std::vector<std::pair<real, int>> order(static_cast<size_t>(n));
  for (size_t c = 0; c < centroid_indices.size(); ++c) {
    const int ci = centroid_indices[c];
    if (ci < 0 || ci >= n) throw std::out_of_range("knn_partition: centroid index");
    for (int j = 0; j < 3; ++j) out.centroids.at(static_cast<int>(c), j) = points.at(ci, j);
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = {sqdist3(points, i, ci), i};
    std::partial_sort(order.begin(), order.begin() + s_clust, order.end());
    std::vector<int> members(static_cast<size_t>(s_clust));
    for (int i = 0; i < s_clust; ++i) members[static_cast<size_t>(i)] = order[static_cast<size_t>(i)].second;
    out.members.push_back(std::move(members));
  }
  return out;
}

SrmParams make_srm_params(int d_mod, SplitMix64& rng) {
  if (d_mod < 2 || d_mod % 2 != 0) throw std::invalid_argument("srm: d_mod must be even");
  SrmParams p;
  p.d_mod = d_mod;
  p.intra_w1 = init_linear(3, d_mod / 2, rng);
  p.intra_b1 = Tensor::zeros({1, d_mod / 2});
  p.intra_w2 = init_linear(d_mod / 2, d_mod, rng);
  p.intra_b2 = Tensor::zeros({1, d_mod});
  p.edge_w = init_linear(2 * d_mod, d_mod, rng);
  p.edge_b = Tensor::zeros({1, d_mod});
  p.w_o = init_linear(3, d_mod, rng);
  p.b_o = Tensor::zeros({1, d_mod});
  return p;
}

SrmVars lift(Tape& tape, const SrmParams& p, bool requires_grad) {
  SrmVars v;
  v.d_mod = p.d_mod;
  v.intra_w1 = tape.leaf(p.intra_w1, requires_grad);
  v.intra_b1 = tape.leaf(p.intra_b1, requires_grad);
  v.intra_w2 = tape.leaf(p.intra_w2, requires_grad);
  v.intra_b2 = tape.leaf(p.intra_b2, requires_grad);
  v.edge_w = tape.leaf(p.edge_w, requires_grad);
  v.edge_b = tape.leaf(p.edge_b, requires_grad);
  v.w_o = tape.leaf(p.w_o, requires_grad);
  v.b_o = tape.leaf(p.b_o, requires_grad);
  return v;
}

Var intra_encoder(Tape& tape, const Tensor& points, const ClusterAssignment& assign,
                  const SrmVars& p) {
  const int n_clust = static_cast<int>(assign.members.size());
  if (n_clust == 0) throw std::invalid_argument("intra_encoder: empty assignment");
  const int s_clust = static_cast<int>(assign.members[0].size());

  // one big constant of centroid-relative member coordinates
  Tensor rel({n_clust * s_clust, 3});
  for (int c = 0; c < n_clust; ++c) {
    const auto& mem = assign.members[static_cast<size_t>(c)];
    if (static_cast<int>(mem.size()) != s_clust)
      throw std::invalid_argument("intra_encoder: ragged member lists");
    for (int s = 0; s < s_clust; ++s)
      for (int j = 0; j < 3; ++j)
        rel.at(c * s_clust + s, j) = points.at(mem[static_cast<size_t>(s)], j) -
                                     assign.centroids.at(c, j);
  }
  Var x = tape.constant(std::move(rel));
  Var h = relu(add_rowvec(matmul(x, p.intra_w1), p.intra_b1));
  Var h2 = relu(add_rowvec(matmul(h, p.intra_w2), p.intra_b2));
  std::vector<Var> pooled;
  pooled.reserve(static_cast<size_t>(n_clust));
  for (int c = 0; c < n_clust; ++c)
    pooled.push_back(colmax(slice_rows(h2, c * s_clust, (c + 1) * s_clust)));
  return concat_rows(pooled);
}

Var edgeconv(Tape& tape, Var f_irel, const Tensor& centroids, int k_graph, const SrmVars& p) {
  const int n = f_irel.rows();
  if (k_graph < 1 || k_graph >= n)
    throw std::invalid_argument("edgeconv: need 1 <= k_graph < N_clust");

  // kNN over centroid coordinates, self excluded, ties toward lower index
  std::vector<int> src, nbr;
  src.reserve(static_cast<size_t>(n * k_graph));
  nbr.reserve(static_cast<size_t>(n * k_graph));
  std::vector<std::pair<real, int>> order;
  for (int i = 0; i < n; ++i) {
    order.clear();
    for (int j = 0; j < n; ++j)
      if (j != i) order.push_back({sqdist3(centroids, i, j), j});
    std::partial_sort(order.begin(), order.begin() + k_graph, order.end());
    for (int k = 0; k < k_graph; ++k) {
      src.push_back(i);
      nbr.push_back(order[static_cast<size_t>(k)].second);
    }
  }

  Var f_src = gather_rows(f_irel, src);
  Var f_nbr = gather_rows(f_irel, nbr);
  Var edges = concat_cols({f_src, sub(f_nbr, f_src)});
  Var h = relu(add_rowvec(matmul(edges, p.edge_w), p.edge_b));
  std::vector<Var> pooled;
  pooled.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    pooled.push_back(colmax(slice_rows(h, i * k_graph, (i + 1) * k_graph)));
  return concat_rows(pooled);
}

Var centroid_project(Tape& tape, const Tensor& centroids, const SrmVars& p) {
  if (centroids.cols() != 3) throw std::invalid_argument("centroid_project: O must be N x 3");
  return add_rowvec(matmul(tape.constant(centroids), p.w_o), p.b_o);
}

SrmOutput srm_forward(Tape& tape, const Tensor& xyz, int n_clust, int k_graph,
                      const SrmVars& p, int fps_start) {
  const int n_p = xyz.rows();
  if (n_p % n_clust != 0)
    throw std::invalid_argument("srm: n_p must be divisible by N_clust");
  const int s_clust = n_p / n_clust;
  SrmOutput out;
  out.assign = knn_partition(xyz, fps(xyz, n_clust, fps_start), s_clust);
  out.f_irel = intra_encoder(tape, xyz, out.assign, p);
  out.f_orel = edgeconv(tape, out.f_irel, out.assign.centroids, k_graph, p);
  out.f_ctr = centroid_project(tape, out.assign.centroids, p);
  return out;
}

// ---------------------------------------------------------------------------
// LDA
// ---------------------------------------------------------------------------

LdaParams make_lda_params(int d_mod, int n_heads, bool with_mlp, SplitMix64& rng) {
  LdaParams p;
  p.diff = make_diffattn_params(d_mod, n_heads, rng);
  p.has_mlp = with_mlp;
  if (with_mlp) {
    p.mlp_w1 = init_linear(d_mod, d_mod, rng);
    p.mlp_b1 = Tensor::zeros({1, d_mod});
    p.mlp_w2 = init_linear(d_mod, d_mod, rng);
    p.mlp_b2 = Tensor::zeros({1, d_mod});
  }
  p.sa = make_selfattn_params(d_mod, n_heads, rng);
  return p;
}

LdaVars lift(Tape& tape, const LdaParams& p, bool requires_grad) {
  LdaVars v;
  v.diff = lift(tape, p.diff, requires_grad);
  v.has_mlp = p.has_mlp;
  if (p.has_mlp) {
    v.mlp_w1 = tape.leaf(p.mlp_w1, requires_grad);
    v.mlp_b1 = tape.leaf(p.mlp_b1, requires_grad);
    v.mlp_w2 = tape.leaf(p.mlp_w2, requires_grad);
    v.mlp_b2 = tape.leaf(p.mlp_b2, requires_grad);
  }
  v.sa = lift(tape, p.sa, requires_grad);
  return v;
}

Var lda_block(Var query_feats, Var kv_feats, const LdaVars& p, AttnKind kind,
              AttnTrace* trace) {
  if (query_feats.cols() != kv_feats.cols())
    throw std::invalid_argument("lda_block: width mismatch");
  Var filtered = (kind == AttnKind::differential)
                     ? diff_attention(query_feats, kv_feats, p.diff, trace)
                     : standard_attention(query_feats, kv_feats, p.diff, trace);
  Var residual;
  if (p.has_mlp) {
    Var h = relu(add_rowvec(matmul(filtered, p.mlp_w1), p.mlp_b1));
    Var m = add_rowvec(matmul(h, p.mlp_w2), p.mlp_b2);
    residual = add(query_feats, m);
  } else {
    residual = add(query_feats, filtered);
  }
  return self_attention(residual, p.sa);
}

// ---------------------------------------------------------------------------
// CLDA
// ---------------------------------------------------------------------------

CldaParams make_clda_params(int d_mod, int n_heads, int n_clust, int k_graph,
                            SplitMix64& rng) {
  CldaParams p;
  p.n_clust = n_clust;
  p.k_graph = k_graph;
  p.srm = make_srm_params(d_mod, rng);
  p.lda_v = make_lda_params(d_mod, n_heads, /*with_mlp=*/true, rng);
  p.lda_t = make_lda_params(d_mod, n_heads, /*with_mlp=*/false, rng);
  p.ln_v_gain = Tensor::full({1, d_mod}, real(1));
  p.ln_v_bias = Tensor::zeros({1, d_mod});
  p.ln_t_gain = Tensor::full({1, d_mod}, real(1));
  p.ln_t_bias = Tensor::zeros({1, d_mod});
  return p;
}

CldaVars lift(Tape& tape, const CldaParams& p, bool requires_grad) {
  CldaVars v;
  v.n_clust = p.n_clust;
  v.k_graph = p.k_graph;
  v.srm = lift(tape, p.srm, requires_grad);
  v.lda_v = lift(tape, p.lda_v, requires_grad);
  v.lda_t = lift(tape, p.lda_t, requires_grad);
  v.ln_v_gain = tape.leaf(p.ln_v_gain, requires_grad);
  v.ln_v_bias = tape.leaf(p.ln_v_bias, requires_grad);
  v.ln_t_gain = tape.leaf(p.ln_t_gain, requires_grad);
  v.ln_t_bias = tape.leaf(p.ln_t_bias, requires_grad);
  return v;
}

CldaOutput clda_forward(Var f_v, Var f_t, const Tensor& xyz, const CldaVars& p,
                        AttnKind kind, int fps_start) {
  if (xyz.rows() != f_v.rows())
    throw std::invalid_argument("clda_forward: xyz and F'_v row counts differ");
  Tape& tape = *f_v.tape;
  CldaOutput out;
  out.srm = srm_forward(tape, xyz, p.n_clust, p.k_graph, p.srm, fps_start);
  Var v = lda_block(f_v, out.srm.f_orel, p.lda_v, kind);
  Var t = lda_block(f_t, out.srm.f_ctr, p.lda_t, kind);
  out.f_v = layer_norm(v, p.ln_v_gain, p.ln_v_bias);
  out.f_t = layer_norm(t, p.ln_t_gain, p.ln_t_bias);
  return out;
}

}  // namespace pcxd
