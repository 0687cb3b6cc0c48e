// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pcxd/clda.hpp"
#include "pcxd/gradcheck.hpp"
#include "pcxd/rng.hpp"

using namespace pcxd;

TEST_CASE("fps: forced second pick on the unit square") {
  Tensor pts = Tensor::from({4, 3}, {0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 0});
  auto sel = fps(pts, 2, 0);
  REQUIRE(sel.size() == 2);
  CHECK(sel[0] == 0);
  CHECK(sel[1] == 3);  // (1,1) at sqrt(2) beats the side corners
}

TEST_CASE("fps: m == n returns all indices in greedy order") {
  SplitMix64 rng(31);
  Tensor pts = rand_uniform({6, 3}, rng, 0, 1);
  auto sel = fps(pts, 6, 0);
  std::vector<bool> seen(6, false);
  for (int i : sel) seen[static_cast<size_t>(i)] = true;
  for (bool b : seen) CHECK(b);
  auto ref = oracles::brute_force_fps(pts, 6, 0);
  CHECK(sel == ref);
}

TEST_CASE("fps: matches brute-force greedy oracle, exhaustive n <= 64") {
  SplitMix64 rng(32);
  for (int it = 0; it < 40; ++it) {
    const int n = rng.uniform_int(1, 64);
    const int m = rng.uniform_int(1, n);
    Tensor pts = rand_uniform({n, 3}, rng, -2, 2);
    CHECK(fps(pts, m, 0) == oracles::brute_force_fps(pts, m, 0));
  }
}

TEST_CASE("fps: duplicate points tie-break toward the lower index") {
  Tensor pts = Tensor::from({4, 3}, {0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1});
  auto sel = fps(pts, 3, 0);
  CHECK(sel == std::vector<int>{0, 1, 2});
}

TEST_CASE("fps: m out of range raises") {
  Tensor pts = Tensor::zeros({3, 3});
  CHECK_THROWS_AS(fps(pts, 4, 0), std::invalid_argument);
  CHECK_THROWS_AS(fps(pts, 0, 0), std::invalid_argument);
}

TEST_CASE("knn_partition: cluster arithmetic accepts the reference shape") {
  // 1024 points, 64 clusters -> exactly 16 per cluster
  SplitMix64 rng(33);
  Tensor pts = rand_uniform({1024, 3}, rng, 0, 4);
  auto centroids = fps(pts, 64, 0);
  auto assign = knn_partition(pts, centroids, 1024 / 64);
  CHECK(assign.members.size() == 64);
  for (const auto& mem : assign.members) CHECK(mem.size() == 16);
}

TEST_CASE("knn_partition: a centroid placed on a point lists it first") {
  SplitMix64 rng(34);
  Tensor pts = rand_uniform({10, 3}, rng, 0, 1);
  auto assign = knn_partition(pts, {4}, 3);
  CHECK(assign.members[0][0] == 4);
}

TEST_CASE("knn_partition: matches exhaustive sort oracle") {
  SplitMix64 rng(35);
  for (int it = 0; it < 30; ++it) {
    const int n = rng.uniform_int(4, 40);
    Tensor pts = rand_uniform({n, 3}, rng, -1, 1);
    const int n_c = rng.uniform_int(1, 3);
    std::vector<int> cents;
    for (int c = 0; c < n_c; ++c) cents.push_back(rng.uniform_int(0, n - 1));
    const int s = rng.uniform_int(1, n);
    auto assign = knn_partition(pts, cents, s);
    auto ref = oracles::full_sort_knn(pts, cents, s);
    for (size_t c = 0; c < cents.size(); ++c) CHECK(assign.members[c] == ref[c]);
  }
}

TEST_CASE("intra_encoder: members at the centroid give identical MLP(0) rows") {
  SplitMix64 rng(36);
  SrmParams p = make_srm_params(6, rng);
  Tensor pts = Tensor::zeros({4, 3});
  // two degenerate clusters, both centered at the origin
  ClusterAssignment assign;
  assign.centroid_indices = {0, 1};
  assign.members = {{0, 1}, {2, 3}};
  assign.centroids = Tensor::zeros({2, 3});
  Tape t;
  Var f = intra_encoder(t, pts, assign, lift(t, p, false));
  // reference: MLP(0) = relu(relu(b1) W2 + b2) pooled over identical rows
  Tensor z({1, 3});
  Tensor ref = oracles::relu_mat(
      oracles::add_bias(oracles::mm(oracles::relu_mat(oracles::add_bias(oracles::mm(z, p.intra_w1), p.intra_b1)),
                                    p.intra_w2),
                        p.intra_b2));
  for (int c = 0; c < 2; ++c)
    for (int j = 0; j < 6; ++j) CHECK(f.val().at(c, j) == doctest::Approx(ref.at(0, j)));
}

TEST_CASE("intra_encoder: whole-scene translation leaves F_iRel unchanged") {
  SplitMix64 rng(37);
  SrmParams p = make_srm_params(8, rng);
  Tensor pts = rand_uniform({12, 3}, rng, 0, 2);
  auto assign = knn_partition(pts, fps(pts, 3, 0), 4);

  Tensor shifted = pts;
  for (int i = 0; i < 12; ++i) {
    shifted.at(i, 0) += 5;
    shifted.at(i, 1) -= 2;
    shifted.at(i, 2) += 0.5;
  }
  auto assign_s = knn_partition(shifted, fps(shifted, 3, 0), 4);
  REQUIRE(assign.centroid_indices == assign_s.centroid_indices);

  Tape t;
  SrmVars sv = lift(t, p, false);
  Var a = intra_encoder(t, pts, assign, sv);
  Var b = intra_encoder(t, shifted, assign_s, sv);
  for (int64_t i = 0; i < a.val().size(); ++i)
    CHECK(a.val()[i] == doctest::Approx(b.val()[i]).epsilon(1e-12));
}

TEST_CASE("intra_encoder: one cluster, two members, tiny MLP oracle") {
  SrmParams p;
  p.d_mod = 2;
  p.intra_w1 = Tensor::from({3, 1}, {1, 2, 3});
  p.intra_b1 = Tensor::from({1, 1}, {0.5});
  p.intra_w2 = Tensor::from({1, 2}, {1, -1});
  p.intra_b2 = Tensor::from({1, 2}, {0, 0.25});
  p.edge_w = Tensor::zeros({4, 2});
  p.edge_b = Tensor::zeros({1, 2});
  p.w_o = Tensor::zeros({3, 2});
  p.b_o = Tensor::zeros({1, 2});

  Tensor pts = Tensor::from({2, 3}, {1, 0, 0, 0, 1, 0});
  ClusterAssignment assign;
  assign.centroid_indices = {0};
  assign.members = {{0, 1}};
  assign.centroids = Tensor::from({1, 3}, {0.5, 0.5, 0});
  // rel rows: (0.5,-0.5,0) and (-0.5,0.5,0)
  // h1: relu(0.5-1+0.5)=0, relu(-0.5+1+0.5)=1
  // row0: relu([0*1+0, 0*-1+0.25]) = [0, 0.25]
  // row1: relu([1, -1+0.25]) = [1, 0]
  // colmax -> [1, 0.25]
  Tape t;
  Var f = intra_encoder(t, pts, assign, lift(t, p, false));
  CHECK(f.val().at(0, 0) == doctest::Approx(1).epsilon(1e-14));
  CHECK(f.val().at(0, 1) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("edgeconv: identical node features reduce to MLP([f;0])") {
  SplitMix64 rng(38);
  SrmParams p = make_srm_params(4, rng);
  Tape t;
  SrmVars sv = lift(t, p, false);
  Tensor feat_row = randn({1, 4}, rng);
  Tensor feats({5, 4});
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) feats.at(i, j) = feat_row.at(0, j);
  Tensor cents = rand_uniform({5, 3}, rng, 0, 1);
  Var out = edgeconv(t, t.constant(feats), cents, 2, sv);

  Tensor edge({1, 8});
  for (int j = 0; j < 4; ++j) edge.at(0, j) = feat_row.at(0, j);
  Tensor ref = oracles::relu_mat(oracles::add_bias(oracles::mm(edge, p.edge_w), p.edge_b));
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(out.val().at(i, j) == doctest::Approx(ref.at(0, j)).epsilon(1e-13));
}

TEST_CASE("edgeconv: two nodes with k=1 see each other symmetrically") {
  SplitMix64 rng(39);
  SrmParams p = make_srm_params(4, rng);
  Tape t;
  SrmVars sv = lift(t, p, false);
  Tensor feats = randn({2, 4}, rng);
  Tensor cents = Tensor::from({2, 3}, {0, 0, 0, 1, 0, 0});
  Var out = edgeconv(t, t.constant(feats), cents, 1, sv);
  // node 0 edge: [f0 ; f1-f0], node 1 edge: [f1 ; f0-f1]
  Tensor e0({1, 8}), e1({1, 8});
  for (int j = 0; j < 4; ++j) {
    e0.at(0, j) = feats.at(0, j);
    e0.at(0, 4 + j) = feats.at(1, j) - feats.at(0, j);
    e1.at(0, j) = feats.at(1, j);
    e1.at(0, 4 + j) = feats.at(0, j) - feats.at(1, j);
  }
  Tensor r0 = oracles::relu_mat(oracles::add_bias(oracles::mm(e0, p.edge_w), p.edge_b));
  Tensor r1 = oracles::relu_mat(oracles::add_bias(oracles::mm(e1, p.edge_w), p.edge_b));
  for (int j = 0; j < 4; ++j) {
    CHECK(out.val().at(0, j) == doctest::Approx(r0.at(0, j)).epsilon(1e-13));
    CHECK(out.val().at(1, j) == doctest::Approx(r1.at(0, j)).epsilon(1e-13));
  }
}

TEST_CASE("edgeconv: 4 nodes, k=2, explicit enumeration oracle") {
  SplitMix64 rng(40);
  SrmParams p = make_srm_params(4, rng);
  Tensor feats = randn({4, 4}, rng);
  Tensor cents = Tensor::from({4, 3}, {0, 0, 0, 1, 0, 0, 0, 1, 0, 2, 2, 0});
  Tape t;
  Var out = edgeconv(t, t.constant(feats), cents, 2, lift(t, p, false));

  // neighbor sets by squared distance with lower-index ties:
  // node0: {1,2}; node1: {0,2}; node2: {0,1}; node3: {1,2}
  const int nbrs[4][2] = {{1, 2}, {0, 2}, {0, 1}, {1, 2}};
  for (int i = 0; i < 4; ++i) {
    Tensor best({1, 4});
    for (int j = 0; j < 4; ++j) best.at(0, j) = -std::numeric_limits<real>::infinity();
    for (int kk = 0; kk < 2; ++kk) {
      Tensor e({1, 8});
      for (int j = 0; j < 4; ++j) {
        e.at(0, j) = feats.at(i, j);
        e.at(0, 4 + j) = feats.at(nbrs[i][kk], j) - feats.at(i, j);
      }
      Tensor h = oracles::relu_mat(oracles::add_bias(oracles::mm(e, p.edge_w), p.edge_b));
      for (int j = 0; j < 4; ++j) best.at(0, j) = std::max(best.at(0, j), h.at(0, j));
    }
    for (int j = 0; j < 4; ++j)
      CHECK(out.val().at(i, j) == doctest::Approx(best.at(0, j)).epsilon(1e-13));
  }
}

TEST_CASE("edgeconv rejects k_graph >= N_clust") {
  SplitMix64 rng(41);
  SrmParams p = make_srm_params(4, rng);
  Tape t;
  SrmVars sv = lift(t, p, false);
  Var f = t.constant(Tensor::zeros({3, 4}));
  CHECK_THROWS_AS(edgeconv(t, f, Tensor::zeros({3, 3}), 3, sv), std::invalid_argument);
}

TEST_CASE("centroid_project: zero, identity-padded, and matmul oracle cases") {
  SplitMix64 rng(42);
  SrmParams p = make_srm_params(6, rng);
  Tape t;

  {
    SrmParams z = p;
    z.b_o = Tensor::zeros({1, 6});
    Var out = centroid_project(t, Tensor::zeros({3, 3}), lift(t, z, false));
    for (int64_t i = 0; i < out.val().size(); ++i) CHECK(out.val()[i] == 0);
  }
  {
    SrmParams ip = p;
    ip.w_o = Tensor::zeros({3, 6});
    for (int i = 0; i < 3; ++i) ip.w_o.at(i, i) = 1;
    ip.b_o = Tensor::zeros({1, 6});
    Tensor cents = rand_uniform({4, 3}, rng, -1, 1);
    Var out = centroid_project(t, cents, lift(t, ip, false));
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 3; ++j) CHECK(out.val().at(i, j) == cents.at(i, j));
      for (int j = 3; j < 6; ++j) CHECK(out.val().at(i, j) == 0);
    }
  }
  {
    Tensor cents = randn({5, 3}, rng);
    Var out = centroid_project(t, cents, lift(t, p, false));
    Tensor ref = oracles::add_bias(oracles::mm(cents, p.w_o), p.b_o);
    for (int64_t i = 0; i < ref.size(); ++i)
      CHECK(out.val()[i] == doctest::Approx(ref[i]).epsilon(1e-13));
  }
}

TEST_CASE("lda_block: zero kv and zero-bias MLP pass the query into self-attention") {
  SplitMix64 rng(43);
  LdaParams p = make_lda_params(4, 1, true, rng);
  // zero W_V makes the filtered features zero even though kernels are uniform;
  // zero LN bias keeps them zero; zero MLP weights kill the residual term
  p.diff.w_v = Tensor::zeros({4, 4});
  p.mlp_w2 = Tensor::zeros({4, 4});
  p.mlp_b2 = Tensor::zeros({1, 4});
  Tensor query = randn({3, 4}, rng);
  Tape t;
  LdaVars lv = lift(t, p, false);
  Var out = lda_block(t.constant(query), t.constant(randn({2, 4}, rng)), lv);
  Tensor ref = oracles::reference_self_attention(query, p.sa);
  for (int64_t i = 0; i < ref.size(); ++i)
    CHECK(out.val()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("lda_block: lambda-zero stage equals the standard-attention route") {
  SplitMix64 rng(44);
  LdaParams p = make_lda_params(8, 2, true, rng);
  for (Tensor* t : {&p.diff.lambda_q1, &p.diff.lambda_k1, &p.diff.lambda_q2, &p.diff.lambda_k2})
    for (int64_t i = 0; i < t->size(); ++i) (*t)[i] = 0;
  Tensor query = randn({3, 8}, rng), kv = randn({2, 8}, rng);
  Tape t;
  LdaVars lv = lift(t, p, false);
  Var d = lda_block(t.constant(query), t.constant(kv), lv, AttnKind::differential);
  Var s = lda_block(t.constant(query), t.constant(kv), lv, AttnKind::standard);
  for (int64_t i = 0; i < d.val().size(); ++i)
    CHECK(std::abs(d.val()[i] - s.val()[i]) <= 1e-10);
}

TEST_CASE("lda_block: 3 queries x 2 clusters matches composed oracles") {
  SplitMix64 rng(45);
  LdaParams p = make_lda_params(4, 1, true, rng);
  Tensor query = randn({3, 4}, rng), kv = randn({2, 4}, rng);
  Tape t;
  Var out = lda_block(t.constant(query), t.constant(kv), lift(t, p, false));

  Tensor filt = oracles::reference_attention(query, kv, p.diff, true);
  Tensor h = oracles::relu_mat(oracles::add_bias(oracles::mm(filt, p.mlp_w1), p.mlp_b1));
  Tensor m = oracles::add_bias(oracles::mm(h, p.mlp_w2), p.mlp_b2);
  Tensor res = query;
  for (int64_t i = 0; i < res.size(); ++i) res[i] += m[i];
  Tensor ref = oracles::reference_self_attention(res, p.sa);
  for (int64_t i = 0; i < ref.size(); ++i)
    CHECK(out.val()[i] == doctest::Approx(ref[i]).epsilon(1e-11));
}

TEST_CASE("text-branch lda_block omits the MLP on the residual") {
  SplitMix64 rng(46);
  LdaParams p = make_lda_params(4, 1, false, rng);
  Tensor query = randn({2, 4}, rng), kv = randn({2, 4}, rng);
  Tape t;
  Var out = lda_block(t.constant(query), t.constant(kv), lift(t, p, false));
  Tensor filt = oracles::reference_attention(query, kv, p.diff, true);
  Tensor res = query;
  for (int64_t i = 0; i < res.size(); ++i) res[i] += filt[i];
  Tensor ref = oracles::reference_self_attention(res, p.sa);
  for (int64_t i = 0; i < ref.size(); ++i)
    CHECK(out.val()[i] == doctest::Approx(ref[i]).epsilon(1e-11));
}

TEST_CASE("clda_forward: degenerate single-point clusters give equal F_iRel rows") {
  SplitMix64 rng(47);
  const int n_p = 6;
  CldaParams p = make_clda_params(4, 1, n_p, 2, rng);
  Tensor xyz = rand_uniform({n_p, 3}, rng, 0, 1);
  Tape t;
  CldaVars cv = lift(t, p, false);
  CldaOutput out = clda_forward(t.constant(randn({n_p, 4}, rng)),
                                t.constant(randn({2, 4}, rng)), xyz, cv);
  // S_clust = 1: every cluster is one point sitting on its centroid
  for (int c = 1; c < n_p; ++c)
    for (int j = 0; j < 4; ++j)
      CHECK(out.srm.f_irel.val().at(c, j) ==
            doctest::Approx(out.srm.f_irel.val().at(0, j)).epsilon(1e-13));
}

TEST_CASE("clda_forward: row counts are conserved and divisibility enforced") {
  SplitMix64 rng(48);
  CldaParams p = make_clda_params(4, 1, 2, 1, rng);
  Tape t;
  CldaVars cv = lift(t, p, false);
  Var f_v = t.constant(randn({8, 4}, rng));
  Var f_t = t.constant(randn({3, 4}, rng));
  Tensor xyz = rand_uniform({8, 3}, rng, 0, 1);
  CldaOutput out = clda_forward(f_v, f_t, xyz, cv);
  CHECK(out.f_v.rows() == 8);
  CHECK(out.f_v.cols() == 4);
  CHECK(out.f_t.rows() == 3);

  CldaParams bad = make_clda_params(4, 1, 3, 1, rng);
  Tape t2;
  CldaVars bv = lift(t2, bad, false);
  CHECK_THROWS_AS(clda_forward(t2.constant(randn({8, 4}, rng)),
                               t2.constant(randn({3, 4}, rng)),
                               rand_uniform({8, 3}, rng, 0, 1), bv),
                  std::invalid_argument);
}

TEST_CASE("translation invariance: F_iRel/F_orel fixed, F_ctr shifts by dO*W_o") {
  SplitMix64 rng(49);
  const int n_p = 8, d = 4;
  CldaParams p = make_clda_params(d, 1, 2, 1, rng);
  Tensor xyz = rand_uniform({n_p, 3}, rng, 0, 2);
  Tensor shifted = xyz;
  const real delta[3] = {3, -1, 2};
  for (int i = 0; i < n_p; ++i)
    for (int c = 0; c < 3; ++c) shifted.at(i, c) += delta[c];

  Tape t;
  SrmVars sv = lift(t, p.srm, false);
  SrmOutput a = srm_forward(t, xyz, 2, 1, sv);
  SrmOutput b = srm_forward(t, shifted, 2, 1, sv);
  REQUIRE(a.assign.centroid_indices == b.assign.centroid_indices);
  for (int64_t i = 0; i < a.f_irel.val().size(); ++i) {
    CHECK(a.f_irel.val()[i] == doctest::Approx(b.f_irel.val()[i]).epsilon(1e-12));
    CHECK(a.f_orel.val()[i] == doctest::Approx(b.f_orel.val()[i]).epsilon(1e-12));
  }
  // delta row through W_o
  Tensor drow({1, 3});
  for (int c = 0; c < 3; ++c) drow.at(0, c) = delta[c];
  Tensor dproj = oracles::mm(drow, p.srm.w_o);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < d; ++j)
      CHECK(b.f_ctr.val().at(i, j) - a.f_ctr.val().at(i, j) ==
            doctest::Approx(dproj.at(0, j)).epsilon(1e-11));
}

TEST_CASE("clda_forward gradcheck on a tiny instance") {
  SplitMix64 rng(50);
  const int n_p = 4, d = 4, l_t = 2;
  CldaParams p = make_clda_params(d, 1, 2, 1, rng);
  Tensor xyz = rand_uniform({n_p, 3}, rng, 0, 1);
  Tensor f_v = randn({n_p, d}, rng);
  Tensor f_t = randn({l_t, d}, rng);

  // lift everything through the named-parameter interface
  std::vector<NamedTensor> params{
      {"f_v", f_v},
      {"f_t", f_t},
      {"srm.intra_w1", p.srm.intra_w1},
      {"srm.intra_b1", p.srm.intra_b1},
      {"srm.intra_w2", p.srm.intra_w2},
      {"srm.intra_b2", p.srm.intra_b2},
      {"srm.edge_w", p.srm.edge_w},
      {"srm.edge_b", p.srm.edge_b},
      {"srm.w_o", p.srm.w_o},
      {"srm.b_o", p.srm.b_o},
      {"lda_v.mlp_w1", p.lda_v.mlp_w1},
      {"lda_v.mlp_b1", p.lda_v.mlp_b1},
      {"lda_v.diff.w_q", p.lda_v.diff.w_q},
      {"lda_v.diff.lambda_q1", p.lda_v.diff.lambda_q1},
      {"lda_v.sa.w_o", p.lda_v.sa.w_o},
      {"lda_t.diff.w_v", p.lda_t.diff.w_v},
      {"ln_v_gain", p.ln_v_gain},
      {"ln_t_bias", p.ln_t_bias},
  };
  auto f = [&](Tape& tp, const std::vector<Var>& vs) {
    CldaParams q = p;
    CldaVars cv = lift(tp, q, false);
    cv.srm.intra_w1 = vs[2];
    cv.srm.intra_b1 = vs[3];
    cv.srm.intra_w2 = vs[4];
    cv.srm.intra_b2 = vs[5];
    cv.srm.edge_w = vs[6];
    cv.srm.edge_b = vs[7];
    cv.srm.w_o = vs[8];
    cv.srm.b_o = vs[9];
    cv.lda_v.mlp_w1 = vs[10];
    cv.lda_v.mlp_b1 = vs[11];
    cv.lda_v.diff.w_q = vs[12];
    cv.lda_v.diff.lambda_q1 = vs[13];
    cv.lda_v.sa.w_o = vs[14];
    cv.lda_t.diff.w_v = vs[15];
    cv.ln_v_gain = vs[16];
    cv.ln_t_bias = vs[17];
    CldaOutput out = clda_forward(vs[0], vs[1], xyz, cv);
    return add(sum(out.f_v), sum(out.f_t));
  };
  auto rep = grad_check(f, params, 1e-5, 1e-4);
  INFO("max_rel_err ", rep.max_rel_err);
  CHECK(rep.pass);
}
