// SPDX-License-Identifier: Apache-2.0
//
// Dual-geometry task-harmonized loss: per-task weights w_i = max(e^{-v_i},
// floor_i) with learnable v_i, a warm-up-gated box<->mask consistency term,
// and a gradient-conflict penalty over (det, seg) task pairs. Gradient
// snapshots are detached constants: the penalty enters the total as a scalar
// and no second-order term is propagated.

#pragma once

#include <string>
#include <vector>

#include "pcxd/geomloss.hpp"
#include "pcxd/tensor.hpp"

namespace pcxd {

struct DgtlConfig {
  real tau = real(0.5);             // conflict threshold
  real rho = real(1.0);             // uniform pair correlation
  real lambda_floor = real(0.1);    // uniform weight floor
  real t_warm_frac = real(0.2);     // warm-up horizon as a fraction of total steps
  real t_decay_frac = real(1.0);    // decay horizon as a fraction of total steps
  real eta_min = real(0.0);
  int64_t total_steps = 1000;

  int64_t t_warm() const { return static_cast<int64_t>(t_warm_frac * static_cast<real>(total_steps)); }
  int64_t t_decay() const { return static_cast<int64_t>(t_decay_frac * static_cast<real>(total_steps)); }
};

// linear warm-up, clamped to [0, 1]
real zeta_at(const DgtlConfig& cfg, int64_t t);
// linear decay, clamped to [eta_min, 1]
real eta_at(const DgtlConfig& cfg, int64_t t);

// w_i = max(exp(-v_i), floor_i)
real task_weight_value(real v_i, real floor_i);
// tape version; gradient reaches v only while the exponential branch is active
Var task_weight(Var v_scalar, real floor_i);

// cosine of flattened gradients; defined as 1 (no conflict) when either norm
// is below 1e-12
real grad_cosine(const std::vector<real>& gi, const std::vector<real>& gj);

struct ConflictReport {
  real penalty = 0;                      // eta(t) * sum over conflicting pairs
  std::vector<std::vector<real>> cosines;  // [det][seg]
};

// P = eta(t) * sum_{i,j} rho_ij * 1[cos_ij < tau] * (tau - cos_ij); rho is
// n_det x n_seg (pass an empty tensor for the uniform cfg.rho).
ConflictReport conflict_penalty(const DgtlConfig& cfg,
                                const std::vector<std::vector<real>>& det_snaps,
                                const std::vector<std::vector<real>>& seg_snaps,
                                const Tensor& rho, int64_t t);

// zeta(t) * [iou_loss(B_loc, box_from_mask(M)) + dice_loss(M, mask_from_box(B_loc))]
// B_mask enters as a detached constant; propagates EmptyMaskError when the
// mask selects nothing.
Var geom_consistency(Var box_corners, Var mask, const Tensor& points, real zeta,
                     real sharpness = real(20), real thresh = real(0.5));

struct DgtlTotal {
  Var total;
  std::vector<real> weights;  // det tasks then seg tasks
};

// L = sum_i w_i L_i + sum_j w_j L_j + P + L_geom. `v` is a 1 x (n_det+n_seg)
// row of learnable task logits; `geom` may be invalid when the term is off.
DgtlTotal dgtl_total(const std::vector<Var>& det_losses, const std::vector<Var>& seg_losses,
                     Var v, const std::vector<real>& floors, real penalty, Var geom);

}  // namespace pcxd
