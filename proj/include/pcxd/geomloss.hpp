// SPDX-License-Identifier: Apache-2.0
//
// Axis-aligned 3D box / per-point mask geometry and the differentiable
// losses over them. box_from_mask is a hard threshold and deliberately
// detached; its output only re-enters the graph as a constant, so gradient
// flows into the predicted box through the IoU term alone. mask_from_box is
// a sigmoid of the signed inside-margin so the Dice term stays
// differentiable w.r.t. box corners.

#pragma once

#include <array>

#include "pcxd/tensor.hpp"

namespace pcxd {

struct EmptyMaskError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Box3D {
  std::array<real, 3> min_c{0, 0, 0};
  std::array<real, 3> max_c{0, 0, 0};

  bool valid() const {
    return min_c[0] <= max_c[0] && min_c[1] <= max_c[1] && min_c[2] <= max_c[2];
  }
  real volume() const {
    return (max_c[0] - min_c[0]) * (max_c[1] - min_c[1]) * (max_c[2] - min_c[2]);
  }
};

// (minx,miny,minz,maxx,maxy,maxz) as a 1x6 row
Tensor box_corners(const Box3D& b);
Box3D box_from_corners(const Tensor& c);

real iou3d(const Box3D& a, const Box3D& b);

// Differentiable 1 - IoU over 1x6 corner rows (clamped intersection
// extents). Degenerate pairs with zero union are the caller's concern.
Var iou_loss(Var a_corners, Var b_corners);
Var iou_loss(Var a_corners, const Box3D& b);

// 1 - (2 sum(p t) + eps) / (sum p + sum t + eps); shapes must match.
Var dice_loss(Var pred, Var target, real eps = real(1e-6));
real dice_loss_value(const Tensor& pred, const Tensor& target, real eps = real(1e-6));

// Tight bounds of the points whose probability exceeds thresh.
Box3D box_from_mask(const Tensor& mask, const Tensor& points, real thresh = real(0.5));

// sigmoid(sharpness * signed inside-margin) per point; n_p x 1.
Var mask_from_box(Var corners, const Tensor& points, real sharpness = real(20));
Tensor mask_from_box_value(const Box3D& box, const Tensor& points, real sharpness = real(20));

}  // namespace pcxd
