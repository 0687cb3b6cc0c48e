// SPDX-License-Identifier: Apache-2.0

#include "pcxd/geomloss.hpp"

#include <algorithm>
#include <cmath>

namespace pcxd {

Tensor box_corners(const Box3D& b) {
  return Tensor::row({b.min_c[0], b.min_c[1], b.min_c[2], b.max_c[0], b.max_c[1], b.max_c[2]});
}

Box3D box_from_corners(const Tensor& c) {
  if (c.size() != 6) throw std::invalid_argument("box_from_corners: need 6 values");
  Box3D b;
  for (int i = 0; i < 3; ++i) {
    b.min_c[static_cast<size_t>(i)] = c[i];
    b.max_c[static_cast<size_t>(i)] = c[i + 3];
  }
  return b;
}

real iou3d(const Box3D& a, const Box3D& b) {
  if (!a.valid() || !b.valid()) throw std::invalid_argument("iou3d: invalid box");
  real inter = 1;
  for (int i = 0; i < 3; ++i) {
    const real lo = std::max(a.min_c[static_cast<size_t>(i)], b.min_c[static_cast<size_t>(i)]);
    const real hi = std::min(a.max_c[static_cast<size_t>(i)], b.max_c[static_cast<size_t>(i)]);
    inter *= std::max(real(0), hi - lo);
  }
  const real uni = a.volume() + b.volume() - inter;
  return uni > 0 ? inter / uni : real(0);
}

namespace {

// product of the three entries of a 1x3 row
Var prod3(Var v) {
  return mul(mul(slice_cols(v, 0, 1), slice_cols(v, 1, 2)), slice_cols(v, 2, 3));
}

}  // namespace

Var iou_loss(Var a_corners, Var b_corners) {
  if (a_corners.val().size() != 6 || b_corners.val().size() != 6)
    throw std::invalid_argument("iou_loss: corner rows must hold 6 values");
  Var a_min = slice_cols(a_corners, 0, 3), a_max = slice_cols(a_corners, 3, 6);
  Var b_min = slice_cols(b_corners, 0, 3), b_max = slice_cols(b_corners, 3, 6);
  Var inter = prod3(relu(sub(minimum(a_max, b_max), maximum(a_min, b_min))));
  Var vol_a = prod3(relu(sub(a_max, a_min)));
  Var vol_b = prod3(relu(sub(b_max, b_min)));
  Var uni = sub(add(vol_a, vol_b), inter);
  Var one = a_corners.tape->constant_scalar(1);
  return sub(one, div(inter, uni));
}

Var iou_loss(Var a_corners, const Box3D& b) {
  return iou_loss(a_corners, a_corners.tape->constant(box_corners(b)));
}

Var dice_loss(Var pred, Var target, real eps) {
  if (!pred.val().same_shape(target.val()))
    throw std::invalid_argument("dice_loss: shape mismatch");
  Tape& t = *pred.tape;
  Var eps_v = t.constant_scalar(eps);
  Var num = add(scale(sum(mul(pred, target)), 2), eps_v);
  Var den = add(add(sum(pred), sum(target)), eps_v);
  return sub(t.constant_scalar(1), div(num, den));
}

real dice_loss_value(const Tensor& pred, const Tensor& target, real eps) {
  if (!pred.same_shape(target)) throw std::invalid_argument("dice_loss: shape mismatch");
  real inter = 0, sp = 0, st = 0;
  for (int64_t i = 0; i < pred.size(); ++i) {
    inter += pred[i] * target[i];
    sp += pred[i];
    st += target[i];
  }
  return real(1) - (2 * inter + eps) / (sp + st + eps);
}

Box3D box_from_mask(const Tensor& mask, const Tensor& points, real thresh) {
  if (points.cols() != 3) throw std::invalid_argument("box_from_mask: points must be n x 3");
  if (mask.size() != points.rows())
    throw std::invalid_argument("box_from_mask: mask/points length mismatch");
  Box3D b;
  bool any = false;
  for (int i = 0; i < points.rows(); ++i) {
    if (mask[i] <= thresh) continue;
    if (!any) {
      for (int c = 0; c < 3; ++c)
        b.min_c[static_cast<size_t>(c)] = b.max_c[static_cast<size_t>(c)] = points.at(i, c);
      any = true;
    } else {
      for (int c = 0; c < 3; ++c) {
        b.min_c[static_cast<size_t>(c)] = std::min(b.min_c[static_cast<size_t>(c)], points.at(i, c));
        b.max_c[static_cast<size_t>(c)] = std::max(b.max_c[static_cast<size_t>(c)], points.at(i, c));
      }
    }
  }
  if (!any) throw EmptyMaskError("box_from_mask: no point above threshold");
  return b;
}

Var mask_from_box(Var corners, const Tensor& points, real sharpness) {
  if (corners.val().size() != 6)
    throw std::invalid_argument("mask_from_box: corner row must hold 6 values");
  if (points.cols() != 3) throw std::invalid_argument("mask_from_box: points must be n x 3");
  Tape& t = *corners.tape;
  const int n = points.rows();
  Var ones = t.constant(Tensor::full({n, 1}, real(1)));
  Var margin;
  for (int c = 0; c < 3; ++c) {
    Tensor col({n, 1});
    for (int i = 0; i < n; ++i) col.at(i, 0) = points.at(i, c);
    Var p = t.constant(std::move(col));
    Var lo = scale_by(ones, slice_cols(corners, c, c + 1));
    Var hi = scale_by(ones, slice_cols(corners, c + 3, c + 4));
    Var m = minimum(sub(p, lo), sub(hi, p));
    margin = (c == 0) ? m : minimum(margin, m);
  }
  return sigmoid(scale(margin, sharpness));
}

Tensor mask_from_box_value(const Box3D& box, const Tensor& points, real sharpness) {
  Tape t;
  return mask_from_box(t.constant(box_corners(box)), points, sharpness).val();
}

}  // namespace pcxd
