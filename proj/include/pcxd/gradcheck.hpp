// SPDX-License-Identifier: Apache-2.0
//
// Central-difference verification of tape gradients. The computation under
// test is re-run from scratch for every probe, so it must be pure and
// deterministic.

#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pcxd/tensor.hpp"

namespace pcxd {

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Builds the scalar objective on the given tape from the lifted parameters
// (one Var per NamedTensor, same order).
using TapeFn = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheckEntry {
  std::string name;
  real max_rel_err = 0;
  int checked_elems = 0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> params;
  real max_rel_err = 0;
  bool pass = true;
};

// Compares tape gradients of f against central differences. step is the
// probe h; tol the max relative error allowed. max_elems_per_param > 0
// probes a deterministic subsample of large tensors instead of every element.
GradCheckReport grad_check(const TapeFn& f, const std::vector<NamedTensor>& params,
                           real step = real(1e-5), real tol = real(1e-4),
                           int max_elems_per_param = 0);

}  // namespace pcxd
