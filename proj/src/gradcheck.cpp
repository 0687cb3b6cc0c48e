// SPDX-License-Identifier: Apache-2.0

#include "pcxd/gradcheck.hpp"

#include <cmath>

namespace pcxd {

namespace {

real eval_scalar(const TapeFn& f, const std::vector<NamedTensor>& params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.leaf(p.value, false));
  const Var y = f(tape, vars);
  if (y.val().size() != 1) throw std::invalid_argument("grad_check: f must be scalar-valued");
  const real v = y.val()[0];
  if (!std::isfinite(v)) throw NonFiniteError("grad_check: non-finite objective");
  return v;
}

}  // namespace

GradCheckReport grad_check(const TapeFn& f, const std::vector<NamedTensor>& params, real step,
                           real tol, int max_elems_per_param) {
  // analytic gradients
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.leaf(p.value, true));
  const Var y = f(tape, vars);
  if (y.val().size() != 1) throw std::invalid_argument("grad_check: f must be scalar-valued");
  if (!std::isfinite(y.val()[0])) throw NonFiniteError("grad_check: non-finite objective");
  tape.backward(y);
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const Var& v : vars) analytic.push_back(tape.grad(v));

  // Central differences cannot resolve gradients below ~|f|*eps/(2h); the
  // relative-error floor scales with the objective so that noise on
  // effectively-zero gradients is not misread as disagreement.
  const real floor = real(1e-6) * std::max(real(1), std::abs(y.val()[0]));

  GradCheckReport report;
  std::vector<NamedTensor> probe = params;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    GradCheckEntry entry;
    entry.name = params[pi].name;
    const int64_t n = params[pi].value.size();
    // deterministic stride subsample when capped
    int64_t stride = 1;
    if (max_elems_per_param > 0 && n > max_elems_per_param)
      stride = (n + max_elems_per_param - 1) / max_elems_per_param;
    for (int64_t i = 0; i < n; i += stride) {
      const real orig = probe[pi].value[i];
      probe[pi].value[i] = orig + step;
      const real fp = eval_scalar(f, probe);
      probe[pi].value[i] = orig - step;
      const real fm = eval_scalar(f, probe);
      probe[pi].value[i] = orig;
      const real numeric = (fp - fm) / (2 * step);
      const real a = analytic[pi][i];
      const real denom = std::max({std::abs(a), std::abs(numeric), floor});
      const real rel = std::abs(a - numeric) / denom;
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
      ++entry.checked_elems;
    }
    entry.pass = entry.max_rel_err <= tol;
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.pass = report.pass && entry.pass;
    report.params.push_back(std::move(entry));
  }
  return report;
}

}  // namespace pcxd
