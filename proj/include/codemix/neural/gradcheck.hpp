#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "codemix/neural/autograd.hpp"

namespace codemix::nn {

struct GradCheckOptions {
  double eps = 1e-5;
  // Five-point stencil (error O(eps^4)) instead of the two-point one.
  bool five_point = false;
  // Entries where both |analytic| and |numeric| are <= zero_atol (dead unit,
  // unselected slice, a shift removed by batch norm) count as zero error.
  double zero_atol = 0.0;
  // When > 0, an entry whose error exceeds this is re-estimated with the step
  // halved, up to max_halvings times. If it still fails and the last two
  // estimates agree within smooth_tol it is a real mismatch; otherwise the
  // stencil keeps straddling a kink (relu, max) and the entry is counted in
  // `nonsmooth` instead.
  double smooth_tol = 0.0;
  int max_halvings = 4;
  // Entries probed per parameter tensor; 0 probes every entry.
  std::size_t max_entries_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
  std::size_t nonsmooth = 0;
};

/// Relative error |a - n| / (max(|a|, |n|) + 1e-12).
double relative_error(double analytic, double numeric);

/// Compares backward() gradients of loss_fn() against central differences.
/// loss_fn must be deterministic and return a scalar.
GradCheckResult grad_check(const std::function<Var()>& loss_fn, std::span<Var> params,
                           const GradCheckOptions& opts = {});

}  // namespace codemix::nn
