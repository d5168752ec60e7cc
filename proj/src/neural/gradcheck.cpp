#include "codemix/neural/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "codemix/rng.hpp"

namespace codemix::nn {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / (std::max(std::abs(analytic), std::abs(numeric)) + 1e-12);
}

GradCheckResult grad_check(const std::function<Var()>& loss_fn, std::span<Var> params,
                           const GradCheckOptions& opts) {
  for (auto& p : params) p.zero_grad();
  backward(loss_fn());

  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    analytic.push_back(p.grad().empty() ? Tensor::zeros_like(p.value()) : p.grad());
  }

  GradCheckResult result;
  Xoshiro256 rng(opts.seed);
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& value = params[k].mutable_value();
    std::vector<std::size_t> entries(value.size());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (opts.max_entries_per_tensor > 0 && entries.size() > opts.max_entries_per_tensor) {
      shuffle_in_place(entries, rng);
      entries.resize(opts.max_entries_per_tensor);
      std::sort(entries.begin(), entries.end());
    }
    for (std::size_t i : entries) {
      const double saved = value[i];
      auto at = [&](double offset) {
        value[i] = saved + offset;
        return loss_fn().value()[0];
      };
      auto estimate = [&](double h) {
        if (opts.five_point) return (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
        return (at(h) - at(-h)) / (2.0 * h);
      };
      const double a = analytic[k][i];
      const double numeric = estimate(opts.eps);
      auto error_of = [&](double n) {
        const bool zero = std::abs(a) <= opts.zero_atol && std::abs(n) <= opts.zero_atol;
        return zero ? 0.0 : relative_error(a, n);
      };
      double err = error_of(numeric);
      if (opts.smooth_tol > 0.0 && err > opts.smooth_tol) {
        bool converged = false;
        double prev = numeric;
        double h = opts.eps;
        for (int r = 0; r < opts.max_halvings && err > opts.smooth_tol; ++r) {
          h /= 2;
          const double next = estimate(h);
          err = std::min(err, error_of(next));
          converged = relative_error(prev, next) <= opts.smooth_tol;
          prev = next;
        }
        if (err > opts.smooth_tol && !converged) {
          ++result.nonsmooth;
          value[i] = saved;
          continue;
        }
      }
      value[i] = saved;
      ++result.entries_checked;
      if (err > result.max_rel_error || result.entries_checked == 1) {
        result.max_rel_error = err;
        result.worst_param = k;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace codemix::nn
