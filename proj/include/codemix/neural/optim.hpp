#pragma once

#include <cstdint>
#include <vector>

#include "codemix/neural/autograd.hpp"

namespace codemix::nn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Tensor m;
  Tensor v;
  std::int64_t step = 0;
};

/// One bias-corrected Adam update of `param` in place.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr,
               const AdamOptions& opts = {});

/// Adam over a fixed parameter list. Parameters that currently do not require
/// gradients (frozen) or received no gradient are left untouched, state included.
class Adam {
 public:
  explicit Adam(std::vector<Var> params, AdamOptions opts = {});

  void step(double lr);
  void zero_grad();

  const std::vector<Var>& params() const { return params_; }

 private:
  std::vector<Var> params_;
  std::vector<AdamState> state_;
  AdamOptions opts_;
};

/// Scales all gradients so their joint L2 norm is at most max_norm. Returns the
/// norm before clipping.
double clip_grad_norm(const std::vector<Var>& params, double max_norm);

}  // namespace codemix::nn
