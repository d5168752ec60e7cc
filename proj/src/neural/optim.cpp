#include "codemix/neural/optim.hpp"

#include <cmath>

namespace codemix::nn {

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr,
               const AdamOptions& opts) {
  require_same_shape(param, grad, "adam_step");
  if (state.m.size() != param.size()) {
    state.m = Tensor::zeros_like(param);
    state.v = Tensor::zeros_like(param);
    state.step = 0;
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    state.m[i] = opts.beta1 * state.m[i] + (1.0 - opts.beta1) * g;
    state.v[i] = opts.beta2 * state.v[i] + (1.0 - opts.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + opts.eps);
  }
}

Adam::Adam(std::vector<Var> params, AdamOptions opts)
    : params_(std::move(params)), state_(params_.size()), opts_(opts) {}

void Adam::step(double lr) {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Var& p = params_[k];
    if (!p.requires_grad() || p.grad().empty()) continue;
    adam_step(p.mutable_value(), p.grad(), state_[k], lr, opts_);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double clip_grad_norm(const std::vector<Var>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.requires_grad() || p.grad().empty()) continue;
    for (double g : p.grad().values()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / (norm + 1e-12);
    for (auto p : params) {
      if (!p.requires_grad() || p.grad().empty()) continue;
      for (double& g : p.mutable_grad().values()) g *= s;
    }
  }
  return norm;
}

}  // namespace codemix::nn
