#include "codemix/neural/layers.hpp"

#include <cmath>
#include <string>

#include "codemix/errors.hpp"
#include "codemix/neural/ops.hpp"

namespace codemix::nn {

void check_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error(ErrorKind::InvalidRate, "dropout rate " + std::to_string(rate) + " outside [0, 1)");
  }
}

Tensor keep_mask(const Shape& shape, double rate, Xoshiro256& rng) {
  check_rate(rate);
  Tensor mask(shape);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask.values()) m = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

Var weight_drop(const Var& w, double rate, Xoshiro256& rng, Mode mode) {
  check_rate(rate);
  if (mode == Mode::Eval || rate == 0.0) return w;
  return mul_mask(w, keep_mask(w.shape(), rate, rng));
}

Tensor weight_drop(const Tensor& w, double rate, Xoshiro256& rng, Mode mode) {
  check_rate(rate);
  if (mode == Mode::Eval || rate == 0.0) return w;
  Tensor out = w;
  out.matrix().array() *= keep_mask(w.shape(), rate, rng).matrix().array();
  return out;
}

std::vector<Var> locked_dropout(std::span<const Var> steps, double rate, Xoshiro256& rng, Mode mode) {
  check_rate(rate);
  std::vector<Var> out(steps.begin(), steps.end());
  if (mode == Mode::Eval || rate == 0.0 || steps.empty()) return out;
  const Tensor mask = keep_mask(steps[0].shape(), rate, rng);
  for (auto& v : out) v = mul_mask(v, mask);
  return out;
}

Tensor locked_dropout(const Tensor& seq, double rate, Xoshiro256& rng, Mode mode) {
  check_rate(rate);
  if (seq.rank() != 3) {
    throw Error(ErrorKind::ShapeMismatch, "locked_dropout expects [time x batch x dim], got " +
                                              shape_string(seq.shape()));
  }
  if (mode == Mode::Eval || rate == 0.0) return seq;
  const std::size_t step = seq.dim(1) * seq.dim(2);
  const Tensor mask = keep_mask({seq.dim(1), seq.dim(2)}, rate, rng);
  Tensor out = seq;
  for (std::size_t t = 0; t < seq.dim(0); ++t) {
    for (std::size_t i = 0; i < step; ++i) out[t * step + i] *= mask[i];
  }
  return out;
}

Tensor embedding_dropout_scales(std::size_t vocab, double rate, Xoshiro256& rng, Mode mode) {
  check_rate(rate);
  if (mode == Mode::Eval || rate == 0.0) return {};
  return keep_mask({vocab}, rate, rng);
}

Tensor embedding_dropout(const Tensor& table, double rate, Xoshiro256& rng, Mode mode) {
  const Tensor scales = embedding_dropout_scales(table.rows(), rate, rng, mode);
  if (scales.empty()) return table;
  Tensor out = table;
  const std::size_t cols = table.cols();
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) *= scales[r];
  }
  return out;
}

BatchNorm1d::BatchNorm1d(std::size_t features)
    : gamma(Var::leaf(Tensor({features}, 1.0))),
      beta(Var::leaf(Tensor({features}, 0.0))),
      running_mean({features}, 0.0),
      running_var({features}, 1.0) {}

Var batch_norm(const Var& x, BatchNorm1d& bn, Mode mode) {
  const Tensor& in = x.value();
  const std::size_t n = in.rows();
  const std::size_t f = bn.features();
  if (in.rank() != 2 || in.cols() != f) {
    throw Error(ErrorKind::ShapeMismatch, "batch_norm input " + shape_string(in.shape()) +
                                              " for " + std::to_string(f) + " features");
  }
  if (mode == Mode::Train && n < 2) {
    throw Error(ErrorKind::BatchTooSmall, "batch_norm needs at least 2 rows in train mode",
                static_cast<std::int64_t>(n));
  }

  Tensor mean({f}), inv_std({f});
  if (mode == Mode::Train) {
    for (std::size_t j = 0; j < f; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += in.at(i, j);
      const double mu = s / static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) ss += (in.at(i, j) - mu) * (in.at(i, j) - mu);
      const double var = ss / static_cast<double>(n);
      mean[j] = mu;
      inv_std[j] = 1.0 / std::sqrt(var + bn.eps);
      const double unbiased = ss / static_cast<double>(n - 1);
      bn.running_mean[j] = (1.0 - bn.momentum) * bn.running_mean[j] + bn.momentum * mu;
      bn.running_var[j] = (1.0 - bn.momentum) * bn.running_var[j] + bn.momentum * unbiased;
    }
  } else {
    for (std::size_t j = 0; j < f; ++j) {
      mean[j] = bn.running_mean[j];
      inv_std[j] = 1.0 / std::sqrt(bn.running_var[j] + bn.eps);
    }
  }

  Tensor xhat({n, f});
  Tensor out({n, f});
  const Tensor& g = bn.gamma.value();
  const Tensor& b = bn.beta.value();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < f; ++j) {
      xhat.at(i, j) = (in.at(i, j) - mean[j]) * inv_std[j];
      out.at(i, j) = g[j] * xhat.at(i, j) + b[j];
    }
  }

  const bool train = mode == Mode::Train;
  return make_result(std::move(out), {x, bn.gamma, bn.beta},
                     [xhat = std::move(xhat), inv_std = std::move(inv_std), train](Node& self) {
                       const std::size_t n = xhat.rows();
                       const std::size_t f = xhat.cols();
                       const Tensor& gamma = self.parents[1]->value;
                       const Tensor& dy = self.grad;
                       if (self.parents[1]->requires_grad || self.parents[2]->requires_grad) {
                         Tensor& dg = self.parents[1]->ensure_grad();
                         Tensor& db = self.parents[2]->ensure_grad();
                         for (std::size_t i = 0; i < n; ++i) {
                           for (std::size_t j = 0; j < f; ++j) {
                             dg[j] += dy.at(i, j) * xhat.at(i, j);
                             db[j] += dy.at(i, j);
                           }
                         }
                       }
                       if (!self.parents[0]->requires_grad) return;
                       Tensor& dx = self.parents[0]->ensure_grad();
                       for (std::size_t j = 0; j < f; ++j) {
                         if (!train) {
                           for (std::size_t i = 0; i < n; ++i) dx.at(i, j) += dy.at(i, j) * gamma[j] * inv_std[j];
                           continue;
                         }
                         double sum_d = 0.0, sum_dx = 0.0;
                         for (std::size_t i = 0; i < n; ++i) {
                           const double d = dy.at(i, j) * gamma[j];
                           sum_d += d;
                           sum_dx += d * xhat.at(i, j);
                         }
                         const double inv_n = 1.0 / static_cast<double>(n);
                         for (std::size_t i = 0; i < n; ++i) {
                           const double d = dy.at(i, j) * gamma[j];
                           dx.at(i, j) += inv_std[j] * (d - inv_n * sum_d - xhat.at(i, j) * inv_n * sum_dx);
                         }
                       }
                     });
}

Tensor uniform_tensor(const Shape& shape, double bound, Xoshiro256& rng) {
  Tensor t(shape);
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

Linear::Linear(std::size_t in, std::size_t out, Xoshiro256& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight = Var::leaf(uniform_tensor({out, in}, bound, rng));
  bias = Var::leaf(uniform_tensor({out}, bound, rng));
}

Var Linear::operator()(const Var& x) const { return linear(x, weight, bias); }

}  // namespace codemix::nn
