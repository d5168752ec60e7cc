#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "codemix/neural/autograd.hpp"
#include "codemix/rng.hpp"

namespace codemix::nn {

enum class Mode { Train, Eval };

/// Named generator for one dropout site.
class RngStream {
 public:
  RngStream() = default;
  RngStream(std::uint64_t global_seed, std::string name)
      : name_(std::move(name)), rng_(stream_seed(global_seed, name_)) {}

  const std::string& name() const { return name_; }
  Xoshiro256& rng() { return rng_; }

 private:
  std::string name_;
  Xoshiro256 rng_;
};

/// Throws InvalidRate unless 0 <= rate < 1.
void check_rate(double rate);

/// Entries are 0 with probability `rate`, else 1/(1-rate). One uniform draw per entry.
Tensor keep_mask(const Shape& shape, double rate, Xoshiro256& rng);

/// DropConnect on a recurrent weight matrix. Eval mode or rate 0 returns w as is.
Var weight_drop(const Var& w, double rate, Xoshiro256& rng, Mode mode);
Tensor weight_drop(const Tensor& w, double rate, Xoshiro256& rng, Mode mode);

/// Variational dropout: one [batch x dim] mask shared by every time step.
std::vector<Var> locked_dropout(std::span<const Var> steps, double rate, Xoshiro256& rng, Mode mode);
/// Same on a packed [time x batch x dim] tensor.
Tensor locked_dropout(const Tensor& seq, double rate, Xoshiro256& rng, Mode mode);

/// Per-row scale for embedding dropout (a whole word type is kept or dropped).
/// Returns an empty tensor in eval mode or at rate 0.
Tensor embedding_dropout_scales(std::size_t vocab, double rate, Xoshiro256& rng, Mode mode);
Tensor embedding_dropout(const Tensor& table, double rate, Xoshiro256& rng, Mode mode);

struct BatchNorm1d {
  Var gamma;
  Var beta;
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNorm1d(std::size_t features = 0);
  std::size_t features() const { return running_mean.size(); }
};

/// Train mode normalizes with the batch mean and biased variance and folds
/// them into the running statistics (unbiased variance); eval mode uses the
/// running statistics. Throws BatchTooSmall for a single-row batch in train mode.
Var batch_norm(const Var& x, BatchNorm1d& bn, Mode mode);

struct Linear {
  Var weight;  // [out x in]
  Var bias;    // [out]

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Xoshiro256& rng);
  Var operator()(const Var& x) const;
};

/// Uniform(-bound, bound) tensor.
Tensor uniform_tensor(const Shape& shape, double bound, Xoshiro256& rng);

}  // namespace codemix::nn
