#pragma once

#include <span>
#include <utility>
#include <vector>

#include "codemix/neural/autograd.hpp"

namespace codemix::nn {

// Element-wise ops require identical shapes (ShapeMismatch otherwise).
Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// a * mask where mask is a constant of the same shape (dropout masks).
Var mul_mask(const Var& a, const Tensor& mask);

Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);

/// [m x k] @ [k x n]
Var matmul(const Var& a, const Var& b);
/// x [n x in] @ W^T with W [out x in], plus bias [out] when defined.
Var linear(const Var& x, const Var& weight, const Var& bias = {});

Var slice_cols(const Var& a, std::size_t begin, std::size_t count);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);

/// Rows of `table` selected by ids; row r scaled by row_scale[r] when given
/// (embedding dropout). Throws IdOutOfRange.
Var embedding(const Var& table, std::span<const int> ids, const Tensor* row_scale = nullptr);

/// Mean negative log-likelihood over rows, max-subtracted softmax.
/// Throws TargetOutOfRange.
Var softmax_cross_entropy(const Var& logits, std::span<const int> targets);

/// Row-wise softmax of constant logits.
Tensor softmax(const Tensor& logits);

Var sum(const Var& a);

/// One LSTM step; gate order in the stacked weights is (input, forget, cell, output).
/// Returns (h', c').
std::pair<Var, Var> lstm_cell(const Var& x, const Var& h, const Var& c, const Var& w_ih,
                              const Var& w_hh, const Var& bias);

/// Pooling over time of per-step outputs [batch x dim]; example b uses steps
/// [0, lengths[b]). lengths must be >= 1.
Var masked_max_pool(std::span<const Var> steps, std::span<const std::size_t> lengths);
Var masked_mean_pool(std::span<const Var> steps, std::span<const std::size_t> lengths);
Var gather_last(std::span<const Var> steps, std::span<const std::size_t> lengths);

}  // namespace codemix::nn
