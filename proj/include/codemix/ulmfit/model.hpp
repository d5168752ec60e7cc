#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "codemix/neural/layers.hpp"
#include "codemix/ulmfit/config.hpp"

namespace codemix::ulmfit {

using nn::Mode;
using nn::Tensor;
using nn::Var;

using NamedVars = std::vector<std::pair<std::string, Var>>;

struct LstmWeights {
  Var w_ih;  // [4H x in], gate blocks (i, f, g, o)
  Var w_hh;  // [4H x H]
  Var bias;  // [4H]
};

/// One generator per dropout site, all derived from a single seed.
struct DropoutStreams {
  nn::RngStream embedding;
  nn::RngStream input;
  std::vector<nn::RngStream> weight;   // one per layer
  std::vector<nn::RngStream> between;  // one per layer boundary
  nn::RngStream head;

  DropoutStreams(std::uint64_t seed, std::size_t n_layers);
};

/// Embedding table plus the stacked weight-dropped LSTMs.
struct AwdLstmEncoder {
  AwdLstmConfig config;
  Var embedding;  // [vocab x emb]
  std::vector<LstmWeights> layers;

  AwdLstmEncoder() = default;
  /// Embeddings uniform in +-0.1, LSTM tensors uniform in +-1/sqrt(H).
  AwdLstmEncoder(const AwdLstmConfig& config, Xoshiro256& rng);

  NamedVars named_parameters() const;
};

/// (h, c) per layer, each [batch x H_layer].
using HiddenState = std::vector<std::pair<Tensor, Tensor>>;

HiddenState zero_hidden(const AwdLstmConfig& config, std::size_t batch);

struct EncoderOutput {
  std::vector<Var> steps;  // last-layer output per time step, [batch x output_dim]
  HiddenState hidden;      // final state, detached
};

/// Runs the encoder over time-major ids (ids[t * batch + b]). Dropout masks
/// are drawn once per call from `streams` in train mode; eval mode ignores them.
/// Throws IdOutOfRange.
EncoderOutput run_encoder(const AwdLstmEncoder& enc, std::span<const int> ids, std::size_t batch,
                          const HiddenState& h0, Mode mode, DropoutStreams* streams);

struct LanguageModel {
  AwdLstmEncoder encoder;
  Var decoder_weight;  // [vocab x output_dim]; the embedding itself when tied
  Var decoder_bias;    // [vocab]

  const AwdLstmConfig& config() const { return encoder.config; }
  AwdLstmConfig& config() { return encoder.config; }

  /// Unique parameters; the tied decoder weight is not listed twice.
  NamedVars named_parameters() const;
};

LanguageModel new_lm(const AwdLstmConfig& config, std::uint64_t seed);

struct LmOutput {
  Var logits;  // [(time * batch) x vocab], row t * batch + b
  HiddenState hidden;
};

LmOutput lm_forward(const LanguageModel& lm, std::span<const int> ids, std::size_t batch,
                    const HiddenState& h0, Mode mode, DropoutStreams* streams);

/// exp(mean next-token NLL) in eval mode over BPTT windows of the stream.
/// Throws StreamTooShort.
double perplexity(const LanguageModel& lm, std::span<const int> stream, std::size_t batch,
                  std::size_t bptt);

/// Marks which parameters train. LastLayer = final LSTM layer plus decoder
/// bias (and the decoder weight when untied).
void set_trainable(LanguageModel& lm, UnfreezeScope scope);

}  // namespace codemix::ulmfit
