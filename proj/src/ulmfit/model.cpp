#include "codemix/ulmfit/model.hpp"

#include <cmath>
#include <string>
#include <tuple>

#include "codemix/errors.hpp"
#include "codemix/neural/ops.hpp"
#include "codemix/ulmfit/data.hpp"

namespace codemix::ulmfit {

DropoutStreams::DropoutStreams(std::uint64_t seed, std::size_t n_layers)
    : embedding(seed, "dropout.embedding"), input(seed, "dropout.input"), head(seed, "dropout.head") {
  for (std::size_t l = 0; l < n_layers; ++l) {
    weight.emplace_back(seed, "dropout.weight." + std::to_string(l));
    between.emplace_back(seed, "dropout.between." + std::to_string(l));
  }
}

AwdLstmEncoder::AwdLstmEncoder(const AwdLstmConfig& cfg, Xoshiro256& rng) : config(cfg) {
  config.validate();
  embedding = Var::leaf(nn::uniform_tensor({config.vocab_size, config.embedding_dim}, 0.1, rng));
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    const std::size_t in = config.layer_input_dim(l);
    const std::size_t h = config.layer_hidden_dim(l);
    const double bound = 1.0 / std::sqrt(static_cast<double>(h));
    LstmWeights w;
    w.w_ih = Var::leaf(nn::uniform_tensor({4 * h, in}, bound, rng));
    w.w_hh = Var::leaf(nn::uniform_tensor({4 * h, h}, bound, rng));
    w.bias = Var::leaf(nn::uniform_tensor({4 * h}, bound, rng));
    layers.push_back(std::move(w));
  }
}

NamedVars AwdLstmEncoder::named_parameters() const {
  NamedVars out{{"encoder.embedding", embedding}};
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string p = "encoder.lstm." + std::to_string(l) + ".";
    out.emplace_back(p + "w_ih", layers[l].w_ih);
    out.emplace_back(p + "w_hh", layers[l].w_hh);
    out.emplace_back(p + "bias", layers[l].bias);
  }
  return out;
}

HiddenState zero_hidden(const AwdLstmConfig& config, std::size_t batch) {
  HiddenState h;
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    const std::size_t dim = config.layer_hidden_dim(l);
    h.emplace_back(Tensor({batch, dim}), Tensor({batch, dim}));
  }
  return h;
}

EncoderOutput run_encoder(const AwdLstmEncoder& enc, std::span<const int> ids, std::size_t batch,
                          const HiddenState& h0, Mode mode, DropoutStreams* streams) {
  if (batch == 0 || ids.empty() || ids.size() % batch != 0) {
    throw Error(ErrorKind::ShapeMismatch, std::to_string(ids.size()) +
                                              " ids do not form whole steps of batch " +
                                              std::to_string(batch));
  }
  const bool train = mode == Mode::Train;
  if (train && streams == nullptr) {
    throw Error(ErrorKind::InvalidConfig, "train-mode forward needs dropout streams");
  }
  const auto& cfg = enc.config;
  const std::size_t steps = ids.size() / batch;
  const DropoutRates rates = cfg.effective_dropouts();
  const HiddenState init = h0.empty() ? zero_hidden(cfg, batch) : h0;
  if (init.size() != cfg.n_layers) {
    throw Error(ErrorKind::ShapeMismatch, "hidden state has " + std::to_string(init.size()) +
                                              " layers, model has " + std::to_string(cfg.n_layers));
  }

  Tensor scales;
  if (train) scales = nn::embedding_dropout_scales(cfg.vocab_size, rates.embedding, streams->embedding.rng(), mode);
  std::vector<Var> xs;
  xs.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    xs.push_back(nn::embedding(enc.embedding, ids.subspan(t * batch, batch),
                               scales.empty() ? nullptr : &scales));
  }
  if (train) xs = nn::locked_dropout(xs, rates.input, streams->input.rng(), mode);

  EncoderOutput out;
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const LstmWeights& w = enc.layers[l];
    const Var w_hh = train ? nn::weight_drop(w.w_hh, rates.weight, streams->weight[l].rng(), mode) : w.w_hh;
    Var h = Var::constant(init[l].first);
    Var c = Var::constant(init[l].second);
    std::vector<Var> hs;
    hs.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      std::tie(h, c) = nn::lstm_cell(xs[t], h, c, w.w_ih, w_hh, w.bias);
      hs.push_back(h);
    }
    out.hidden.emplace_back(h.value(), c.value());
    if (train && l + 1 < cfg.n_layers) hs = nn::locked_dropout(hs, rates.between, streams->between[l].rng(), mode);
    xs = std::move(hs);
  }
  out.steps = std::move(xs);
  return out;
}

NamedVars LanguageModel::named_parameters() const {
  NamedVars out = encoder.named_parameters();
  if (!config().tie_weights) out.emplace_back("decoder.weight", decoder_weight);
  out.emplace_back("decoder.bias", decoder_bias);
  return out;
}

LanguageModel new_lm(const AwdLstmConfig& config, std::uint64_t seed) {
  Xoshiro256 rng(stream_seed(seed, "init.lm"));
  LanguageModel lm;
  lm.encoder = AwdLstmEncoder(config, rng);
  if (config.tie_weights) {
    lm.decoder_weight = lm.encoder.embedding;
  } else {
    lm.decoder_weight = Var::leaf(nn::uniform_tensor({config.vocab_size, config.output_dim()}, 0.1, rng));
  }
  lm.decoder_bias = Var::leaf(Tensor({config.vocab_size}));
  return lm;
}

LmOutput lm_forward(const LanguageModel& lm, std::span<const int> ids, std::size_t batch,
                    const HiddenState& h0, Mode mode, DropoutStreams* streams) {
  EncoderOutput enc = run_encoder(lm.encoder, ids, batch, h0, mode, streams);
  const Var stacked = nn::concat_rows(enc.steps);
  return {nn::linear(stacked, lm.decoder_weight, lm.decoder_bias), std::move(enc.hidden)};
}

double perplexity(const LanguageModel& lm, std::span<const int> stream, std::size_t batch,
                  std::size_t bptt) {
  nn::NoGradGuard no_grad;
  const auto windows = bptt_batches(stream, batch, bptt);
  HiddenState hidden = zero_hidden(lm.config(), batch);
  double total_nll = 0.0;
  std::size_t count = 0;
  for (const auto& w : windows) {
    LmOutput out = lm_forward(lm, w.input, batch, hidden, Mode::Eval, nullptr);
    total_nll += nn::softmax_cross_entropy(out.logits, w.target).value()[0] *
                 static_cast<double>(w.target.size());
    count += w.target.size();
    hidden = std::move(out.hidden);
  }
  return std::exp(total_nll / static_cast<double>(count));
}

void set_trainable(LanguageModel& lm, UnfreezeScope scope) {
  for (auto& [name, v] : lm.named_parameters()) v.set_requires_grad(scope == UnfreezeScope::All);
  if (scope == UnfreezeScope::All) return;
  lm.decoder_bias.set_requires_grad(true);
  if (!lm.config().tie_weights) lm.decoder_weight.set_requires_grad(true);
  if (scope == UnfreezeScope::LastLayer) {
    const auto& last = lm.encoder.layers.back();
    for (Var v : {last.w_ih, last.w_hh, last.bias}) v.set_requires_grad(true);
  }
}

}  // namespace codemix::ulmfit
