#include "codemix/ulmfit/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "codemix/errors.hpp"
#include "codemix/neural/ops.hpp"
#include "codemix/neural/optim.hpp"
#include "codemix/textprep.hpp"
#include "codemix/ulmfit/data.hpp"

namespace codemix::ulmfit {

namespace {

std::vector<Var> param_list(const NamedVars& named) {
  std::vector<Var> out;
  for (const auto& entry : named) out.push_back(entry.second);
  return out;
}

double valid_perplexity(const LanguageModel& lm, std::span<const int> stream, std::size_t batch) {
  if (stream.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t vb = std::clamp<std::size_t>(stream.size() / 2, 1, batch);
  return perplexity(lm, stream, vb, lm.config().bptt);
}

nlohmann::json phase_record(const char* phase, const TrainSchedule& schedule,
                            const std::vector<EpochLog>& log, std::uint64_t seed, double multiplicity) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : log) epochs.push_back(to_json(e));
  return {{"phase", phase},
          {"seed", seed},
          {"dropout_multiplicity", multiplicity},
          {"schedule", to_json(schedule)},
          {"epochs", epochs}};
}

}  // namespace

nlohmann::json to_json(const EpochLog& e) {
  return {{"stage", e.stage},
          {"epoch", e.epoch},
          {"scope", scope_name(e.scope)},
          {"lr", e.lr},
          {"train_perplexity", e.train_perplexity},
          {"valid_perplexity", e.valid_perplexity}};
}

std::vector<EpochLog> train_lm(LanguageModel& lm, std::span<const int> train_stream,
                               std::span<const int> valid_stream, const LmTrainOptions& opts) {
  opts.schedule.validate();
  std::vector<EpochLog> log;
  const std::size_t bptt = lm.config().bptt;
  for (std::size_t s = 0; s < opts.schedule.stages.size(); ++s) {
    const TrainStage& stage = opts.schedule.stages[s];
    const auto windows = bptt_batches(train_stream, stage.batch_size, bptt);
    set_trainable(lm, stage.scope);
    const auto params = param_list(lm.named_parameters());
    nn::Adam adam(params);
    DropoutStreams streams(stream_seed(opts.seed, "lm.stage." + std::to_string(s)), lm.config().n_layers);

    for (std::size_t epoch = 1; epoch <= stage.epochs; ++epoch) {
      HiddenState hidden = zero_hidden(lm.config(), stage.batch_size);
      double nll = 0.0;
      std::size_t count = 0;
      for (const auto& w : windows) {
        LmOutput out = lm_forward(lm, w.input, w.batch, hidden, Mode::Train, &streams);
        Var loss = nn::softmax_cross_entropy(out.logits, w.target);
        nll += loss.value()[0] * static_cast<double>(w.target.size());
        count += w.target.size();
        nn::backward(loss);
        if (opts.grad_clip > 0.0) nn::clip_grad_norm(params, opts.grad_clip);
        adam.step(stage.lr);
        adam.zero_grad();
        hidden = std::move(out.hidden);
      }
      EpochLog entry{s, epoch, stage.scope, stage.lr, std::exp(nll / static_cast<double>(count)),
                     valid_perplexity(lm, valid_stream, stage.batch_size)};
      log.push_back(entry);
      if (opts.on_epoch) opts.on_epoch(entry);
    }
  }
  set_trainable(lm, UnfreezeScope::All);
  return log;
}

Checkpoint to_checkpoint(const LanguageModel& lm, const std::string& vocab_fingerprint,
                         nlohmann::json metadata) {
  Checkpoint ckpt;
  ckpt.kind = CheckpointKind::LanguageModel;
  ckpt.lm_config = lm.config();
  ckpt.vocab_fingerprint = vocab_fingerprint;
  ckpt.metadata = std::move(metadata);
  for (const auto& [name, v] : lm.named_parameters()) ckpt.tensors.emplace_back(name, v.value());
  return ckpt;
}

LanguageModel lm_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != CheckpointKind::LanguageModel) {
    throw Error(ErrorKind::CorruptManifest, "expected a language model checkpoint");
  }
  LanguageModel lm = new_lm(ckpt.lm_config, 0);
  for (auto& [name, v] : lm.named_parameters()) {
    const Tensor& t = ckpt.tensor(name);
    if (t.shape() != v.shape()) {
      throw Error(ErrorKind::CorruptManifest, "tensor '" + name + "' has shape " +
                                                  nn::shape_string(t.shape()) + ", config implies " +
                                                  nn::shape_string(v.shape()));
    }
    v.mutable_value() = t;
  }
  return lm;
}

void require_fingerprint(const Checkpoint& ckpt, const UnigramVocab& vocab) {
  const std::string fp = vocab_fingerprint(vocab);
  if (ckpt.vocab_fingerprint != fp) {
    throw Error(ErrorKind::FingerprintMismatch,
                "checkpoint vocab " + ckpt.vocab_fingerprint + " but tokenizer vocab is " + fp);
  }
}

LmRunResult pretrain_lm(AwdLstmConfig config, const UnigramVocab& vocab,
                        std::span<const std::string> lines, const PretrainOptions& opts,
                        std::uint64_t seed, std::span<const std::string> valid_lines) {
  config.vocab_size = ModelVocab(vocab).size();
  config.validate();
  LineSplit split;
  if (valid_lines.empty()) {
    split = split_lines(lines, opts.valid_fraction, seed);
  } else {
    split.train.assign(lines.begin(), lines.end());
    split.valid.assign(valid_lines.begin(), valid_lines.end());
  }
  const auto train_stream = build_stream(vocab, split.train);
  const auto valid_stream = build_stream(vocab, split.valid);

  LmRunResult result{new_lm(config, seed), {}, {}};
  result.log = train_lm(result.model, train_stream, valid_stream,
                        {opts.schedule, stream_seed(seed, "pretrain"), opts.grad_clip, opts.on_epoch});
  nlohmann::json meta = {{"history", nlohmann::json::array({phase_record(
                                         "pretrain", opts.schedule, result.log, seed,
                                         config.dropout_multiplicity)})}};
  result.checkpoint = to_checkpoint(result.model, vocab_fingerprint(vocab), std::move(meta));
  return result;
}

LmRunResult finetune_lm(const Checkpoint& base, const UnigramVocab& vocab,
                        std::span<const std::string> lines, const FinetuneOptions& opts,
                        std::uint64_t seed, std::span<const std::string> valid_lines) {
  require_fingerprint(base, vocab);
  std::vector<std::string> cleaned;
  cleaned.reserve(lines.size());
  for (const auto& l : lines) cleaned.push_back(preprocess(l));
  LineSplit split;
  if (valid_lines.empty()) {
    split = split_lines(cleaned, opts.valid_fraction, seed);
  } else {
    split.train = std::move(cleaned);
    for (const auto& l : valid_lines) split.valid.push_back(preprocess(l));
  }
  const auto train_stream = build_stream(vocab, split.train);
  const auto valid_stream = build_stream(vocab, split.valid);

  LmRunResult result{lm_from_checkpoint(base), {}, {}};
  result.model.config().dropout_multiplicity = opts.dropout_multiplicity;
  result.log = train_lm(result.model, train_stream, valid_stream,
                        {opts.schedule, stream_seed(seed, "finetune"), opts.grad_clip, opts.on_epoch});
  nlohmann::json meta = base.metadata.is_object() ? base.metadata : nlohmann::json::object();
  if (!meta.contains("history") || !meta["history"].is_array()) meta["history"] = nlohmann::json::array();
  meta["history"].push_back(
      phase_record("finetune", opts.schedule, result.log, seed, opts.dropout_multiplicity));
  result.checkpoint = to_checkpoint(result.model, base.vocab_fingerprint, std::move(meta));
  return result;
}

}  // namespace codemix::ulmfit
