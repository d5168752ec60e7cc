#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "codemix/tokenizer.hpp"
#include "codemix/ulmfit/checkpoint.hpp"
#include "codemix/ulmfit/model.hpp"

namespace codemix::ulmfit {

struct EpochLog {
  std::size_t stage = 0;
  std::size_t epoch = 0;  // 1-based within the stage
  UnfreezeScope scope = UnfreezeScope::All;
  double lr = 0.0;
  double train_perplexity = 0.0;  // from the train-mode losses of the epoch
  double valid_perplexity = 0.0;  // NaN without validation data
};

using EpochCallback = std::function<void(const EpochLog&)>;

struct LmTrainOptions {
  TrainSchedule schedule;
  std::uint64_t seed = 0;
  double grad_clip = 0.0;  // 0 disables clipping
  EpochCallback on_epoch;
};

/// Stages run in order; each gets a fresh Adam state and constant lr. The
/// hidden state is carried across windows (detached) and reset every epoch.
std::vector<EpochLog> train_lm(LanguageModel& lm, std::span<const int> train_stream,
                               std::span<const int> valid_stream, const LmTrainOptions& opts);

Checkpoint to_checkpoint(const LanguageModel& lm, const std::string& vocab_fingerprint,
                         nlohmann::json metadata);
/// Throws CorruptManifest for a non-LM checkpoint or mismatched tensors.
LanguageModel lm_from_checkpoint(const Checkpoint& ckpt);

struct PretrainOptions {
  TrainSchedule schedule = default_pretrain_schedule();
  double valid_fraction = 0.2;
  double grad_clip = 0.0;
  EpochCallback on_epoch;
};

struct FinetuneOptions {
  TrainSchedule schedule = default_finetune_schedule();
  double dropout_multiplicity = kFinetuneMultiplicity;
  double valid_fraction = 0.2;
  double grad_clip = 0.0;
  EpochCallback on_epoch;
};

struct LmRunResult {
  LanguageModel model;
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
};

/// Trains a fresh model on the lines. vocab_size is taken from the tokenizer;
/// without explicit valid_lines a seeded valid_fraction of the lines is held out.
LmRunResult pretrain_lm(AwdLstmConfig config, const UnigramVocab& vocab,
                        std::span<const std::string> lines, const PretrainOptions& opts,
                        std::uint64_t seed, std::span<const std::string> valid_lines = {});

/// Continues training a checkpoint on target-domain lines (after preprocess).
/// Throws FingerprintMismatch when the checkpoint was built with another vocab.
LmRunResult finetune_lm(const Checkpoint& base, const UnigramVocab& vocab,
                        std::span<const std::string> lines, const FinetuneOptions& opts,
                        std::uint64_t seed, std::span<const std::string> valid_lines = {});

/// Throws FingerprintMismatch unless the checkpoint matches the vocab.
void require_fingerprint(const Checkpoint& ckpt, const UnigramVocab& vocab);

nlohmann::json to_json(const EpochLog& e);

}  // namespace codemix::ulmfit
