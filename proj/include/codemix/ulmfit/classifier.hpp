#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "codemix/textprep.hpp"
#include "codemix/tokenizer.hpp"
#include "codemix/ulmfit/checkpoint.hpp"
#include "codemix/ulmfit/model.hpp"

namespace codemix::ulmfit {

/// Pretrained encoder plus the two-block head:
/// pool -> [BN -> dropout -> linear -> ReLU] -> [BN -> dropout -> linear].
struct Classifier {
  AwdLstmEncoder encoder;
  ClassifierConfig config;
  nn::BatchNorm1d bn1;
  nn::Linear lin1;
  nn::BatchNorm1d bn2;
  nn::Linear lin2;
  std::string vocab_fingerprint;

  int pad_id() const { return static_cast<int>(encoder.config.vocab_size) - 1; }
  std::size_t head_input_dim() const { return config.head_input_dim(encoder.config.output_dim()); }

  NamedVars named_parameters() const;
  NamedVars head_parameters() const;
  /// BatchNorm running statistics.
  std::vector<std::pair<std::string, Tensor*>> buffers();
};

/// Copies the encoder out of a language-model checkpoint and initializes a
/// fresh head. Throws FingerprintMismatch when `expected_fingerprint` is
/// non-empty and differs from the checkpoint's.
Classifier build_classifier(const Checkpoint& lm_ckpt, const ClassifierConfig& config,
                            std::uint64_t seed, std::string_view expected_fingerprint = {});

void set_trainable(Classifier& clf, UnfreezeScope scope);

/// preprocess -> tokenize -> truncate to max_tokens; empty input becomes one pad.
std::vector<int> encode_text(const UnigramVocab& vocab, std::string_view text, std::size_t max_tokens);

struct EncodedExample {
  std::vector<int> ids;
  int label = 0;
};

std::vector<EncodedExample> encode_examples(const UnigramVocab& vocab,
                                            std::span<const LabeledExample> data,
                                            std::size_t max_tokens);

/// Right-padded, time-major batch.
struct PaddedBatch {
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::vector<int> ids;  // ids[t * batch + b]
  std::vector<std::size_t> lengths;
  std::vector<int> labels;
};

PaddedBatch make_batch(std::span<const EncodedExample> data, std::span<const std::size_t> rows,
                       int pad_id);

/// Class logits [batch x n_classes]. Pad positions never enter the pooling.
Var classifier_forward(Classifier& clf, const PaddedBatch& batch, Mode mode,
                       DropoutStreams* streams);

struct ClassifierEpochLog {
  std::size_t stage = 0;
  std::size_t epoch = 0;
  UnfreezeScope scope = UnfreezeScope::All;
  double lr = 0.0;
  double train_loss = 0.0;
  double valid_f1 = 0.0;        // weighted F1; NaN without validation data
  double valid_accuracy = 0.0;  // NaN without validation data
};

struct ClassifierTrainOptions {
  double dropout_multiplicity = 0.5;
  TrainSchedule schedule = default_classifier_schedule();
  bool select_best_epoch = true;  // restore the epoch with the best valid F1
  std::uint64_t seed = 0;
  std::function<void(const ClassifierEpochLog&)> on_epoch;
};

struct ClassifierTrainResult {
  std::vector<ClassifierEpochLog> log;
  std::size_t best_index = 0;  // into log
};

/// Gradual unfreezing over the schedule stages. A trailing batch of one
/// example is skipped (batch norm needs two rows). Throws SingleClassTrainSet.
ClassifierTrainResult train_classifier(Classifier& clf, std::span<const EncodedExample> train,
                                       std::span<const EncodedExample> valid,
                                       const ClassifierTrainOptions& opts);

struct Prediction {
  Label label = Label::NotOffensive;
  std::vector<double> probabilities;  // indexed by class id
};

/// Eval-mode probabilities for pre-encoded examples.
std::vector<Prediction> predict_encoded(Classifier& clf, std::span<const EncodedExample> data,
                                        std::size_t batch_size = 64);
std::vector<Prediction> predict(Classifier& clf, const UnigramVocab& vocab,
                                std::span<const std::string> texts);
Prediction predict(Classifier& clf, const UnigramVocab& vocab, std::string_view text);

Checkpoint to_checkpoint(Classifier& clf, nlohmann::json metadata);
/// Throws CorruptManifest for a non-classifier checkpoint.
Classifier classifier_from_checkpoint(const Checkpoint& ckpt);

nlohmann::json to_json(const ClassifierEpochLog& e);

}  // namespace codemix::ulmfit
