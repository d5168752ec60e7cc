#include "codemix/ulmfit/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "codemix/errors.hpp"
#include "codemix/metrics.hpp"
#include "codemix/neural/ops.hpp"
#include "codemix/neural/optim.hpp"
#include "codemix/ulmfit/data.hpp"
#include "codemix/ulmfit/training.hpp"

namespace codemix::ulmfit {

namespace {

double head_rate(double multiplicity, double base) { return std::clamp(multiplicity * base, 0.0, 0.99); }

Var head_dropout(const Var& x, double rate, Mode mode, DropoutStreams* streams) {
  if (mode == Mode::Eval || rate == 0.0) return x;
  return nn::mul_mask(x, nn::keep_mask(x.shape(), rate, streams->head.rng()));
}

std::vector<Tensor> snapshot(Classifier& clf) {
  std::vector<Tensor> out;
  for (const auto& entry : clf.named_parameters()) out.push_back(entry.second.value());
  for (const auto& entry : clf.buffers()) out.push_back(*entry.second);
  return out;
}

void restore(Classifier& clf, const std::vector<Tensor>& saved) {
  std::size_t k = 0;
  for (auto& entry : clf.named_parameters()) entry.second.mutable_value() = saved[k++];
  for (auto& entry : clf.buffers()) *entry.second = saved[k++];
}

}  // namespace

NamedVars Classifier::head_parameters() const {
  return {{"head.bn1.gamma", bn1.gamma}, {"head.bn1.beta", bn1.beta},
          {"head.lin1.weight", lin1.weight}, {"head.lin1.bias", lin1.bias},
          {"head.bn2.gamma", bn2.gamma}, {"head.bn2.beta", bn2.beta},
          {"head.lin2.weight", lin2.weight}, {"head.lin2.bias", lin2.bias}};
}

NamedVars Classifier::named_parameters() const {
  NamedVars out = encoder.named_parameters();
  for (auto& entry : head_parameters()) out.push_back(std::move(entry));
  return out;
}

std::vector<std::pair<std::string, Tensor*>> Classifier::buffers() {
  return {{"head.bn1.running_mean", &bn1.running_mean},
          {"head.bn1.running_var", &bn1.running_var},
          {"head.bn2.running_mean", &bn2.running_mean},
          {"head.bn2.running_var", &bn2.running_var}};
}

Classifier build_classifier(const Checkpoint& lm_ckpt, const ClassifierConfig& config,
                            std::uint64_t seed, std::string_view expected_fingerprint) {
  if (!expected_fingerprint.empty() && lm_ckpt.vocab_fingerprint != expected_fingerprint) {
    throw Error(ErrorKind::FingerprintMismatch, "checkpoint vocab " + lm_ckpt.vocab_fingerprint +
                                                    " but expected " + std::string(expected_fingerprint));
  }
  config.validate();
  Classifier clf;
  clf.encoder = lm_from_checkpoint(lm_ckpt).encoder;
  clf.config = config;
  clf.vocab_fingerprint = lm_ckpt.vocab_fingerprint;
  Xoshiro256 rng(stream_seed(seed, "init.head"));
  const std::size_t in = clf.head_input_dim();
  clf.bn1 = nn::BatchNorm1d(in);
  clf.lin1 = nn::Linear(in, config.head_hidden_dim, rng);
  clf.bn2 = nn::BatchNorm1d(config.head_hidden_dim);
  clf.lin2 = nn::Linear(config.head_hidden_dim, config.n_classes, rng);
  return clf;
}

void set_trainable(Classifier& clf, UnfreezeScope scope) {
  for (auto& entry : clf.encoder.named_parameters()) entry.second.set_requires_grad(scope == UnfreezeScope::All);
  for (auto& entry : clf.head_parameters()) entry.second.set_requires_grad(true);
  if (scope == UnfreezeScope::LastLayer) {
    const auto& last = clf.encoder.layers.back();
    for (Var v : {last.w_ih, last.w_hh, last.bias}) v.set_requires_grad(true);
  }
}

std::vector<int> encode_text(const UnigramVocab& vocab, std::string_view text, std::size_t max_tokens) {
  auto ids = viterbi_encode(vocab, preprocess(text)).ids;
  if (ids.size() > max_tokens) ids.resize(max_tokens);
  if (ids.empty()) ids.push_back(ModelVocab(vocab).pad());
  return ids;
}

std::vector<EncodedExample> encode_examples(const UnigramVocab& vocab,
                                            std::span<const LabeledExample> data,
                                            std::size_t max_tokens) {
  std::vector<EncodedExample> out;
  out.reserve(data.size());
  for (const auto& ex : data) out.push_back({encode_text(vocab, ex.text, max_tokens), static_cast<int>(ex.label)});
  return out;
}

PaddedBatch make_batch(std::span<const EncodedExample> data, std::span<const std::size_t> rows,
                       int pad_id) {
  PaddedBatch b;
  b.batch = rows.size();
  for (auto r : rows) b.steps = std::max(b.steps, data[r].ids.size());
  b.ids.assign(b.steps * b.batch, pad_id);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const auto& ex = data[rows[j]];
    for (std::size_t t = 0; t < ex.ids.size(); ++t) b.ids[t * b.batch + j] = ex.ids[t];
    b.lengths.push_back(ex.ids.size());
    b.labels.push_back(ex.label);
  }
  return b;
}

Var classifier_forward(Classifier& clf, const PaddedBatch& batch, Mode mode, DropoutStreams* streams) {
  const EncoderOutput enc = run_encoder(clf.encoder, batch.ids, batch.batch, {}, mode, streams);
  Var pooled;
  if (clf.config.pooling == Pooling::Concat) {
    const std::vector<Var> parts{nn::gather_last(enc.steps, batch.lengths),
                                 nn::masked_max_pool(enc.steps, batch.lengths),
                                 nn::masked_mean_pool(enc.steps, batch.lengths)};
    pooled = nn::concat_cols(parts);
  } else {
    pooled = nn::gather_last(enc.steps, batch.lengths);
  }
  const double m = clf.encoder.config.dropout_multiplicity;
  Var x = nn::batch_norm(pooled, clf.bn1, mode);
  x = head_dropout(x, head_rate(m, clf.config.head_dropouts.first), mode, streams);
  x = nn::relu(clf.lin1(x));
  x = nn::batch_norm(x, clf.bn2, mode);
  x = head_dropout(x, head_rate(m, clf.config.head_dropouts.second), mode, streams);
  return clf.lin2(x);
}

std::vector<Prediction> predict_encoded(Classifier& clf, std::span<const EncodedExample> data,
                                        std::size_t batch_size) {
  nn::NoGradGuard no_grad;
  std::vector<Prediction> out;
  out.reserve(data.size());
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    rows.resize(std::min(batch_size, data.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    const PaddedBatch batch = make_batch(data, rows, clf.pad_id());
    const Tensor probs = nn::softmax(classifier_forward(clf, batch, Mode::Eval, nullptr).value());
    for (std::size_t b = 0; b < batch.batch; ++b) {
      Prediction p;
      p.probabilities.assign(probs.data() + b * probs.cols(), probs.data() + (b + 1) * probs.cols());
      const auto best = std::max_element(p.probabilities.begin(), p.probabilities.end()) -
                        p.probabilities.begin();
      p.label = best == 1 ? Label::Offensive : Label::NotOffensive;
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<Prediction> predict(Classifier& clf, const UnigramVocab& vocab,
                                std::span<const std::string> texts) {
  std::vector<EncodedExample> data;
  data.reserve(texts.size());
  for (const auto& t : texts) data.push_back({encode_text(vocab, t, clf.config.max_tokens), 0});
  return predict_encoded(clf, data);
}

Prediction predict(Classifier& clf, const UnigramVocab& vocab, std::string_view text) {
  const std::vector<EncodedExample> one{{encode_text(vocab, text, clf.config.max_tokens), 0}};
  return predict_encoded(clf, one).front();
}

ClassifierTrainResult train_classifier(Classifier& clf, std::span<const EncodedExample> train,
                                       std::span<const EncodedExample> valid,
                                       const ClassifierTrainOptions& opts) {
  opts.schedule.validate();
  std::set<int> classes;
  for (const auto& ex : train) classes.insert(ex.label);
  if (classes.size() < 2) {
    throw Error(ErrorKind::SingleClassTrainSet, "training data needs at least two classes",
                static_cast<std::int64_t>(classes.size()));
  }
  clf.encoder.config.dropout_multiplicity = opts.dropout_multiplicity;

  std::vector<std::string> valid_gold;
  for (const auto& ex : valid) valid_gold.emplace_back(label_name(static_cast<Label>(ex.label)));

  ClassifierTrainResult result;
  double best_f1 = -1.0;
  std::vector<Tensor> best_state;
  Xoshiro256 shuffle_rng(stream_seed(opts.seed, "clf.shuffle"));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t s = 0; s < opts.schedule.stages.size(); ++s) {
    const TrainStage& stage = opts.schedule.stages[s];
    set_trainable(clf, stage.scope);
    std::vector<Var> params;
    for (const auto& entry : clf.named_parameters()) params.push_back(entry.second);
    nn::Adam adam(params);
    DropoutStreams streams(stream_seed(opts.seed, "clf.stage." + std::to_string(s)),
                           clf.encoder.config.n_layers);

    for (std::size_t epoch = 1; epoch <= stage.epochs; ++epoch) {
      shuffle_in_place(order, shuffle_rng);
      double loss_sum = 0.0;
      std::size_t n_batches = 0;
      for (std::size_t start = 0; start < order.size(); start += stage.batch_size) {
        const std::size_t n = std::min(stage.batch_size, order.size() - start);
        if (n < 2) continue;
        const PaddedBatch batch =
            make_batch(train, std::span<const std::size_t>(order).subspan(start, n), clf.pad_id());
        Var loss = nn::softmax_cross_entropy(classifier_forward(clf, batch, Mode::Train, &streams),
                                             batch.labels);
        loss_sum += loss.value()[0];
        ++n_batches;
        nn::backward(loss);
        adam.step(stage.lr);
        adam.zero_grad();
      }

      ClassifierEpochLog entry{s, epoch, stage.scope, stage.lr,
                               n_batches ? loss_sum / static_cast<double>(n_batches) : 0.0,
                               std::numeric_limits<double>::quiet_NaN(),
                               std::numeric_limits<double>::quiet_NaN()};
      if (!valid.empty()) {
        std::vector<std::string> preds;
        for (const auto& p : predict_encoded(clf, valid)) preds.emplace_back(label_name(p.label));
        const EvalReport report = weighted_prf(confusion(valid_gold, preds));
        entry.valid_f1 = report.weighted_f1;
        entry.valid_accuracy = report.accuracy;
        if (opts.select_best_epoch && report.weighted_f1 > best_f1) {
          best_f1 = report.weighted_f1;
          best_state = snapshot(clf);
          result.best_index = result.log.size();
        }
      }
      if (!opts.select_best_epoch || valid.empty()) result.best_index = result.log.size();
      result.log.push_back(entry);
      if (opts.on_epoch) opts.on_epoch(entry);
    }
  }
  if (!best_state.empty()) restore(clf, best_state);
  set_trainable(clf, UnfreezeScope::All);
  return result;
}

Checkpoint to_checkpoint(Classifier& clf, nlohmann::json metadata) {
  Checkpoint ckpt;
  ckpt.kind = CheckpointKind::Classifier;
  ckpt.lm_config = clf.encoder.config;
  ckpt.classifier_config = clf.config;
  ckpt.vocab_fingerprint = clf.vocab_fingerprint;
  ckpt.metadata = std::move(metadata);
  for (const auto& [name, v] : clf.named_parameters()) ckpt.tensors.emplace_back(name, v.value());
  for (const auto& [name, t] : clf.buffers()) ckpt.tensors.emplace_back(name, *t);
  return ckpt;
}

Classifier classifier_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != CheckpointKind::Classifier || !ckpt.classifier_config) {
    throw Error(ErrorKind::CorruptManifest, "expected a classifier checkpoint");
  }
  Classifier clf;
  Xoshiro256 rng(0);
  clf.encoder = AwdLstmEncoder(ckpt.lm_config, rng);
  clf.config = *ckpt.classifier_config;
  clf.vocab_fingerprint = ckpt.vocab_fingerprint;
  const std::size_t in = clf.head_input_dim();
  clf.bn1 = nn::BatchNorm1d(in);
  clf.lin1 = nn::Linear(in, clf.config.head_hidden_dim, rng);
  clf.bn2 = nn::BatchNorm1d(clf.config.head_hidden_dim);
  clf.lin2 = nn::Linear(clf.config.head_hidden_dim, clf.config.n_classes, rng);
  auto load = [&](const std::string& name, Tensor& dst) {
    const Tensor& t = ckpt.tensor(name);
    if (t.shape() != dst.shape()) {
      throw Error(ErrorKind::CorruptManifest, "tensor '" + name + "' has shape " +
                                                  nn::shape_string(t.shape()) + ", config implies " +
                                                  nn::shape_string(dst.shape()));
    }
    dst = t;
  };
  for (auto& [name, v] : clf.named_parameters()) load(name, v.mutable_value());
  for (auto& [name, t] : clf.buffers()) load(name, *t);
  return clf;
}

nlohmann::json to_json(const ClassifierEpochLog& e) {
  return {{"stage", e.stage},       {"epoch", e.epoch},         {"scope", scope_name(e.scope)},
          {"lr", e.lr},             {"train_loss", e.train_loss}, {"valid_f1", e.valid_f1},
          {"valid_accuracy", e.valid_accuracy}};
}

}  // namespace codemix::ulmfit
