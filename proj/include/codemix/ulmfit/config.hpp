#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace codemix::ulmfit {

/// Dropout rates of the four AWD-LSTM sites.
struct DropoutRates {
  double embedding = 0.02;
  double input = 0.1;
  double weight = 0.2;   // DropConnect on hidden-to-hidden weights
  double between = 0.2;  // locked dropout between stacked LSTMs

  bool operator==(const DropoutRates&) const = default;
};

/// clamp(m * base, 0, 0.99) for every site.
DropoutRates scale_dropouts(const DropoutRates& base, double multiplicity);

struct AwdLstmConfig {
  std::size_t vocab_size = 0;
  std::size_t embedding_dim = 400;
  std::size_t hidden_dim = 1152;
  std::size_t n_layers = 3;
  DropoutRates base_dropouts;
  double dropout_multiplicity = 1.0;
  std::size_t bptt = 70;
  bool tie_weights = true;

  /// Throws InvalidConfig.
  void validate() const;

  DropoutRates effective_dropouts() const {
    return scale_dropouts(base_dropouts, dropout_multiplicity);
  }
  std::size_t layer_input_dim(std::size_t layer) const;
  /// The last layer projects back to embedding_dim when weights are tied.
  std::size_t layer_hidden_dim(std::size_t layer) const;
  std::size_t output_dim() const { return layer_hidden_dim(n_layers - 1); }

  bool operator==(const AwdLstmConfig&) const = default;
};

/// Full-scale architecture: 400-dim embeddings, 1152 hidden units, 3 layers.
AwdLstmConfig full_scale_lm_config(std::size_t vocab_size);

enum class Pooling { Concat, Last };

struct ClassifierConfig {
  std::size_t head_hidden_dim = 50;
  std::pair<double, double> head_dropouts{0.4, 0.1};
  std::size_t n_classes = 2;
  Pooling pooling = Pooling::Concat;
  std::size_t max_tokens = 512;

  void validate() const;
  std::size_t head_input_dim(std::size_t encoder_dim) const {
    return pooling == Pooling::Concat ? 3 * encoder_dim : encoder_dim;
  }

  bool operator==(const ClassifierConfig&) const = default;
};

enum class UnfreezeScope { HeadOnly, LastLayer, All };

struct TrainStage {
  UnfreezeScope scope = UnfreezeScope::All;
  std::size_t epochs = 1;
  double lr = 1e-3;
  std::size_t batch_size = 16;

  bool operator==(const TrainStage&) const = default;
};

struct TrainSchedule {
  std::vector<TrainStage> stages;

  /// Throws InvalidConfig.
  void validate() const;
  bool operator==(const TrainSchedule&) const = default;
};

inline constexpr double kFinetuneMultiplicity = 0.3;

TrainSchedule default_pretrain_schedule();
/// Last layer for 1 epoch at 1e-2, then everything for 5 epochs at 1e-3; batch 64.
TrainSchedule default_finetune_schedule();
/// Head, then last layer, then everything (5 epochs at 1e-3); batch 16.
TrainSchedule default_classifier_schedule();

struct ClassifierPreset {
  std::string name;
  double dropout_multiplicity;
  std::size_t batch_size;
  TrainSchedule schedule;
};

/// Hyperparameters used for the shared-task submissions.
std::span<const ClassifierPreset> classifier_presets();
/// Throws InvalidConfig for an unknown name.
const ClassifierPreset& classifier_preset(std::string_view name);

std::string_view scope_name(UnfreezeScope scope);
UnfreezeScope parse_scope(std::string_view name);
std::string_view pooling_name(Pooling pooling);
Pooling parse_pooling(std::string_view name);

nlohmann::json to_json(const AwdLstmConfig& c);
nlohmann::json to_json(const ClassifierConfig& c);
nlohmann::json to_json(const TrainSchedule& s);
AwdLstmConfig lm_config_from_json(const nlohmann::json& j);
ClassifierConfig classifier_config_from_json(const nlohmann::json& j);
TrainSchedule schedule_from_json(const nlohmann::json& j);

}  // namespace codemix::ulmfit
