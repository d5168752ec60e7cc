#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "codemix/markov.hpp"
#include "codemix/tokenizer.hpp"
#include "codemix/ulmfit/classifier.hpp"
#include "codemix/ulmfit/training.hpp"

namespace codemix::cli {

inline constexpr int kConfigVersion = 1;
inline constexpr std::uint64_t kDefaultSeed = 0;

enum class ValueKind { Int, Real, Bool, String };

/// One configurable setting. The JSON key is `key` inside `section` (the
/// top-level object for an empty section); the flag is `--` + key with '_'
/// replaced by '-'.
struct Setting {
  std::string_view section;
  std::string_view key;
  ValueKind kind;
  nlohmann::json default_value;
  std::string_view help;
};

std::span<const Setting> settings();
std::string flag_name(std::string_view key);

/// Resolved settings: defaults, overlaid by a config file, overlaid by flags.
class PipelineConfig {
 public:
  PipelineConfig();

  /// Rejects unknown sections/keys, wrong value types and a missing or
  /// different config_version (InvalidConfig).
  void merge_file_json(const nlohmann::json& j);
  void merge_file(const std::filesystem::path& path);
  /// Parses a flag value according to the setting's kind (InvalidConfig).
  void set_from_string(std::string_view section, std::string_view key, std::string_view text);

  bool is_explicit(std::string_view section, std::string_view key) const;

  std::int64_t get_int(std::string_view section, std::string_view key) const;
  std::size_t get_size(std::string_view section, std::string_view key) const;
  double get_real(std::string_view section, std::string_view key) const;
  bool get_bool(std::string_view section, std::string_view key) const;
  std::string get_string(std::string_view section, std::string_view key) const;

  /// Flag or config seed, else CODEMIX_SEED, else kDefaultSeed.
  std::uint64_t seed() const;

  /// Complete config file equivalent of the current values.
  nlohmann::json to_json() const;

 private:
  const nlohmann::json& value(std::string_view section, std::string_view key) const;
  nlohmann::json values_;
  std::set<std::string> explicit_;
};

TransitionMatrix transition_matrix(const PipelineConfig& cfg);
MixState initial_state(const PipelineConfig& cfg);
TrainerOptions trainer_options(const PipelineConfig& cfg);
ulmfit::AwdLstmConfig lm_config(const PipelineConfig& cfg);
ulmfit::PretrainOptions pretrain_options(const PipelineConfig& cfg);
ulmfit::FinetuneOptions finetune_options(const PipelineConfig& cfg);
ulmfit::ClassifierConfig classifier_config(const PipelineConfig& cfg);
/// A named preset supplies multiplicity and batch size unless those are set explicitly.
ulmfit::ClassifierTrainOptions classifier_train_options(const PipelineConfig& cfg);

}  // namespace codemix::cli
