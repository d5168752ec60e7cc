#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "codemix/neural/tensor.hpp"
#include "codemix/ulmfit/config.hpp"

namespace codemix::ulmfit {

inline constexpr int kCheckpointVersion = 1;

enum class CheckpointKind { LanguageModel, Classifier };

/// In-memory form of a checkpoint file: one line of UTF-8 JSON (configs,
/// fingerprint, metadata, tensor table) followed by raw little-endian doubles.
struct Checkpoint {
  CheckpointKind kind = CheckpointKind::LanguageModel;
  AwdLstmConfig lm_config;
  std::optional<ClassifierConfig> classifier_config;
  std::string vocab_fingerprint;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<std::pair<std::string, nn::Tensor>> tensors;

  /// Throws CorruptManifest when the tensor is absent.
  const nn::Tensor& tensor(std::string_view name) const;
  bool has_tensor(std::string_view name) const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws VersionMismatch, CorruptManifest, TruncatedPayload.
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string_view kind_name(CheckpointKind kind);

}  // namespace codemix::ulmfit
