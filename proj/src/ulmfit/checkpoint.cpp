#include "codemix/ulmfit/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

#include "codemix/corpus.hpp"
#include "codemix/errors.hpp"

namespace codemix::ulmfit {

namespace {

[[noreturn]] void corrupt(const std::string& what) { throw Error(ErrorKind::CorruptManifest, what); }

void append_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  char buf[8];
  std::memcpy(buf, &bits, 8);
  out.append(buf, 8);
}

double read_le(const char* p) {
  std::uint64_t bits;
  std::memcpy(&bits, p, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  return std::bit_cast<double>(bits);
}

CheckpointKind parse_kind(const std::string& s) {
  if (s == "language_model") return CheckpointKind::LanguageModel;
  if (s == "classifier") return CheckpointKind::Classifier;
  corrupt("unknown checkpoint kind '" + s + "'");
}

}  // namespace

std::string_view kind_name(CheckpointKind kind) {
  return kind == CheckpointKind::LanguageModel ? "language_model" : "classifier";
}

const nn::Tensor& Checkpoint::tensor(std::string_view name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  corrupt("checkpoint has no tensor '" + std::string(name) + "'");
}

bool Checkpoint::has_tensor(std::string_view name) const {
  for (const auto& entry : tensors) {
    if (entry.first == name) return true;
  }
  return false;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json table = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    const std::size_t nbytes = t.size() * sizeof(double);
    table.push_back({{"name", name}, {"shape", t.shape()}, {"dtype", "f64"}, {"offset", offset},
                     {"nbytes", nbytes}});
    offset += nbytes;
  }
  nlohmann::json manifest = {
      {"format_version", kCheckpointVersion},
      {"kind", kind_name(ckpt.kind)},
      {"lm_config", to_json(ckpt.lm_config)},
      {"classifier_config",
       ckpt.classifier_config ? to_json(*ckpt.classifier_config) : nlohmann::json(nullptr)},
      {"vocab_fingerprint", ckpt.vocab_fingerprint},
      {"metadata", ckpt.metadata},
      {"tensors", table},
  };
  std::string out = manifest.dump();
  out.push_back('\n');
  out.reserve(out.size() + offset);
  for (const auto& entry : ckpt.tensors) {
    for (double v : entry.second.values()) append_le(out, v);
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  const auto newline = bytes.find('\n');
  if (newline == std::string_view::npos) corrupt("manifest line is not terminated");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(0, newline));
  } catch (const nlohmann::json::exception& e) {
    corrupt(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!manifest.is_object()) corrupt("manifest is not an object");

  const auto version = manifest.find("format_version");
  if (version == manifest.end() || !version->is_number_integer()) corrupt("missing format_version");
  if (version->get<int>() != kCheckpointVersion) {
    throw Error(ErrorKind::VersionMismatch,
                "checkpoint format " + std::to_string(version->get<int>()) + ", expected " +
                    std::to_string(kCheckpointVersion),
                version->get<int>());
  }

  const std::string_view payload = bytes.substr(newline + 1);
  Checkpoint ckpt;
  try {
    ckpt.kind = parse_kind(manifest.at("kind").get<std::string>());
    ckpt.lm_config = lm_config_from_json(manifest.at("lm_config"));
    const auto& cc = manifest.at("classifier_config");
    if (!cc.is_null()) ckpt.classifier_config = classifier_config_from_json(cc);
    ckpt.vocab_fingerprint = manifest.at("vocab_fingerprint").get<std::string>();
    ckpt.metadata = manifest.at("metadata");
    for (const auto& entry : manifest.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<nn::Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto nbytes = entry.at("nbytes").get<std::size_t>();
      if (entry.at("dtype").get<std::string>() != "f64") corrupt("tensor '" + name + "' is not f64");
      if (nbytes != nn::shape_size(shape) * sizeof(double)) {
        corrupt("tensor '" + name + "' byte count does not match its shape");
      }
      if (offset > payload.size() || nbytes > payload.size() - offset) {
        throw Error(ErrorKind::TruncatedPayload,
                    "tensor '" + name + "' needs bytes up to " + std::to_string(offset + nbytes) +
                        ", payload has " + std::to_string(payload.size()),
                    static_cast<std::int64_t>(payload.size()));
      }
      std::vector<double> values(nbytes / sizeof(double));
      for (std::size_t i = 0; i < values.size(); ++i) values[i] = read_le(payload.data() + offset + 8 * i);
      ckpt.tensors.emplace_back(name, nn::Tensor(shape, std::move(values)));
    }
  } catch (const nlohmann::json::exception& e) {
    corrupt(std::string("manifest field error: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidConfig) corrupt(e.what());
    throw;
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_file(path)); }

}  // namespace codemix::ulmfit
