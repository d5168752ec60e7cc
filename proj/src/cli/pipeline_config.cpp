#include "codemix/cli/pipeline_config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <limits>
#include <vector>

#include "codemix/corpus.hpp"
#include "codemix/errors.hpp"

namespace codemix::cli {

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); }

std::string qualified(std::string_view section, std::string_view key) {
  return section.empty() ? std::string(key) : std::string(section) + "." + std::string(key);
}

const Setting* find_setting(std::string_view section, std::string_view key) {
  for (const auto& s : settings()) {
    if (s.section == section && s.key == key) return &s;
  }
  return nullptr;
}

bool is_section(std::string_view name) {
  return std::any_of(settings().begin(), settings().end(),
                     [&](const Setting& s) { return !s.section.empty() && s.section == name; });
}

bool type_matches(const Setting& s, const nlohmann::json& v) {
  if (s.section.empty() && s.key == "seed") return v.is_null() || v.is_number_unsigned();
  switch (s.kind) {
    case ValueKind::Int: return v.is_number_integer();
    case ValueKind::Real: return v.is_number();
    case ValueKind::Bool: return v.is_boolean();
    case ValueKind::String: return v.is_string();
  }
  return false;
}

std::uint64_t parse_u64(std::string_view text, const std::string& what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    invalid(what + ": '" + std::string(text) + "' is not a non-negative integer");
  }
  return v;
}

}  // namespace

std::span<const Setting> settings() {
  using J = nlohmann::json;
  static const std::vector<Setting> table = {
      {"", "seed", ValueKind::Int, J(nullptr), "Global seed for every random stream"},

      {"synthesize", "matrix", ValueKind::String, "model1",
       "Transition matrix: model1, model2, identity or p1,p2,p3,q1,q2,q3,r1,r2,r3"},
      {"synthesize", "initial_state", ValueKind::String, "native",
       "State of the first sentence: native, translated or transliterated"},

      {"tokenizer", "vocab_size", ValueKind::Int, 8000, "Target number of scored pieces"},
      {"tokenizer", "max_piece_len", ValueKind::Int, 16, "Longest piece in code points"},
      {"tokenizer", "seed_size", ValueKind::Int, 0, "Seed vocabulary size (0 = 4 x vocab size)"},
      {"tokenizer", "keep_fraction", ValueKind::Real, 0.75, "Share of prunable pieces kept per round"},
      {"tokenizer", "em_rounds_per_prune", ValueKind::Int, 2, "EM rounds before each pruning step"},
      {"tokenizer", "final_em_rounds", ValueKind::Int, 2, "EM rounds after the last pruning step"},

      {"model", "embedding_dim", ValueKind::Int, 400, "Embedding size"},
      {"model", "hidden_dim", ValueKind::Int, 1152, "LSTM hidden units per layer"},
      {"model", "n_layers", ValueKind::Int, 3, "Stacked LSTM layers"},
      {"model", "bptt", ValueKind::Int, 70, "Backpropagation-through-time window"},
      {"model", "tie_weights", ValueKind::Bool, true, "Share embedding and decoder weights"},
      {"model", "dropout_embedding", ValueKind::Real, 0.02, "Base embedding dropout"},
      {"model", "dropout_input", ValueKind::Real, 0.1, "Base input dropout"},
      {"model", "dropout_weight", ValueKind::Real, 0.2, "Base hidden-to-hidden weight dropout"},
      {"model", "dropout_between", ValueKind::Real, 0.2, "Base dropout between LSTM layers"},
      {"model", "dropout_multiplicity", ValueKind::Real, 1.0, "Scale applied to all base dropouts"},

      {"pretrain", "epochs", ValueKind::Int, 10, "Pretraining epochs"},
      {"pretrain", "lr", ValueKind::Real, 5e-3, "Pretraining learning rate"},
      {"pretrain", "batch_size", ValueKind::Int, 32, "Pretraining batch size"},
      {"pretrain", "valid_fraction", ValueKind::Real, 0.2, "Held-out share without --valid"},
      {"pretrain", "grad_clip", ValueKind::Real, 0.0, "Gradient norm clip (0 = off)"},

      {"finetune", "last_layer_epochs", ValueKind::Int, 1, "Epochs with only the last layer trainable"},
      {"finetune", "last_layer_lr", ValueKind::Real, 1e-2, "Learning rate of the last-layer stage"},
      {"finetune", "epochs", ValueKind::Int, 5, "Epochs with every layer trainable"},
      {"finetune", "lr", ValueKind::Real, 1e-3, "Learning rate of the full stage"},
      {"finetune", "batch_size", ValueKind::Int, 64, "Fine-tuning batch size"},
      {"finetune", "dropout_multiplicity", ValueKind::Real, 0.3, "Dropout multiplicity while fine-tuning"},
      {"finetune", "valid_fraction", ValueKind::Real, 0.2, "Held-out share without --valid"},
      {"finetune", "grad_clip", ValueKind::Real, 0.0, "Gradient norm clip (0 = off)"},

      {"classifier", "preset", ValueKind::String, "",
       "Named hyperparameters: task-a-malayalam-mixed, task-b-malayalam, task-b-tamil"},
      {"classifier", "head_hidden_dim", ValueKind::Int, 50, "Width of the first head block"},
      {"classifier", "head_dropout_first", ValueKind::Real, 0.4, "Base dropout of the first head block"},
      {"classifier", "head_dropout_second", ValueKind::Real, 0.1, "Base dropout of the second head block"},
      {"classifier", "pool", ValueKind::String, "concat", "Head input: concat (last, max, mean) or last"},
      {"classifier", "max_tokens", ValueKind::Int, 512, "Pieces kept per example"},
      {"classifier", "dropout_multiplicity", ValueKind::Real, 0.5, "Scale applied to all classifier dropouts"},
      {"classifier", "batch_size", ValueKind::Int, 16, "Classifier batch size"},
      {"classifier", "head_epochs", ValueKind::Int, 1, "Epochs training only the head"},
      {"classifier", "head_lr", ValueKind::Real, 1e-2, "Learning rate of the head stage"},
      {"classifier", "last_layer_epochs", ValueKind::Int, 1, "Epochs training head and last LSTM layer"},
      {"classifier", "last_layer_lr", ValueKind::Real, 5e-3, "Learning rate of the last-layer stage"},
      {"classifier", "epochs", ValueKind::Int, 5, "Epochs with every layer trainable"},
      {"classifier", "lr", ValueKind::Real, 1e-3, "Learning rate of the full stage"},
      {"classifier", "select_best_epoch_by", ValueKind::String, "f1",
       "Restore the epoch with the best validation score: f1 or none"},

      {"split", "valid_fraction", ValueKind::Real, 0.2, "Validation share of each class"},
  };
  return table;
}

std::string flag_name(std::string_view key) {
  std::string out(key);
  std::replace(out.begin(), out.end(), '_', '-');
  return out;
}

PipelineConfig::PipelineConfig() : values_(nlohmann::json::object()) {
  for (const auto& s : settings()) {
    if (s.section.empty()) {
      values_[std::string(s.key)] = s.default_value;
    } else {
      values_[std::string(s.section)][std::string(s.key)] = s.default_value;
    }
  }
}

void PipelineConfig::merge_file_json(const nlohmann::json& j) {
  if (!j.is_object()) invalid("config file must hold a JSON object");
  const auto version = j.find("config_version");
  if (version == j.end()) invalid("config file lacks config_version");
  if (!version->is_number_integer() || version->get<int>() != kConfigVersion) {
    invalid("config_version must be " + std::to_string(kConfigVersion));
  }
  for (const auto& [name, value] : j.items()) {
    if (name == "config_version") continue;
    if (const Setting* top = find_setting("", name)) {
      if (!type_matches(*top, value)) invalid("config key '" + name + "' has the wrong type");
      values_[name] = value;
      explicit_.insert(name);
      continue;
    }
    if (!is_section(name)) invalid("unknown config key '" + name + "'");
    if (!value.is_object()) invalid("config section '" + name + "' must be an object");
    for (const auto& [key, v] : value.items()) {
      const Setting* s = find_setting(name, key);
      if (!s) invalid("unknown config key '" + qualified(name, key) + "'");
      if (!type_matches(*s, v)) invalid("config key '" + qualified(name, key) + "' has the wrong type");
      values_[name][key] = v;
      explicit_.insert(qualified(name, key));
    }
  }
}

void PipelineConfig::merge_file(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    invalid("config file " + path.string() + ": " + e.what());
  }
  merge_file_json(j);
}

void PipelineConfig::set_from_string(std::string_view section, std::string_view key,
                                     std::string_view text) {
  const Setting* s = find_setting(section, key);
  if (!s) invalid("unknown setting '" + qualified(section, key) + "'");
  const std::string name = "--" + flag_name(key);
  nlohmann::json v;
  if (section.empty() && key == "seed") {
    v = parse_u64(text, name);
  } else {
    switch (s->kind) {
      case ValueKind::Int: {
        std::int64_t i = 0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), i);
        if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
          invalid(name + ": '" + std::string(text) + "' is not an integer");
        }
        v = i;
        break;
      }
      case ValueKind::Real: {
        const std::string copy(text);
        char* end = nullptr;
        const double d = std::strtod(copy.c_str(), &end);
        if (copy.empty() || end != copy.c_str() + copy.size()) {
          invalid(name + ": '" + copy + "' is not a number");
        }
        v = d;
        break;
      }
      case ValueKind::Bool:
        if (text == "true" || text == "1") {
          v = true;
        } else if (text == "false" || text == "0") {
          v = false;
        } else {
          invalid(name + ": expected true or false");
        }
        break;
      case ValueKind::String: v = std::string(text); break;
    }
  }
  if (section.empty()) {
    values_[std::string(key)] = v;
  } else {
    values_[std::string(section)][std::string(key)] = v;
  }
  explicit_.insert(qualified(section, key));
}

bool PipelineConfig::is_explicit(std::string_view section, std::string_view key) const {
  return explicit_.count(qualified(section, key)) > 0;
}

const nlohmann::json& PipelineConfig::value(std::string_view section, std::string_view key) const {
  if (!find_setting(section, key)) invalid("unknown setting '" + qualified(section, key) + "'");
  return section.empty() ? values_.at(std::string(key))
                         : values_.at(std::string(section)).at(std::string(key));
}

std::int64_t PipelineConfig::get_int(std::string_view section, std::string_view key) const {
  return value(section, key).get<std::int64_t>();
}

std::size_t PipelineConfig::get_size(std::string_view section, std::string_view key) const {
  const auto v = get_int(section, key);
  if (v < 0) invalid(qualified(section, key) + " must be >= 0");
  return static_cast<std::size_t>(v);
}

double PipelineConfig::get_real(std::string_view section, std::string_view key) const {
  return value(section, key).get<double>();
}

bool PipelineConfig::get_bool(std::string_view section, std::string_view key) const {
  return value(section, key).get<bool>();
}

std::string PipelineConfig::get_string(std::string_view section, std::string_view key) const {
  return value(section, key).get<std::string>();
}

std::uint64_t PipelineConfig::seed() const {
  const auto& v = values_.at("seed");
  if (!v.is_null()) return v.get<std::uint64_t>();
  if (const char* env = std::getenv("CODEMIX_SEED"); env && *env) return parse_u64(env, "CODEMIX_SEED");
  return kDefaultSeed;
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json j = values_;
  j["config_version"] = kConfigVersion;
  return j;
}

TransitionMatrix transition_matrix(const PipelineConfig& cfg) {
  const std::string m = cfg.get_string("synthesize", "matrix");
  if (m == "model1") return preset_model1();
  if (m == "model2") return preset_model2();
  if (m == "identity") return TransitionMatrix::identity();
  return TransitionMatrix::parse(m);
}

MixState initial_state(const PipelineConfig& cfg) {
  return parse_state(cfg.get_string("synthesize", "initial_state"));
}

TrainerOptions trainer_options(const PipelineConfig& cfg) {
  TrainerOptions o;
  o.max_piece_len = cfg.get_size("tokenizer", "max_piece_len");
  o.seed_size = cfg.get_size("tokenizer", "seed_size");
  o.keep_fraction = cfg.get_real("tokenizer", "keep_fraction");
  o.em_rounds_per_prune = static_cast<int>(cfg.get_int("tokenizer", "em_rounds_per_prune"));
  o.final_em_rounds = static_cast<int>(cfg.get_int("tokenizer", "final_em_rounds"));
  return o;
}

ulmfit::AwdLstmConfig lm_config(const PipelineConfig& cfg) {
  ulmfit::AwdLstmConfig c;
  c.embedding_dim = cfg.get_size("model", "embedding_dim");
  c.hidden_dim = cfg.get_size("model", "hidden_dim");
  c.n_layers = cfg.get_size("model", "n_layers");
  c.bptt = cfg.get_size("model", "bptt");
  c.tie_weights = cfg.get_bool("model", "tie_weights");
  c.base_dropouts = {cfg.get_real("model", "dropout_embedding"), cfg.get_real("model", "dropout_input"),
                     cfg.get_real("model", "dropout_weight"), cfg.get_real("model", "dropout_between")};
  c.dropout_multiplicity = cfg.get_real("model", "dropout_multiplicity");
  return c;
}

ulmfit::PretrainOptions pretrain_options(const PipelineConfig& cfg) {
  ulmfit::PretrainOptions o;
  o.schedule = {{{ulmfit::UnfreezeScope::All, cfg.get_size("pretrain", "epochs"),
                  cfg.get_real("pretrain", "lr"), cfg.get_size("pretrain", "batch_size")}}};
  o.valid_fraction = cfg.get_real("pretrain", "valid_fraction");
  o.grad_clip = cfg.get_real("pretrain", "grad_clip");
  o.schedule.validate();
  return o;
}

ulmfit::FinetuneOptions finetune_options(const PipelineConfig& cfg) {
  ulmfit::FinetuneOptions o;
  const std::size_t batch = cfg.get_size("finetune", "batch_size");
  o.schedule = {{{ulmfit::UnfreezeScope::LastLayer, cfg.get_size("finetune", "last_layer_epochs"),
                  cfg.get_real("finetune", "last_layer_lr"), batch},
                 {ulmfit::UnfreezeScope::All, cfg.get_size("finetune", "epochs"),
                  cfg.get_real("finetune", "lr"), batch}}};
  o.dropout_multiplicity = cfg.get_real("finetune", "dropout_multiplicity");
  o.valid_fraction = cfg.get_real("finetune", "valid_fraction");
  o.grad_clip = cfg.get_real("finetune", "grad_clip");
  o.schedule.validate();
  return o;
}

ulmfit::ClassifierConfig classifier_config(const PipelineConfig& cfg) {
  ulmfit::ClassifierConfig c;
  c.head_hidden_dim = cfg.get_size("classifier", "head_hidden_dim");
  c.head_dropouts = {cfg.get_real("classifier", "head_dropout_first"),
                     cfg.get_real("classifier", "head_dropout_second")};
  c.pooling = ulmfit::parse_pooling(cfg.get_string("classifier", "pool"));
  c.max_tokens = cfg.get_size("classifier", "max_tokens");
  c.validate();
  return c;
}

ulmfit::ClassifierTrainOptions classifier_train_options(const PipelineConfig& cfg) {
  ulmfit::ClassifierTrainOptions o;
  double multiplicity = cfg.get_real("classifier", "dropout_multiplicity");
  std::size_t batch = cfg.get_size("classifier", "batch_size");
  if (const std::string preset = cfg.get_string("classifier", "preset"); !preset.empty()) {
    const auto& p = ulmfit::classifier_preset(preset);
    if (!cfg.is_explicit("classifier", "dropout_multiplicity")) multiplicity = p.dropout_multiplicity;
    if (!cfg.is_explicit("classifier", "batch_size")) batch = p.batch_size;
  }
  o.dropout_multiplicity = multiplicity;
  o.schedule.stages.clear();
  const std::pair<const char*, ulmfit::UnfreezeScope> stages[] = {
      {"head", ulmfit::UnfreezeScope::HeadOnly},
      {"last_layer", ulmfit::UnfreezeScope::LastLayer},
      {"", ulmfit::UnfreezeScope::All}};
  for (const auto& [prefix, scope] : stages) {
    const std::string p = *prefix ? std::string(prefix) + "_" : std::string();
    const std::size_t epochs = cfg.get_size("classifier", p + "epochs");
    if (epochs == 0 && scope != ulmfit::UnfreezeScope::All) continue;  // stage skipped
    o.schedule.stages.push_back({scope, epochs, cfg.get_real("classifier", p + "lr"), batch});
  }
  o.schedule.validate();
  const std::string select = cfg.get_string("classifier", "select_best_epoch_by");
  if (select == "f1") {
    o.select_best_epoch = true;
  } else if (select == "none") {
    o.select_best_epoch = false;
  } else {
    invalid("select_best_epoch_by must be f1 or none");
  }
  o.seed = cfg.seed();
  return o;
}

}  // namespace codemix::cli
