#include "codemix/ulmfit/config.hpp"

#include <algorithm>
#include <array>
#include <string>

#include <nlohmann/json.hpp>

#include "codemix/errors.hpp"

namespace codemix::ulmfit {

namespace {

double clamp_rate(double r) { return std::clamp(r, 0.0, 0.99); }

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); }

}  // namespace

DropoutRates scale_dropouts(const DropoutRates& base, double m) {
  return {clamp_rate(m * base.embedding), clamp_rate(m * base.input), clamp_rate(m * base.weight),
          clamp_rate(m * base.between)};
}

void AwdLstmConfig::validate() const {
  if (vocab_size < 1) invalid("vocab_size must be >= 1");
  if (embedding_dim < 1 || hidden_dim < 1 || n_layers < 1) invalid("model dimensions must be >= 1");
  if (bptt < 1) invalid("bptt must be >= 1");
  if (!(dropout_multiplicity >= 0.0)) invalid("dropout_multiplicity must be >= 0");
  for (double r : {base_dropouts.embedding, base_dropouts.input, base_dropouts.weight,
                   base_dropouts.between}) {
    if (!(r >= 0.0 && r <= 1.0)) invalid("base dropout rates must lie in [0, 1]");
  }
}

std::size_t AwdLstmConfig::layer_input_dim(std::size_t layer) const {
  return layer == 0 ? embedding_dim : hidden_dim;
}

std::size_t AwdLstmConfig::layer_hidden_dim(std::size_t layer) const {
  return (tie_weights && layer + 1 == n_layers) ? embedding_dim : hidden_dim;
}

AwdLstmConfig full_scale_lm_config(std::size_t vocab_size) {
  AwdLstmConfig c;
  c.vocab_size = vocab_size;
  return c;
}

void ClassifierConfig::validate() const {
  if (n_classes < 2) invalid("n_classes must be >= 2");
  if (head_hidden_dim < 1) invalid("head_hidden_dim must be >= 1");
  if (max_tokens < 1) invalid("max_tokens must be >= 1");
  if (!(head_dropouts.first >= 0.0 && head_dropouts.first <= 1.0 && head_dropouts.second >= 0.0 &&
        head_dropouts.second <= 1.0)) {
    invalid("head dropouts must lie in [0, 1]");
  }
}

void TrainSchedule::validate() const {
  if (stages.empty()) invalid("a schedule needs at least one stage");
  for (const auto& s : stages) {
    if (s.epochs < 1) invalid("stage epochs must be >= 1");
    if (!(s.lr > 0.0)) invalid("stage lr must be > 0");
    if (s.batch_size < 1) invalid("stage batch_size must be >= 1");
  }
}

TrainSchedule default_pretrain_schedule() { return {{{UnfreezeScope::All, 10, 5e-3, 32}}}; }

TrainSchedule default_finetune_schedule() {
  return {{{UnfreezeScope::LastLayer, 1, 1e-2, 64}, {UnfreezeScope::All, 5, 1e-3, 64}}};
}

TrainSchedule default_classifier_schedule() {
  return {{{UnfreezeScope::HeadOnly, 1, 1e-2, 16},
           {UnfreezeScope::LastLayer, 1, 5e-3, 16},
           {UnfreezeScope::All, 5, 1e-3, 16}}};
}

std::span<const ClassifierPreset> classifier_presets() {
  static const std::array<ClassifierPreset, 3> presets{{
      {"task-a-malayalam-mixed", 0.5, 16, default_classifier_schedule()},
      {"task-b-malayalam", 0.7, 16, default_classifier_schedule()},
      {"task-b-tamil", 0.5, 16, default_classifier_schedule()},
  }};
  return presets;
}

const ClassifierPreset& classifier_preset(std::string_view name) {
  for (const auto& p : classifier_presets()) {
    if (p.name == name) return p;
  }
  invalid("unknown classifier preset '" + std::string(name) + "'");
}

std::string_view scope_name(UnfreezeScope scope) {
  switch (scope) {
    case UnfreezeScope::HeadOnly: return "head_only";
    case UnfreezeScope::LastLayer: return "last_layer";
    case UnfreezeScope::All: return "all";
  }
  return "all";
}

UnfreezeScope parse_scope(std::string_view name) {
  if (name == "head_only") return UnfreezeScope::HeadOnly;
  if (name == "last_layer") return UnfreezeScope::LastLayer;
  if (name == "all") return UnfreezeScope::All;
  invalid("unknown unfreeze scope '" + std::string(name) + "'");
}

std::string_view pooling_name(Pooling pooling) { return pooling == Pooling::Concat ? "concat" : "last"; }

Pooling parse_pooling(std::string_view name) {
  if (name == "concat") return Pooling::Concat;
  if (name == "last") return Pooling::Last;
  invalid("unknown pooling '" + std::string(name) + "'");
}

nlohmann::json to_json(const AwdLstmConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"embedding_dim", c.embedding_dim},
          {"hidden_dim", c.hidden_dim},
          {"n_layers", c.n_layers},
          {"base_dropouts",
           {{"embedding", c.base_dropouts.embedding},
            {"input", c.base_dropouts.input},
            {"weight", c.base_dropouts.weight},
            {"between", c.base_dropouts.between}}},
          {"dropout_multiplicity", c.dropout_multiplicity},
          {"bptt", c.bptt},
          {"tie_weights", c.tie_weights}};
}

nlohmann::json to_json(const ClassifierConfig& c) {
  return {{"head_hidden_dim", c.head_hidden_dim},
          {"head_dropouts", {c.head_dropouts.first, c.head_dropouts.second}},
          {"n_classes", c.n_classes},
          {"pooling", pooling_name(c.pooling)},
          {"max_tokens", c.max_tokens}};
}

nlohmann::json to_json(const TrainSchedule& s) {
  auto arr = nlohmann::json::array();
  for (const auto& st : s.stages) {
    arr.push_back({{"scope", scope_name(st.scope)},
                   {"epochs", st.epochs},
                   {"lr", st.lr},
                   {"batch_size", st.batch_size}});
  }
  return arr;
}

AwdLstmConfig lm_config_from_json(const nlohmann::json& j) {
  try {
    AwdLstmConfig c;
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.n_layers = j.at("n_layers").get<std::size_t>();
    const auto& d = j.at("base_dropouts");
    c.base_dropouts = {d.at("embedding").get<double>(), d.at("input").get<double>(),
                       d.at("weight").get<double>(), d.at("between").get<double>()};
    c.dropout_multiplicity = j.at("dropout_multiplicity").get<double>();
    c.bptt = j.at("bptt").get<std::size_t>();
    c.tie_weights = j.at("tie_weights").get<bool>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string("language model config: ") + e.what());
  }
}

ClassifierConfig classifier_config_from_json(const nlohmann::json& j) {
  try {
    ClassifierConfig c;
    c.head_hidden_dim = j.at("head_hidden_dim").get<std::size_t>();
    const auto& d = j.at("head_dropouts");
    c.head_dropouts = {d.at(0).get<double>(), d.at(1).get<double>()};
    c.n_classes = j.at("n_classes").get<std::size_t>();
    c.pooling = parse_pooling(j.at("pooling").get<std::string>());
    c.max_tokens = j.at("max_tokens").get<std::size_t>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string("classifier config: ") + e.what());
  }
}

TrainSchedule schedule_from_json(const nlohmann::json& j) {
  try {
    TrainSchedule s;
    for (const auto& st : j) {
      s.stages.push_back({parse_scope(st.at("scope").get<std::string>()),
                          st.at("epochs").get<std::size_t>(), st.at("lr").get<double>(),
                          st.at("batch_size").get<std::size_t>()});
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string("schedule: ") + e.what());
  }
}

}  // namespace codemix::ulmfit
