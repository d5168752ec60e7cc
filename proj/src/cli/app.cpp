#include "codemix/cli/app.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "codemix/cli/pipeline_config.hpp"
#include "codemix/corpus.hpp"
#include "codemix/errors.hpp"
#include "codemix/markov.hpp"
#include "codemix/metrics.hpp"
#include "codemix/textprep.hpp"
#include "codemix/tokenizer.hpp"
#include "codemix/ulmfit/checkpoint.hpp"
#include "codemix/ulmfit/classifier.hpp"
#include "codemix/ulmfit/data.hpp"
#include "codemix/ulmfit/training.hpp"
#include "codemix/utf8.hpp"

namespace codemix::cli {

namespace {

using nlohmann::json;

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

/// Writes to --out when given, else to the result stream.
void emit(const std::string& path, std::string_view text, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    write_file(path, text);
  }
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) {
    s += l;
    s += '\n';
  }
  return s;
}

CorpusFormat corpus_format_for(const std::string& name, const std::string& path) {
  if (name != "auto") return parse_corpus_format(name);
  return std::filesystem::path(path).extension() == ".tsv" ? CorpusFormat::Tsv : CorpusFormat::Jsonl;
}

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    fields.emplace_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

struct TextRow {
  std::string id;
  std::string text;
};

/// Rows with an id and a text; a label column, if present, is ignored.
std::vector<TextRow> load_texts(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  const bool jsonl = guess_labeled_format(path) == LabeledFormat::Jsonl;
  std::vector<TextRow> rows;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = strip_cr(lines[i]);
    if (utf8::trim(line).empty()) continue;
    const auto line_no = static_cast<std::int64_t>(i + 1);
    if (jsonl) {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception&) {
        throw Error(ErrorKind::MalformedRow, path.string() + ": line " + std::to_string(line_no) + " is not JSON", line_no);
      }
      if (!j.is_object() || !j.contains("id") || !j.contains("text") || !j["text"].is_string()) {
        throw Error(ErrorKind::MalformedRow, path.string() + ": line " + std::to_string(line_no) + " needs id and text", line_no);
      }
      rows.push_back({j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump(),
                      j["text"].get<std::string>()});
    } else {
      auto fields = split_tabs(line);
      if (fields.size() < 2) {
        throw Error(ErrorKind::MalformedRow, path.string() + ": line " + std::to_string(line_no) + " needs id<TAB>text", line_no);
      }
      if (rows.empty() && i == 0 && utf8::to_lower(fields[0]) == "id" && utf8::to_lower(fields[1]) == "text") continue;
      rows.push_back({fields[0], fields[1]});
    }
  }
  return rows;
}

struct PredRow {
  std::string id;
  Label label;
};

/// Prediction TSV written by `clf predict`: header, then id, label, probabilities.
std::vector<PredRow> load_predictions(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  std::vector<PredRow> rows;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = strip_cr(lines[i]);
    if (utf8::trim(line).empty()) continue;
    const auto fields = split_tabs(line);
    const auto line_no = static_cast<std::int64_t>(i + 1);
    if (fields.size() < 2) {
      throw Error(ErrorKind::MalformedRow, path.string() + ": line " + std::to_string(line_no) + " needs id<TAB>label", line_no);
    }
    if (i == 0 && fields[0] == "id") continue;
    rows.push_back({fields[0], parse_label(fields[1])});
  }
  return rows;
}

json stats_json(const DatasetStats& s) {
  return {{"n_examples", s.n_examples},
          {"n_classes", s.n_classes},
          {"pct_roman_only", s.pct_roman_only},
          {"class_counts", s.class_counts},
          {"min_examples_per_class", s.min_examples_per_class},
          {"max_examples_per_class", s.max_examples_per_class},
          {"avg_examples_per_class", s.avg_examples_per_class},
          {"min_tokens", s.min_tokens},
          {"max_tokens", s.max_tokens},
          {"avg_tokens", s.avg_tokens},
          {"median_tokens", s.median_tokens}};
}

std::string stats_table(const DatasetStats& s) {
  std::vector<std::pair<std::string, std::string>> rows = {
      {"examples", std::to_string(s.n_examples)},
      {"classes", std::to_string(s.n_classes)},
      {"roman-only %", fixed(s.pct_roman_only, 2)},
  };
  for (const auto& [label, n] : s.class_counts) rows.emplace_back("class " + label, std::to_string(n));
  rows.emplace_back("min examples/class", std::to_string(s.min_examples_per_class));
  rows.emplace_back("max examples/class", std::to_string(s.max_examples_per_class));
  rows.emplace_back("avg examples/class", fixed(s.avg_examples_per_class, 2));
  rows.emplace_back("min tokens", std::to_string(s.min_tokens));
  rows.emplace_back("max tokens", std::to_string(s.max_tokens));
  rows.emplace_back("avg tokens", fixed(s.avg_tokens, 2));
  rows.emplace_back("median tokens", fixed(s.median_tokens, 0));
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.first.size());
  std::string out;
  for (const auto& [k, v] : rows) out += k + std::string(width + 2 - k.size(), ' ') + v + "\n";
  return out;
}

std::vector<std::string> corpus_lines(const std::string& path, bool labeled) {
  if (!labeled) return read_lines(path);
  std::vector<std::string> lines;
  for (auto& ex : load_labeled(path)) lines.push_back(std::move(ex.text));
  return lines;
}

/// Appends one JSON object per line to the log file, if any.
class JsonLog {
 public:
  explicit JsonLog(const std::string& path) {
    if (!path.empty()) file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (file_ && !*file_) throw Error(ErrorKind::IoError, "cannot open log file " + path);
  }
  void write(const json& j) {
    if (file_) *file_ << j.dump() << '\n';
  }

 private:
  std::unique_ptr<std::ofstream> file_;
};

/// Settings bound to one subcommand: raw flag strings applied after parsing.
struct Bound {
  std::string config_path;
  std::vector<std::pair<const Setting*, std::string>> raw;
  std::vector<CLI::Option*> options;

  void bind(CLI::App* sub, std::initializer_list<std::string_view> sections) {
    sub->add_option("--config", config_path, "JSON config file (flags override it)");
    raw.reserve(settings().size());
    for (const auto& s : settings()) {
      const bool wanted = s.section.empty() ||
                          std::find(sections.begin(), sections.end(), s.section) != sections.end();
      if (!wanted) continue;
      raw.emplace_back(&s, std::string());
    }
    for (auto& [s, value] : raw) {
      std::string help(s->help);
      if (!s->default_value.is_null()) help += " [" + s->default_value.dump() + "]";
      options.push_back(sub->add_option("--" + flag_name(s->key), value, help));
    }
  }

  PipelineConfig resolve() const {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg.merge_file(config_path);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (options[i]->count() > 0) cfg.set_from_string(raw[i].first->section, raw[i].first->key, raw[i].second);
    }
    return cfg;
  }
};

struct Runner {
  std::ostream& out;
  std::ostream& err;

  void log(const std::string& msg) const { err << "[codemix] " << msg << '\n'; }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Runner r{out, err};
  CLI::App app{"Code-mixed corpus synthesis, subword tokenization and ULMFiT-style classification",
               "codemix"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  std::function<void()> action;
  std::unordered_map<CLI::App*, std::function<void()>> actions;
  std::vector<std::unique_ptr<Bound>> bounds;
  auto bound = [&](CLI::App* sub, std::initializer_list<std::string_view> sections) -> Bound& {
    bounds.push_back(std::make_unique<Bound>());
    bounds.back()->bind(sub, sections);
    return *bounds.back();
  };

  // synthesize ---------------------------------------------------------------
  std::string syn_parallel, syn_format = "auto", syn_out, syn_states;
  auto* syn = app.add_subcommand("synthesize", "Sample a code-mixed corpus from a parallel corpus");
  syn->add_option("--parallel", syn_parallel, "Parallel corpus (JSONL or TSV)")->required();
  syn->add_option("--format", syn_format, "auto, jsonl or tsv");
  syn->add_option("--out", syn_out, "Output text file (default stdout)");
  syn->add_option("--states-out", syn_states, "Also write the sampled state per line");
  Bound& syn_b = bound(syn, {"synthesize"});
  actions[syn] = [&] {
    const auto cfg = syn_b.resolve();
    const auto corpus = load_parallel_corpus(syn_parallel, corpus_format_for(syn_format, syn_parallel));
    const auto states = sample_states(transition_matrix(cfg), initial_state(cfg), corpus.size(), cfg.seed());
    emit(syn_out, join_lines(synthesize(corpus, states)), r.out);
    if (!syn_states.empty()) write_file(syn_states, format_states(states));
    r.log("synthesized " + std::to_string(corpus.size()) + " lines (seed " + std::to_string(cfg.seed()) + ")");
  };

  // tokenizer ----------------------------------------------------------------
  auto* tok = app.add_subcommand("tokenizer", "Unigram subword tokenizer");
  tok->require_subcommand(1);
  std::string tok_input, tok_out, tok_vocab;
  bool tok_pieces = false;
  auto* tok_train = tok->add_subcommand("train", "Train a vocabulary");
  tok_train->add_option("--input", tok_input, "Training text, one sentence per line")->required();
  tok_train->add_option("--out", tok_out, "Vocabulary TSV")->required();
  Bound& tok_b = bound(tok_train, {"tokenizer"});
  actions[tok_train] = [&] {
    const auto cfg = tok_b.resolve();
    const auto lines = read_lines(tok_input);
    const auto vocab = train_unigram(lines, cfg.get_size("tokenizer", "vocab_size"), trainer_options(cfg));
    save_vocab(vocab, tok_out);
    r.log("vocabulary of " + std::to_string(vocab.num_scored()) + " pieces, fingerprint " + vocab_fingerprint(vocab));
  };
  auto* tok_enc = tok->add_subcommand("encode", "Segment text into piece ids");
  tok_enc->add_option("--vocab", tok_vocab, "Vocabulary TSV")->required();
  tok_enc->add_option("--input", tok_input, "Text file, one sentence per line")->required();
  tok_enc->add_option("--out", tok_out, "Output file (default stdout)");
  tok_enc->add_flag("--pieces", tok_pieces, "Print pieces instead of ids");
  actions[tok_enc] = [&] {
    const auto vocab = load_vocab(tok_vocab);
    std::string text;
    for (const auto& line : read_lines(tok_input)) {
      const auto seg = viterbi_encode(vocab, line);
      for (std::size_t i = 0; i < seg.ids.size(); ++i) {
        if (i) text += ' ';
        text += tok_pieces ? vocab.piece(seg.ids[i]) : std::to_string(seg.ids[i]);
      }
      text += '\n';
    }
    emit(tok_out, text, r.out);
  };
  auto* tok_dec = tok->add_subcommand("decode", "Turn piece ids back into text");
  tok_dec->add_option("--vocab", tok_vocab, "Vocabulary TSV")->required();
  tok_dec->add_option("--input", tok_input, "Space-separated ids, one sentence per line")->required();
  tok_dec->add_option("--out", tok_out, "Output file (default stdout)");
  actions[tok_dec] = [&] {
    const auto vocab = load_vocab(tok_vocab);
    std::string text;
    const auto lines = read_lines(tok_input);
    for (std::size_t n = 0; n < lines.size(); ++n) {
      std::vector<int> ids;
      std::istringstream in(lines[n]);
      std::string tokstr;
      while (in >> tokstr) {
        try {
          std::size_t used = 0;
          ids.push_back(std::stoi(tokstr, &used));
          if (used != tokstr.size()) throw std::invalid_argument(tokstr);
        } catch (const std::exception&) {
          throw Error(ErrorKind::MalformedRow, "line " + std::to_string(n + 1) + ": '" + tokstr + "' is not an id",
                      static_cast<std::int64_t>(n + 1));
        }
      }
      text += decode(vocab, ids) + '\n';
    }
    emit(tok_out, text, r.out);
  };

  // stats / split --------------------------------------------------------------
  std::string st_input;
  bool st_json = false;
  auto* stats = app.add_subcommand("stats", "Dataset statistics of a labeled file");
  stats->add_option("--input", st_input, "Labeled data (JSONL or TSV)")->required();
  stats->add_flag("--json", st_json, "Print JSON instead of a table");
  actions[stats] = [&] {
    const auto s = compute_stats(load_labeled(st_input));
    r.out << (st_json ? stats_json(s).dump(2) + "\n" : stats_table(s));
  };

  std::string sp_input, sp_train, sp_valid;
  auto* split = app.add_subcommand("split", "Stratified train/validation split");
  split->add_option("--input", sp_input, "Labeled data (JSONL or TSV)")->required();
  split->add_option("--train-out", sp_train, "Training part")->required();
  split->add_option("--valid-out", sp_valid, "Validation part")->required();
  Bound& sp_b = bound(split, {"split"});
  actions[split] = [&] {
    const auto cfg = sp_b.resolve();
    const auto data = load_labeled(sp_input);
    const auto parts = split_train_valid(data, cfg.get_real("split", "valid_fraction"), cfg.seed());
    write_labeled(parts.train, sp_train, guess_labeled_format(sp_train));
    write_labeled(parts.valid, sp_valid, guess_labeled_format(sp_valid));
    r.log("split " + std::to_string(data.size()) + " examples into " + std::to_string(parts.train.size()) +
          " train / " + std::to_string(parts.valid.size()) + " valid");
  };

  // lm -----------------------------------------------------------------------
  auto* lm = app.add_subcommand("lm", "Language model pretraining and fine-tuning");
  lm->require_subcommand(1);
  std::string lm_corpus, lm_vocab, lm_out, lm_valid, lm_log, lm_ckpt;
  bool lm_labeled = false;
  std::size_t lm_batch = 16, lm_bptt = 0;
  auto epoch_logger = [&](JsonLog& jl, const char* phase) {
    return [&r, &jl, phase](const ulmfit::EpochLog& e) {
      json j = ulmfit::to_json(e);
      j["phase"] = phase;
      jl.write(j);
      r.log(std::string(phase) + " stage " + std::to_string(e.stage) + " epoch " + std::to_string(e.epoch) +
            ": train ppl " + fixed(e.train_perplexity, 3) + ", valid ppl " + fixed(e.valid_perplexity, 3));
    };
  };

  auto* lm_pre = lm->add_subcommand("pretrain", "Train a language model from scratch");
  lm_pre->add_option("--corpus", lm_corpus, "Training text, one sentence per line")->required();
  lm_pre->add_option("--vocab", lm_vocab, "Tokenizer vocabulary TSV")->required();
  lm_pre->add_option("--valid", lm_valid, "Validation text (default: hold out a share)");
  lm_pre->add_option("--out", lm_out, "Checkpoint path")->required();
  lm_pre->add_option("--log", lm_log, "Per-epoch JSON lines log");
  Bound& pre_b = bound(lm_pre, {"model", "pretrain"});
  actions[lm_pre] = [&] {
    const auto cfg = pre_b.resolve();
    const auto vocab = load_vocab(lm_vocab);
    const auto lines = read_lines(lm_corpus);
    const auto valid = lm_valid.empty() ? std::vector<std::string>{} : read_lines(lm_valid);
    JsonLog jl(lm_log);
    auto opts = pretrain_options(cfg);
    opts.on_epoch = epoch_logger(jl, "pretrain");
    const auto result = ulmfit::pretrain_lm(lm_config(cfg), vocab, lines, opts, cfg.seed(), valid);
    ulmfit::save_checkpoint(result.checkpoint, lm_out);
    r.log("wrote " + lm_out);
  };

  auto* lm_ft = lm->add_subcommand("finetune", "Fine-tune a language model on target-domain text");
  lm_ft->add_option("--checkpoint", lm_ckpt, "Pretrained checkpoint")->required();
  lm_ft->add_option("--vocab", lm_vocab, "Tokenizer vocabulary TSV")->required();
  lm_ft->add_option("--corpus", lm_corpus, "Target text, one sentence per line")->required();
  lm_ft->add_flag("--labeled", lm_labeled, "Corpus is a labeled dataset; use its texts");
  lm_ft->add_option("--valid", lm_valid, "Validation text (default: hold out a share)");
  lm_ft->add_option("--out", lm_out, "Checkpoint path")->required();
  lm_ft->add_option("--log", lm_log, "Per-epoch JSON lines log");
  Bound& ft_b = bound(lm_ft, {"finetune"});
  actions[lm_ft] = [&] {
    const auto cfg = ft_b.resolve();
    const auto vocab = load_vocab(lm_vocab);
    const auto base = ulmfit::load_checkpoint(lm_ckpt);
    const auto lines = corpus_lines(lm_corpus, lm_labeled);
    const auto valid = lm_valid.empty() ? std::vector<std::string>{} : corpus_lines(lm_valid, lm_labeled);
    JsonLog jl(lm_log);
    auto opts = finetune_options(cfg);
    opts.on_epoch = epoch_logger(jl, "finetune");
    const auto result = ulmfit::finetune_lm(base, vocab, lines, opts, cfg.seed(), valid);
    ulmfit::save_checkpoint(result.checkpoint, lm_out);
    r.log("wrote " + lm_out);
  };

  bool lm_json = false;
  auto* lm_ppl = lm->add_subcommand("perplexity", "Evaluate a language model");
  lm_ppl->add_option("--checkpoint", lm_ckpt, "Language model checkpoint")->required();
  lm_ppl->add_option("--vocab", lm_vocab, "Tokenizer vocabulary TSV")->required();
  lm_ppl->add_option("--corpus", lm_corpus, "Text, one sentence per line")->required();
  lm_ppl->add_flag("--labeled", lm_labeled, "Corpus is a labeled dataset; use its preprocessed texts");
  lm_ppl->add_option("--batch-size", lm_batch, "Evaluation lanes [16]");
  lm_ppl->add_option("--bptt", lm_bptt, "Window length (default: the checkpoint's)");
  lm_ppl->add_flag("--json", lm_json, "Print JSON");
  actions[lm_ppl] = [&] {
    const auto vocab = load_vocab(lm_vocab);
    const auto ckpt = ulmfit::load_checkpoint(lm_ckpt);
    ulmfit::require_fingerprint(ckpt, vocab);
    const auto model = ulmfit::lm_from_checkpoint(ckpt);
    auto lines = corpus_lines(lm_corpus, lm_labeled);
    if (lm_labeled) {
      for (auto& l : lines) l = preprocess(l);
    }
    const auto stream = ulmfit::build_stream(vocab, lines);
    const double ppl = ulmfit::perplexity(model, stream, lm_batch, lm_bptt ? lm_bptt : model.config().bptt);
    r.out << (lm_json ? json{{"perplexity", ppl}, {"tokens", stream.size()}}.dump() : fixed(ppl, 4)) << '\n';
  };

  // clf ----------------------------------------------------------------------
  auto* clf = app.add_subcommand("clf", "Offensive-language classifier");
  clf->require_subcommand(1);
  std::string c_ckpt, c_vocab, c_train, c_valid, c_out, c_log, c_input, c_gold, c_pred;
  bool c_json = false;

  auto* clf_train = clf->add_subcommand("train", "Train a classifier on a fine-tuned encoder");
  clf_train->add_option("--checkpoint", c_ckpt, "Language model checkpoint")->required();
  clf_train->add_option("--vocab", c_vocab, "Tokenizer vocabulary TSV")->required();
  clf_train->add_option("--train", c_train, "Labeled training data")->required();
  clf_train->add_option("--valid", c_valid, "Labeled validation data (default: stratified split)");
  clf_train->add_option("--out", c_out, "Classifier checkpoint path")->required();
  clf_train->add_option("--log", c_log, "Per-epoch JSON lines log");
  Bound& ct_b = bound(clf_train, {"classifier", "split"});
  actions[clf_train] = [&] {
    const auto cfg = ct_b.resolve();
    const auto vocab = load_vocab(c_vocab);
    const auto lm_ckpt = ulmfit::load_checkpoint(c_ckpt);
    auto train = load_labeled(c_train);
    std::vector<LabeledExample> valid;
    if (c_valid.empty()) {
      auto parts = split_train_valid(train, cfg.get_real("split", "valid_fraction"), cfg.seed());
      train = std::move(parts.train);
      valid = std::move(parts.valid);
    } else {
      valid = load_labeled(c_valid);
    }
    const auto ccfg = classifier_config(cfg);
    auto opts = classifier_train_options(cfg);
    JsonLog jl(c_log);
    opts.on_epoch = [&](const ulmfit::ClassifierEpochLog& e) {
      jl.write(ulmfit::to_json(e));
      r.log("classifier stage " + std::to_string(e.stage) + " (" + std::string(ulmfit::scope_name(e.scope)) +
            ") epoch " + std::to_string(e.epoch) + ": loss " + fixed(e.train_loss, 4) + ", valid F1 " +
            fixed(e.valid_f1, 4));
    };
    auto model = ulmfit::build_classifier(lm_ckpt, ccfg, cfg.seed(), vocab_fingerprint(vocab));
    const auto enc_train = ulmfit::encode_examples(vocab, train, ccfg.max_tokens);
    const auto enc_valid = ulmfit::encode_examples(vocab, valid, ccfg.max_tokens);
    const auto result = ulmfit::train_classifier(model, enc_train, enc_valid, opts);
    json epochs = json::array();
    for (const auto& e : result.log) epochs.push_back(ulmfit::to_json(e));
    json meta = lm_ckpt.metadata.is_object() ? lm_ckpt.metadata : json::object();
    if (!meta.contains("history") || !meta["history"].is_array()) meta["history"] = json::array();
    meta["history"].push_back({{"phase", "classifier"},
                               {"seed", cfg.seed()},
                               {"dropout_multiplicity", opts.dropout_multiplicity},
                               {"schedule", ulmfit::to_json(opts.schedule)},
                               {"select_best_epoch", opts.select_best_epoch},
                               {"best_epoch_index", result.best_index},
                               {"epochs", epochs}});
    ulmfit::save_checkpoint(ulmfit::to_checkpoint(model, meta), c_out);
    r.log("wrote " + c_out);
  };

  auto* clf_pred = clf->add_subcommand("predict", "Label texts with a trained classifier");
  clf_pred->add_option("--checkpoint", c_ckpt, "Classifier checkpoint")->required();
  clf_pred->add_option("--vocab", c_vocab, "Tokenizer vocabulary TSV")->required();
  clf_pred->add_option("--input", c_input, "Rows with id and text (JSONL or TSV)")->required();
  clf_pred->add_option("--out", c_out, "Prediction TSV (default stdout)");
  actions[clf_pred] = [&] {
    const auto vocab = load_vocab(c_vocab);
    const auto ckpt = ulmfit::load_checkpoint(c_ckpt);
    ulmfit::require_fingerprint(ckpt, vocab);
    auto model = ulmfit::classifier_from_checkpoint(ckpt);
    const auto rows = load_texts(c_input);
    std::vector<std::string> texts;
    for (const auto& row : rows) texts.push_back(row.text);
    const auto preds = ulmfit::predict(model, vocab, texts);
    std::string text = "id\tlabel\tprob_not\tprob_off\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      text += rows[i].id + '\t' + std::string(label_name(preds[i].label)) + '\t' +
              fixed(preds[i].probabilities[0], 6) + '\t' + fixed(preds[i].probabilities[1], 6) + '\n';
    }
    emit(c_out, text, r.out);
  };

  auto* clf_eval = clf->add_subcommand("eval", "Weighted precision, recall and F1 of predictions");
  clf_eval->add_option("--gold", c_gold, "Labeled gold data")->required();
  clf_eval->add_option("--pred", c_pred, "Prediction TSV from clf predict")->required();
  clf_eval->add_flag("--json", c_json, "Print the full-precision JSON report");
  clf_eval->add_option("--out", c_out, "Output file (default stdout)");
  actions[clf_eval] = [&] {
    const auto gold = load_labeled(c_gold);
    const auto preds = load_predictions(c_pred);
    std::map<std::string, Label> by_id;
    for (const auto& p : preds) {
      if (!by_id.emplace(p.id, p.label).second) {
        throw Error(ErrorKind::MalformedRow, "duplicate prediction id '" + p.id + "'");
      }
    }
    if (preds.size() != gold.size()) {
      throw Error(ErrorKind::LengthMismatch, std::to_string(preds.size()) + " predictions for " +
                                                 std::to_string(gold.size()) + " gold examples");
    }
    std::vector<std::string> g, p;
    for (const auto& ex : gold) {
      const auto it = by_id.find(ex.id);
      if (it == by_id.end()) throw Error(ErrorKind::LengthMismatch, "no prediction for id '" + ex.id + "'");
      g.emplace_back(label_name(ex.label));
      p.emplace_back(label_name(it->second));
    }
    const auto report = weighted_prf(confusion(g, p));
    emit(c_out, c_json ? to_json(report).dump(2) + "\n" : format_report(report), r.out);
  };

  try {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    for (auto& [sub, fn] : actions) {
      if (sub->parsed()) {
        fn();
        return kExitOk;
      }
    }
    err << app.help();
    return kExitUsage;
  } catch (const Error& e) {
    err << "codemix: " << e.what() << '\n';
    return e.kind() == ErrorKind::InvalidConfig ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    err << "codemix: " << e.what() << '\n';
    return kExitData;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace codemix::cli
