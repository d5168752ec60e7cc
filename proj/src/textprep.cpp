#include "codemix/textprep.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <nlohmann/json.hpp>

#include "codemix/corpus.hpp"
#include "codemix/errors.hpp"
#include "codemix/rng.hpp"
#include "codemix/utf8.hpp"

namespace codemix {

namespace {

using nlohmann::json;

constexpr std::array<ScriptBlock, 2> kDefaultBlocks{{{0x0D00, 0x0D7F}, {0x0B80, 0x0BFF}}};

bool is_space(char c) { return utf8::is_ascii_space(c); }

bool starts_with(std::string_view s, std::size_t i, std::string_view prefix) {
  return s.substr(i, prefix.size()) == prefix;
}

std::string strip_mentions(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '@' && i + 1 < s.size() && !is_space(s[i + 1])) {
      ++i;
      while (i < s.size() && !is_space(s[i])) ++i;
      continue;
    }
    out.push_back(s[i++]);
  }
  return out;
}

std::string strip_urls(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t prefix = 0;
    for (std::string_view p : {"https://", "http://", "www."}) {
      if (starts_with(s, i, p)) {
        prefix = p.size();
        break;
      }
    }
    if (prefix > 0 && i + prefix < s.size() && !is_space(s[i + prefix])) {
      i += prefix;
      while (i < s.size() && !is_space(s[i])) ++i;
      continue;
    }
    out.push_back(s[i++]);
  }
  return out;
}

std::string collapse_spaces(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char c : s) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

[[noreturn]] void malformed(std::size_t line_no, const std::string& why) {
  throw Error(ErrorKind::MalformedRow, "line " + std::to_string(line_no) + ": " + why,
              static_cast<std::int64_t>(line_no));
}

}  // namespace

Label parse_label(std::string_view text) {
  const std::string s = utf8::to_lower(utf8::trim(text));
  if (s == "off" || s == "offensive") return Label::Offensive;
  if (s == "not" || s == "not-offensive" || s == "not_offensive") return Label::NotOffensive;
  throw Error(ErrorKind::UnknownLabel, "unknown label '" + std::string(text) + "'");
}

std::string_view label_name(Label label) {
  return label == Label::Offensive ? "OFF" : "NOT";
}

LabeledFormat guess_labeled_format(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".jsonl" || ext == ".json") ? LabeledFormat::Jsonl : LabeledFormat::Tsv;
}

std::vector<LabeledExample> load_labeled(const std::filesystem::path& path, LabeledFormat format) {
  const auto lines = read_lines(path);
  std::vector<LabeledExample> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const std::string_view line = lines[i];
    if (utf8::trim(line).empty()) continue;
    LabeledExample ex;
    std::string label_text;
    if (format == LabeledFormat::Jsonl) {
      json row;
      try {
        row = json::parse(line);
      } catch (const json::parse_error& e) {
        malformed(line_no, std::string("invalid JSON: ") + e.what());
      }
      if (!row.is_object()) malformed(line_no, "expected an object");
      for (const char* key : {"id", "text", "label"}) {
        if (!row.contains(key) || !row[key].is_string()) {
          malformed(line_no, std::string("missing string key ") + key);
        }
      }
      ex.id = row["id"].get<std::string>();
      ex.text = row["text"].get<std::string>();
      label_text = row["label"].get<std::string>();
    } else {
      const auto first = line.find('\t');
      const auto last = line.rfind('\t');
      if (first == std::string_view::npos || first == last) {
        malformed(line_no, "expected id<TAB>text<TAB>label");
      }
      ex.id = std::string(utf8::trim(line.substr(0, first)));
      ex.text = std::string(line.substr(first + 1, last - first - 1));
      label_text = std::string(line.substr(last + 1));
    }
    try {
      ex.label = parse_label(label_text);
    } catch (const Error&) {
      if (format == LabeledFormat::Tsv && out.empty() && line_no == 1) continue;  // header
      malformed(line_no, "unknown label '" + label_text + "'");
    }
    if (ex.id.empty()) malformed(line_no, "empty id");
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw Error(ErrorKind::EmptyDataset, "no examples in " + path.string());
  return out;
}

std::vector<LabeledExample> load_labeled(const std::filesystem::path& path) {
  return load_labeled(path, guess_labeled_format(path));
}

void write_labeled(std::span<const LabeledExample> data, const std::filesystem::path& path,
                   LabeledFormat format) {
  std::string out;
  for (const auto& ex : data) {
    if (format == LabeledFormat::Jsonl) {
      json row = {{"id", ex.id}, {"text", ex.text}, {"label", label_name(ex.label)}};
      out += row.dump();
    } else {
      out += ex.id + '\t' + ex.text + '\t' + std::string(label_name(ex.label));
    }
    out += '\n';
  }
  write_file(path, out);
}

std::string preprocess(std::string_view text) {
  const std::string lower = utf8::to_lower(text);
  return collapse_spaces(strip_urls(strip_mentions(lower)));
}

std::span<const ScriptBlock> default_native_blocks() { return kDefaultBlocks; }

bool is_roman_only(std::string_view text, std::span<const ScriptBlock> blocks) {
  for (char32_t cp : utf8::decode(text)) {
    for (const auto& b : blocks) {
      if (cp >= b.first && cp <= b.last) return false;
    }
  }
  return true;
}

bool is_roman_only(std::string_view text) { return is_roman_only(text, default_native_blocks()); }

std::size_t count_tokens(std::string_view text) {
  std::size_t n = 0;
  bool in_token = false;
  for (char c : text) {
    if (is_space(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++n;
    }
  }
  return n;
}

DatasetStats compute_stats(std::span<const LabeledExample> data,
                           std::span<const ScriptBlock> blocks) {
  if (data.empty()) throw Error(ErrorKind::EmptyDataset, "cannot summarize an empty dataset");
  DatasetStats s;
  s.n_examples = data.size();
  std::vector<std::size_t> tokens;
  tokens.reserve(data.size());
  std::size_t roman = 0;
  for (const auto& ex : data) {
    ++s.class_counts[std::string(label_name(ex.label))];
    tokens.push_back(count_tokens(ex.text));
    if (is_roman_only(ex.text, blocks)) ++roman;
  }
  s.n_classes = s.class_counts.size();
  s.pct_roman_only = 100.0 * static_cast<double>(roman) / static_cast<double>(data.size());

  s.min_examples_per_class = data.size();
  for (const auto& [label, count] : s.class_counts) {
    s.min_examples_per_class = std::min(s.min_examples_per_class, count);
    s.max_examples_per_class = std::max(s.max_examples_per_class, count);
  }
  s.avg_examples_per_class = static_cast<double>(data.size()) / static_cast<double>(s.n_classes);

  std::sort(tokens.begin(), tokens.end());
  s.min_tokens = tokens.front();
  s.max_tokens = tokens.back();
  double sum = 0.0;
  for (auto t : tokens) sum += static_cast<double>(t);
  s.avg_tokens = sum / static_cast<double>(tokens.size());
  s.median_tokens = static_cast<double>(tokens[(tokens.size() - 1) / 2]);
  return s;
}

Split split_train_valid(std::span<const LabeledExample> data, double valid_fraction,
                        std::uint64_t seed) {
  if (!(valid_fraction > 0.0 && valid_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "valid fraction must lie in (0,1)");
  }
  std::map<Label, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data[i].label].push_back(i);

  Xoshiro256 rng(seed);
  std::vector<bool> in_valid(data.size(), false);
  for (auto& [label, idx] : by_class) {
    if (idx.size() < 2) {
      throw Error(ErrorKind::ClassTooSmall,
                  "class " + std::string(label_name(label)) + " has fewer than 2 examples",
                  static_cast<std::int64_t>(label));
    }
    const auto n_valid = static_cast<std::size_t>(
        std::llround(static_cast<double>(idx.size()) * valid_fraction));
    shuffle_in_place(idx, rng);
    for (std::size_t k = 0; k < n_valid; ++k) in_valid[idx[k]] = true;
  }
  Split split;
  for (std::size_t i = 0; i < data.size(); ++i) {
    (in_valid[i] ? split.valid : split.train).push_back(data[i]);
  }
  return split;
}

}  // namespace codemix
