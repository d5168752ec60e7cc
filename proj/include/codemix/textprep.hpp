#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace codemix {

enum class Label : std::uint8_t { NotOffensive = 0, Offensive = 1 };

/// Case-insensitive: OFF, NOT, offensive, not-offensive (also not_offensive).
/// Throws UnknownLabel.
Label parse_label(std::string_view text);

/// Canonical short names "OFF" / "NOT".
std::string_view label_name(Label label);

struct LabeledExample {
  std::string id;
  std::string text;
  Label label = Label::NotOffensive;

  bool operator==(const LabeledExample&) const = default;
};

enum class LabeledFormat { Jsonl, Tsv };

/// ".jsonl"/".json" -> Jsonl, anything else -> Tsv.
LabeledFormat guess_labeled_format(const std::filesystem::path& path);

/// JSONL {id, text, label} or TSV id<TAB>text<TAB>label. A TSV first row whose
/// label does not parse is treated as a header. Throws MalformedRow(line),
/// EmptyDataset, InvalidUtf8, IoError.
std::vector<LabeledExample> load_labeled(const std::filesystem::path& path, LabeledFormat format);
std::vector<LabeledExample> load_labeled(const std::filesystem::path& path);

void write_labeled(std::span<const LabeledExample> data, const std::filesystem::path& path,
                   LabeledFormat format);

/// Lowercases, drops "@" + non-space runs, drops URLs starting with http://,
/// https:// or www., collapses whitespace and trims. Idempotent.
std::string preprocess(std::string_view text);

/// Inclusive code point range of a native script.
struct ScriptBlock {
  char32_t first;
  char32_t last;
};

/// Malayalam U+0D00-0D7F and Tamil U+0B80-0BFF.
std::span<const ScriptBlock> default_native_blocks();

/// True iff no code point of `text` falls inside any of `blocks`.
bool is_roman_only(std::string_view text, std::span<const ScriptBlock> blocks);
bool is_roman_only(std::string_view text);

/// Counts of whitespace-separated tokens of the raw text.
std::size_t count_tokens(std::string_view text);

struct DatasetStats {
  std::size_t n_examples = 0;
  std::size_t n_classes = 0;
  double pct_roman_only = 0.0;
  std::map<std::string, std::size_t> class_counts;
  std::size_t min_examples_per_class = 0;
  std::size_t max_examples_per_class = 0;
  double avg_examples_per_class = 0.0;
  std::size_t min_tokens = 0;
  std::size_t max_tokens = 0;
  double avg_tokens = 0.0;
  double median_tokens = 0.0;  // lower middle for an even count
};

/// Throws EmptyDataset.
DatasetStats compute_stats(std::span<const LabeledExample> data,
                           std::span<const ScriptBlock> blocks = default_native_blocks());

struct Split {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> valid;
};

/// Stratified split: each class contributes round(count x valid_fraction)
/// examples to valid, chosen by a seeded shuffle; both halves keep dataset
/// order. Throws ClassTooSmall for a class with fewer than 2 examples.
Split split_train_valid(std::span<const LabeledExample> data, double valid_fraction,
                        std::uint64_t seed);

}  // namespace codemix
