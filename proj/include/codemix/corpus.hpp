#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace codemix {

/// One sentence in its three parallel forms.
struct SentenceTriple {
  std::string native;          // original script
  std::string translated;      // target-language sentence
  std::string transliterated;  // romanized

  bool operator==(const SentenceTriple&) const = default;
};

/// Sentence-aligned parallel corpus. Immutable once loaded; index i is line i
/// of the source file (after skipping blank rows).
struct ParallelCorpus {
  std::vector<SentenceTriple> triples;
  std::string source_id;
  std::size_t skipped_blank_rows = 0;

  std::size_t size() const { return triples.size(); }

  // Field-exact comparison of the triples; provenance is not compared.
  bool operator==(const ParallelCorpus& other) const { return triples == other.triples; }
};

enum class CorpusFormat { Jsonl, Tsv };

CorpusFormat parse_corpus_format(std::string_view name);

struct CorpusLoadOptions {
  // Keep rows where some (not all) fields are blank so validate_alignment can
  // report them. Default loading rejects such rows as malformed.
  bool allow_blank_fields = false;
};

/// Reads a corpus. Fields are whitespace-trimmed; fully blank rows are skipped
/// and counted. Throws Error with MalformedRow(line), EmptyCorpus,
/// InvalidUtf8(byte offset) or IoError.
ParallelCorpus load_parallel_corpus(const std::filesystem::path& path, CorpusFormat format,
                                    CorpusLoadOptions options = {});

void write_parallel_corpus(const ParallelCorpus& corpus, const std::filesystem::path& path,
                           CorpusFormat format = CorpusFormat::Jsonl);

struct AlignmentReport {
  std::size_t rows = 0;
  // Rows with a blank field, per variant (native, translated, transliterated).
  std::array<std::size_t, 3> blank_fields{};
  std::size_t rows_with_blank_field = 0;
  // Rows equal to an earlier row (rows - distinct rows).
  std::size_t duplicate_triples = 0;
  // Mean of len(variant) / len(native) in code points, over rows with a
  // non-blank native field.
  std::array<double, 3> mean_length_ratio{};
};

AlignmentReport validate_alignment(const ParallelCorpus& corpus);

/// Writes one newline-terminated line per string. Lines must not contain '\n'.
void write_lines(const std::vector<std::string>& lines, const std::filesystem::path& path);

/// Reads a UTF-8 text file as lines. A final newline does not produce an empty
/// trailing line. Throws InvalidUtf8 or IoError.
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Whole-file read; throws IoError.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace codemix
