#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace codemix {

/// U+2581, prefixed to every word so that segmentations decode back to spaced text.
inline constexpr std::string_view kWordBoundary = "\xE2\x96\x81";

/// Byte-fallback pieces appended after the scored pieces, one per byte value.
inline constexpr std::size_t kNumBytePieces = 256;

/// Score charged per character that no scored piece covers, relative to the
/// smallest piece log-probability.
inline constexpr double kUnknownPenalty = 10.0;

/// Collapses ASCII whitespace runs (and U+2581) to a single space and trims.
std::string normalize_text(std::string_view text);

/// Normalized words, each prefixed with the boundary marker.
std::vector<std::string> split_words(std::string_view text);

/// Word-frequency view of a training corpus. Words are boundary-prefixed and
/// sorted, so every pass over the corpus visits them in the same order.
struct TrainingCorpus {
  std::vector<std::string> words;
  std::vector<double> freqs;
  std::vector<std::size_t> first_line;  // 1-based line of first occurrence

  static TrainingCorpus from_lines(std::span<const std::string> lines);

  bool empty() const { return words.empty(); }
};

/// Unigram language model over subword pieces.
///
/// Ids [0, num_scored()) are scored pieces holding natural-log probabilities;
/// ids [num_scored(), size()) are the 256 byte-fallback pieces "<0xHH>", which
/// carry no probability mass and only appear for characters outside the vocabulary.
class UnigramVocab {
 public:
  UnigramVocab() = default;

  /// Pieces keep the given order. Throws MalformedVocabRow for an empty or
  /// duplicate piece or a non-finite / positive log-probability.
  explicit UnigramVocab(std::vector<std::pair<std::string, double>> pieces,
                        std::size_t target_size = 0);

  std::size_t size() const { return pieces_.size() + kNumBytePieces; }
  std::size_t num_scored() const { return pieces_.size(); }
  std::size_t target_size() const { return target_size_; }
  void set_target_size(std::size_t n) { target_size_ = n; }

  const std::string& piece(int id) const;
  double log_prob(int id) const { return log_probs_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& pieces() const { return pieces_; }
  const std::vector<double>& log_probs() const { return log_probs_; }

  bool is_byte(int id) const { return static_cast<std::size_t>(id) >= pieces_.size(); }
  int byte_id(unsigned char b) const { return static_cast<int>(pieces_.size()) + b; }

  std::optional<int> find(std::string_view piece) const;

  /// Single-code-point pieces. These are never pruned.
  bool is_required(int id) const;

  /// Sum of exp(log_prob) over scored pieces.
  double total_probability() const;

  /// Penalty score charged for one unknown character.
  double unknown_score() const { return min_log_prob_ - kUnknownPenalty; }

  std::size_t max_piece_chars() const { return max_piece_chars_; }

  /// Invokes fn(end_char, piece_id) for every scored piece that starts at
  /// character `begin` of a word whose character byte offsets are `offsets`
  /// (offsets.size() == chars + 1).
  template <typename Fn>
  void for_each_match(std::string_view word, std::span<const std::size_t> offsets,
                      std::size_t begin, Fn&& fn) const;

  bool operator==(const UnigramVocab& o) const {
    return pieces_ == o.pieces_ && log_probs_ == o.log_probs_;
  }

 private:
  void build_index();

  std::vector<std::string> pieces_;
  std::vector<double> log_probs_;
  std::size_t target_size_ = 0;
  std::size_t max_piece_chars_ = 1;
  double min_log_prob_ = 0.0;
  std::vector<std::string> byte_names_;

  // Byte trie: key = (node << 8) | byte -> child node; node_piece_[node] = id or -1.
  std::unordered_map<std::uint64_t, std::uint32_t> trie_;
  std::vector<int> node_piece_;
};

struct Segmentation {
  std::vector<int> ids;
  double score = 0.0;  // sum of piece log-probs plus unknown-character penalties
};

struct TrainerOptions {
  std::size_t max_piece_len = 16;
  std::size_t seed_size = 0;  // 0 selects 4 x target size
  double keep_fraction = 0.75;
  int em_rounds_per_prune = 2;
  int final_em_rounds = 2;
};

/// Weighted occurrence counts of every substring of 1..max_len code points
/// inside the boundary-prefixed words.
std::map<std::string, double> substring_counts(const TrainingCorpus& corpus, std::size_t max_len);

/// All single characters plus the most frequent longer substrings, up to
/// seed_size pieces (clamped up to the character count). Log-probs are
/// normalized relative frequencies. Throws EmptyCorpus.
UnigramVocab build_seed_vocab(const TrainingCorpus& corpus, std::size_t max_piece_len,
                              std::size_t seed_size);
UnigramVocab build_seed_vocab(std::span<const std::string> lines, std::size_t max_piece_len,
                              std::size_t seed_size);

/// Log marginal likelihood of the corpus (sum over all segmentations).
/// Throws UnsegmentableLine.
double corpus_log_likelihood(const UnigramVocab& v, const TrainingCorpus& corpus);

/// One EM iteration: forward-backward expected counts, re-estimated
/// probabilities. Returns the new vocab and the log-likelihood under the
/// input vocab. Expected counts are floored at 1e-250.
std::pair<UnigramVocab, double> em_round(const UnigramVocab& v, const TrainingCorpus& corpus);

/// Likelihood loss of removing each multi-character piece (other pieces keep
/// their probabilities). Indexed by piece id; required pieces get 0.
std::vector<double> removal_losses(const UnigramVocab& v, const TrainingCorpus& corpus);

/// Removes the cheapest (1 - keep_fraction) share of multi-character pieces,
/// never going below target_size, then renormalizes. No-op at or below target.
UnigramVocab prune(const UnigramVocab& v, const TrainingCorpus& corpus, double keep_fraction);

/// Seed, then alternate EM and pruning until the scored size reaches
/// target_size, then run the final EM rounds. Throws TargetTooSmall.
UnigramVocab train_unigram(std::span<const std::string> lines, std::size_t target_size,
                           const TrainerOptions& opts = {});

/// Best-scoring segmentation of one boundary-prefixed word. Ties go to fewer
/// pieces, then to the lexicographically smallest piece sequence.
Segmentation viterbi_word(const UnigramVocab& v, std::string_view word);

/// Normalizes, splits into words and segments each one.
Segmentation viterbi_encode(const UnigramVocab& v, std::string_view text);

/// Inverse of viterbi_encode on normalized text. Throws UnknownId.
std::string decode(const UnigramVocab& v, std::span<const int> ids);

/// Number of byte-fallback pieces in a segmentation.
std::size_t count_byte_pieces(const UnigramVocab& v, std::span<const int> ids);

/// TSV "piece<TAB>log_prob", one scored piece per line, shortest round-trip
/// decimal for the log-probs.
std::string serialize_vocab(const UnigramVocab& v);
UnigramVocab parse_vocab(std::string_view tsv);
void save_vocab(const UnigramVocab& v, const std::filesystem::path& path);
UnigramVocab load_vocab(const std::filesystem::path& path);

/// 16 hex digits of FNV-1a over the serialized vocab.
std::string vocab_fingerprint(const UnigramVocab& v);

// -- implementation ---------------------------------------------------------

template <typename Fn>
void UnigramVocab::for_each_match(std::string_view word, std::span<const std::size_t> offsets,
                                  std::size_t begin, Fn&& fn) const {
  std::uint32_t node = 0;
  std::size_t end_char = begin;
  const std::size_t n_chars = offsets.size() - 1;
  for (std::size_t b = offsets[begin]; b < word.size(); ++b) {
    const auto key = (static_cast<std::uint64_t>(node) << 8) | static_cast<unsigned char>(word[b]);
    const auto it = trie_.find(key);
    if (it == trie_.end()) return;
    node = it->second;
    if (end_char < n_chars && b + 1 == offsets[end_char + 1]) {
      ++end_char;
      if (node_piece_[node] >= 0) fn(end_char, node_piece_[node]);
      if (end_char - begin >= max_piece_chars_) return;
    }
  }
}

}  // namespace codemix
