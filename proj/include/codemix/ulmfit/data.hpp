#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "codemix/tokenizer.hpp"

namespace codemix::ulmfit {

/// Model ids: tokenizer ids first, then end-of-sentence and padding.
struct ModelVocab {
  std::size_t tokenizer_size = 0;

  explicit ModelVocab(const UnigramVocab& v) : tokenizer_size(v.size()) {}
  explicit ModelVocab(std::size_t n) : tokenizer_size(n) {}

  int eos() const { return static_cast<int>(tokenizer_size); }
  int pad() const { return static_cast<int>(tokenizer_size) + 1; }
  std::size_t size() const { return tokenizer_size + 2; }
};

/// Token ids of each line followed by end-of-sentence, concatenated.
std::vector<int> build_stream(const UnigramVocab& vocab, std::span<const std::string> lines);

/// One window, time-major: input[t * batch + b].
struct BpttWindow {
  std::size_t steps = 0;
  std::size_t batch = 0;
  std::vector<int> input;
  std::vector<int> target;
};

/// Cuts the stream into `batch` contiguous lanes of len/batch tokens and
/// walks them in windows of up to `bptt` steps; targets are the next tokens.
/// Throws StreamTooShort when the stream has fewer than 2 x batch tokens.
std::vector<BpttWindow> bptt_batches(std::span<const int> stream, std::size_t batch,
                                     std::size_t bptt);

struct LineSplit {
  std::vector<std::string> train;
  std::vector<std::string> valid;
};

/// Seeded random valid_fraction share of lines (rounded), original order kept.
LineSplit split_lines(std::span<const std::string> lines, double valid_fraction, std::uint64_t seed);

}  // namespace codemix::ulmfit
