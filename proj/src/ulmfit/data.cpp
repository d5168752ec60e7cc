#include "codemix/ulmfit/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "codemix/errors.hpp"
#include "codemix/rng.hpp"

namespace codemix::ulmfit {

std::vector<int> build_stream(const UnigramVocab& vocab, std::span<const std::string> lines) {
  const ModelVocab mv(vocab);
  std::vector<int> stream;
  for (const auto& line : lines) {
    const auto seg = viterbi_encode(vocab, line);
    stream.insert(stream.end(), seg.ids.begin(), seg.ids.end());
    stream.push_back(mv.eos());
  }
  return stream;
}

std::vector<BpttWindow> bptt_batches(std::span<const int> stream, std::size_t batch,
                                     std::size_t bptt) {
  if (batch == 0 || bptt == 0) {
    throw Error(ErrorKind::InvalidConfig, "batch and bptt must be >= 1");
  }
  if (stream.size() < 2 * batch) {
    throw Error(ErrorKind::StreamTooShort,
                std::to_string(stream.size()) + " tokens cannot fill " + std::to_string(batch) +
                    " lanes of at least 2 tokens",
                static_cast<std::int64_t>(stream.size()));
  }
  const std::size_t lane = stream.size() / batch;
  std::vector<BpttWindow> windows;
  for (std::size_t i = 0; i + 1 < lane; i += bptt) {
    BpttWindow w;
    w.steps = std::min(bptt, lane - 1 - i);
    w.batch = batch;
    w.input.resize(w.steps * batch);
    w.target.resize(w.steps * batch);
    for (std::size_t t = 0; t < w.steps; ++t) {
      for (std::size_t b = 0; b < batch; ++b) {
        w.input[t * batch + b] = stream[b * lane + i + t];
        w.target[t * batch + b] = stream[b * lane + i + t + 1];
      }
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

LineSplit split_lines(std::span<const std::string> lines, double valid_fraction,
                      std::uint64_t seed) {
  if (!(valid_fraction >= 0.0 && valid_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "valid fraction must lie in [0, 1)");
  }
  std::vector<std::size_t> order(lines.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Xoshiro256 rng(stream_seed(seed, "lm-valid-split"));
  shuffle_in_place(order, rng);
  const auto n_valid = static_cast<std::size_t>(
      std::llround(static_cast<double>(lines.size()) * valid_fraction));
  std::vector<bool> is_valid(lines.size(), false);
  for (std::size_t k = 0; k < n_valid; ++k) is_valid[order[k]] = true;
  LineSplit out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    (is_valid[i] ? out.valid : out.train).push_back(lines[i]);
  }
  return out;
}

}  // namespace codemix::ulmfit
