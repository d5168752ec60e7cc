#include "codemix/markov.hpp"

#include <charconv>
#include <cmath>
#include <string>

#include "codemix/errors.hpp"
#include "codemix/rng.hpp"
#include "codemix/utf8.hpp"

namespace codemix {

std::string_view state_name(MixState s) {
  switch (s) {
    case MixState::Native: return "native";
    case MixState::Translated: return "translated";
    case MixState::Transliterated: return "transliterated";
  }
  return "?";
}

MixState parse_state(std::string_view name) {
  const std::string lower = utf8::to_lower(name);
  if (lower == "native") return MixState::Native;
  if (lower == "translated") return MixState::Translated;
  if (lower == "transliterated") return MixState::Transliterated;
  throw Error(ErrorKind::InvalidConfig, "unknown state '" + std::string(name) + "'");
}

TransitionMatrix::TransitionMatrix(const Rows& rows) : rows_(rows) {
  for (std::size_t r = 0; r < kNumStates; ++r) {
    double sum = 0.0;
    for (double v : rows_[r]) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorKind::OutOfRange,
                    "transition probability " + std::to_string(v) + " outside [0,1]");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw Error(ErrorKind::RowNotStochastic,
                  "row " + std::to_string(r) + " sums to " + std::to_string(sum),
                  static_cast<std::int64_t>(r));
    }
  }
}

TransitionMatrix TransitionMatrix::from_symbols(std::span<const double> p) {
  if (p.size() != kNumStates * kNumStates) {
    throw Error(ErrorKind::InvalidConfig,
                "expected 9 transition probabilities, got " + std::to_string(p.size()));
  }
  Rows rows{};
  for (std::size_t i = 0; i < p.size(); ++i) rows[i / kNumStates][i % kNumStates] = p[i];
  return TransitionMatrix(rows);
}

TransitionMatrix TransitionMatrix::parse(std::string_view csv) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= csv.size()) {
    auto comma = csv.find(',', start);
    if (comma == std::string_view::npos) comma = csv.size();
    const std::string_view field = utf8::trim(csv.substr(start, comma - start));
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
      throw Error(ErrorKind::InvalidConfig, "bad matrix entry '" + std::string(field) + "'");
    }
    values.push_back(v);
    start = comma + 1;
  }
  return from_symbols(values);
}

TransitionMatrix TransitionMatrix::identity() {
  return TransitionMatrix(Rows{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}});
}

TransitionMatrix preset_model1() {
  const double p[] = {0, 1, 0, 0, 0, 1, 0, 1, 0};
  return TransitionMatrix::from_symbols(p);
}

TransitionMatrix preset_model2() {
  const double p[] = {0, 0, 1, 0, 1, 0, 0, 0, 1};
  return TransitionMatrix::from_symbols(p);
}

StateSequence sample_states(const TransitionMatrix& m, MixState initial, std::size_t n,
                            std::uint64_t seed) {
  StateSequence seq;
  seq.seed = seed;
  seq.initial = initial;
  if (n == 0) return seq;
  seq.states.reserve(n);
  seq.states.push_back(initial);
  Xoshiro256 rng(seed);
  const auto& rows = m.rows();
  for (std::size_t t = 1; t < n; ++t) {
    const auto& row = rows[static_cast<std::size_t>(seq.states.back())];
    const double u = rng.uniform();
    // Inverse CDF; zero-probability columns are never selected, and rounding
    // in the cumulative sum falls back to the last column with mass.
    std::size_t pick = kNumStates;
    double cum = 0.0;
    for (std::size_t k = 0; k < kNumStates; ++k) {
      if (row[k] <= 0.0) continue;
      cum += row[k];
      pick = k;
      if (u < cum) break;
    }
    seq.states.push_back(static_cast<MixState>(pick));
  }
  return seq;
}

const std::string& select_variant(const SentenceTriple& t, MixState s) {
  switch (s) {
    case MixState::Native: return t.native;
    case MixState::Translated: return t.translated;
    case MixState::Transliterated: return t.transliterated;
  }
  return t.native;
}

std::vector<std::string> synthesize(const ParallelCorpus& corpus, const StateSequence& states) {
  if (states.size() != corpus.size()) {
    throw Error(ErrorKind::LengthMismatch,
                "corpus has " + std::to_string(corpus.size()) + " triples but " +
                    std::to_string(states.size()) + " states were given",
                static_cast<std::int64_t>(corpus.size()));
  }
  std::vector<std::string> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    out.push_back(select_variant(corpus.triples[i], states.states[i]));
  }
  return out;
}

TransitionMatrix::Rows empirical_transition_frequencies(const StateSequence& seq) {
  if (seq.size() < 2) {
    throw Error(ErrorKind::TooShort, "need at least 2 states to count transitions",
                static_cast<std::int64_t>(seq.size()));
  }
  std::array<std::array<std::size_t, kNumStates>, kNumStates> counts{};
  for (std::size_t t = 1; t < seq.size(); ++t) {
    ++counts[static_cast<std::size_t>(seq.states[t - 1])][static_cast<std::size_t>(seq.states[t])];
  }
  TransitionMatrix::Rows freq{};
  for (std::size_t a = 0; a < kNumStates; ++a) {
    std::size_t total = 0;
    for (auto c : counts[a]) total += c;
    if (total == 0) continue;
    for (std::size_t b = 0; b < kNumStates; ++b) {
      freq[a][b] = static_cast<double>(counts[a][b]) / static_cast<double>(total);
    }
  }
  return freq;
}

std::array<double, kNumStates> state_visit_frequencies(const StateSequence& seq) {
  std::array<double, kNumStates> f{};
  if (seq.states.empty()) return f;
  for (auto s : seq.states) f[static_cast<std::size_t>(s)] += 1.0;
  for (auto& v : f) v /= static_cast<double>(seq.size());
  return f;
}

std::string format_states(const StateSequence& seq) {
  std::string out;
  for (auto s : seq.states) {
    out += state_name(s);
    out += '\n';
  }
  return out;
}

}  // namespace codemix
