#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "codemix/corpus.hpp"

namespace codemix {

/// Generation states. The indices are fixed: 0 = Native, 1 = Translated,
/// 2 = Transliterated; matrix rows and columns use the same order.
enum class MixState : std::uint8_t { Native = 0, Translated = 1, Transliterated = 2 };

inline constexpr std::size_t kNumStates = 3;

std::string_view state_name(MixState s);
MixState parse_state(std::string_view name);

/// Row-stochastic 3x3 transition matrix.
///
/// Symbol convention: row Native holds (p1, p2, p3), row Translated holds
/// (q1, q2, q3), row Transliterated holds (r1, r2, r3); the suffix names the
/// destination state in index order (1 = Native, 2 = Translated,
/// 3 = Transliterated).
class TransitionMatrix {
 public:
  using Rows = std::array<std::array<double, kNumStates>, kNumStates>;

  /// Validates entries in [0,1] (OutOfRange) and row sums within 1e-9 of 1
  /// (RowNotStochastic, detail = row index).
  explicit TransitionMatrix(const Rows& rows);

  /// Builds from p1,p2,p3,q1,q2,q3,r1,r2,r3.
  static TransitionMatrix from_symbols(std::span<const double> p);

  /// Parses "p1,p2,p3,q1,q2,q3,r1,r2,r3".
  static TransitionMatrix parse(std::string_view csv);

  static TransitionMatrix identity();

  double operator()(MixState from, MixState to) const {
    return rows_[static_cast<std::size_t>(from)][static_cast<std::size_t>(to)];
  }
  const Rows& rows() const { return rows_; }

  bool operator==(const TransitionMatrix&) const = default;

 private:
  Rows rows_{};
};

inline constexpr double kRowSumTolerance = 1e-9;

/// Presets used to synthesize the Malayalam corpora.
TransitionMatrix preset_model1();
TransitionMatrix preset_model2();

struct StateSequence {
  std::vector<MixState> states;
  std::uint64_t seed = 0;
  MixState initial = MixState::Native;

  std::size_t size() const { return states.size(); }
};

/// Samples n states: states[0] = initial, then each successor is drawn from
/// the row of its predecessor by inverse-CDF on a xoshiro256** uniform.
/// A pure function of its arguments.
StateSequence sample_states(const TransitionMatrix& m, MixState initial, std::size_t n,
                            std::uint64_t seed);

/// output[i] = variant of corpus.triples[i] selected by states[i].
/// Throws LengthMismatch(corpus_len) when the lengths differ.
std::vector<std::string> synthesize(const ParallelCorpus& corpus, const StateSequence& states);

const std::string& select_variant(const SentenceTriple& t, MixState s);

/// (a,b) = count(a->b) / count(transitions out of a); rows with no outgoing
/// transitions are zero. Throws TooShort for fewer than 2 states.
TransitionMatrix::Rows empirical_transition_frequencies(const StateSequence& seq);

/// Fraction of positions occupied by each state.
std::array<double, kNumStates> state_visit_frequencies(const StateSequence& seq);

/// One state name per line (debug export).
std::string format_states(const StateSequence& seq);

}  // namespace codemix
