#include "codemix/tokenizer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>

#include "codemix/corpus.hpp"
#include "codemix/errors.hpp"
#include "codemix/rng.hpp"
#include "codemix/utf8.hpp"

namespace codemix {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

std::vector<std::size_t> char_offsets(std::string_view word) {
  std::vector<std::size_t> off;
  off.reserve(word.size() + 1);
  std::size_t i = 0;
  while (i < word.size()) {
    off.push_back(i);
    i += std::max<std::size_t>(1, utf8::sequence_length(static_cast<unsigned char>(word[i])));
  }
  off.push_back(word.size());
  return off;
}

struct Edge {
  std::size_t begin;
  std::size_t end;
  int id;
};

// Lattice edges of one word grouped by start position (edges sorted by begin).
std::vector<Edge> lattice(const UnigramVocab& v, std::string_view word,
                          const std::vector<std::size_t>& offsets) {
  std::vector<Edge> edges;
  const std::size_t n = offsets.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    v.for_each_match(word, offsets, i, [&](std::size_t j, int id) { edges.push_back({i, j, id}); });
  }
  return edges;
}

// Log marginal over paths; `skip` excludes one piece id.
double forward_logz(const UnigramVocab& v, const std::vector<Edge>& edges, std::size_t n,
                    int skip = -1) {
  std::vector<double> alpha(n + 1, kNegInf);
  alpha[0] = 0.0;
  for (const auto& e : edges) {
    if (e.id == skip || alpha[e.begin] == kNegInf) continue;
    alpha[e.end] = log_add(alpha[e.end], alpha[e.begin] + v.log_prob(e.id));
  }
  return alpha[n];
}

[[noreturn]] void unsegmentable(const TrainingCorpus& corpus, std::size_t w) {
  throw Error(ErrorKind::UnsegmentableLine,
              "line " + std::to_string(corpus.first_line[w]) + ": word '" + corpus.words[w] +
                  "' has no segmentation",
              static_cast<std::int64_t>(corpus.first_line[w]));
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

[[noreturn]] void bad_vocab_row(std::size_t line_no, const std::string& why) {
  throw Error(ErrorKind::MalformedVocabRow, "line " + std::to_string(line_no) + ": " + why,
              static_cast<std::int64_t>(line_no));
}

}  // namespace

// -- text normalization -------------------------------------------------------

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  std::size_t i = 0;
  while (i < text.size()) {
    const bool marker = text.substr(i, kWordBoundary.size()) == kWordBoundary;
    if (marker || utf8::is_ascii_space(text[i])) {
      pending_space = !out.empty();
      i += marker ? kWordBoundary.size() : 1;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(text[i]);
    ++i;
  }
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  const std::string norm = normalize_text(text);
  std::vector<std::string> words;
  std::size_t start = 0;
  while (start < norm.size()) {
    auto sp = norm.find(' ', start);
    if (sp == std::string::npos) sp = norm.size();
    words.push_back(std::string(kWordBoundary) + norm.substr(start, sp - start));
    start = sp + 1;
  }
  return words;
}

TrainingCorpus TrainingCorpus::from_lines(std::span<const std::string> lines) {
  std::map<std::string, std::pair<double, std::size_t>> counts;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    for (auto& w : split_words(lines[i])) {
      auto [it, inserted] = counts.try_emplace(std::move(w), 0.0, i + 1);
      it->second.first += 1.0;
    }
  }
  TrainingCorpus c;
  for (auto& [w, fl] : counts) {
    c.words.push_back(w);
    c.freqs.push_back(fl.first);
    c.first_line.push_back(fl.second);
  }
  return c;
}

// -- vocabulary ---------------------------------------------------------------

UnigramVocab::UnigramVocab(std::vector<std::pair<std::string, double>> pieces,
                           std::size_t target_size)
    : target_size_(target_size) {
  std::set<std::string_view> seen;
  pieces_.reserve(pieces.size());
  log_probs_.reserve(pieces.size());
  for (auto& [p, lp] : pieces) {
    if (p.empty()) bad_vocab_row(pieces_.size() + 1, "empty piece");
    if (!std::isfinite(lp) || lp > 0.0) bad_vocab_row(pieces_.size() + 1, "bad log-prob for " + p);
    pieces_.push_back(std::move(p));
    log_probs_.push_back(lp);
  }
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (!seen.insert(pieces_[i]).second) bad_vocab_row(i + 1, "duplicate piece " + pieces_[i]);
  }
  build_index();
}

void UnigramVocab::build_index() {
  trie_.clear();
  node_piece_.assign(1, -1);
  max_piece_chars_ = 1;
  min_log_prob_ = 0.0;
  for (std::size_t id = 0; id < pieces_.size(); ++id) {
    std::uint32_t node = 0;
    for (unsigned char b : pieces_[id]) {
      const auto key = (static_cast<std::uint64_t>(node) << 8) | b;
      auto it = trie_.find(key);
      if (it == trie_.end()) {
        it = trie_.emplace(key, static_cast<std::uint32_t>(node_piece_.size())).first;
        node_piece_.push_back(-1);
      }
      node = it->second;
    }
    node_piece_[node] = static_cast<int>(id);
    max_piece_chars_ = std::max(max_piece_chars_, utf8::length(pieces_[id]));
    min_log_prob_ = std::min(min_log_prob_, log_probs_[id]);
  }
  byte_names_.resize(kNumBytePieces);
  for (std::size_t b = 0; b < kNumBytePieces; ++b) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "<0x%02X>", static_cast<unsigned>(b));
    byte_names_[b] = buf;
  }
}

const std::string& UnigramVocab::piece(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= size()) {
    throw Error(ErrorKind::UnknownId, "piece id " + std::to_string(id) + " out of range", id);
  }
  const auto u = static_cast<std::size_t>(id);
  return u < pieces_.size() ? pieces_[u] : byte_names_[u - pieces_.size()];
}

std::optional<int> UnigramVocab::find(std::string_view piece) const {
  std::uint32_t node = 0;
  for (unsigned char b : piece) {
    const auto it = trie_.find((static_cast<std::uint64_t>(node) << 8) | b);
    if (it == trie_.end()) return std::nullopt;
    node = it->second;
  }
  if (piece.empty() || node_piece_[node] < 0) return std::nullopt;
  return node_piece_[node];
}

bool UnigramVocab::is_required(int id) const {
  return !is_byte(id) && utf8::length(pieces_[static_cast<std::size_t>(id)]) == 1;
}

double UnigramVocab::total_probability() const {
  double s = 0.0;
  for (double lp : log_probs_) s += std::exp(lp);
  return s;
}

// -- training -----------------------------------------------------------------

std::map<std::string, double> substring_counts(const TrainingCorpus& corpus, std::size_t max_len) {
  std::map<std::string, double> counts;
  for (std::size_t w = 0; w < corpus.words.size(); ++w) {
    const std::string& word = corpus.words[w];
    const auto off = char_offsets(word);
    const std::size_t n = off.size() - 1;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j <= std::min(n, i + max_len); ++j) {
        counts[word.substr(off[i], off[j] - off[i])] += corpus.freqs[w];
      }
    }
  }
  return counts;
}

UnigramVocab build_seed_vocab(const TrainingCorpus& corpus, std::size_t max_piece_len,
                              std::size_t seed_size) {
  if (corpus.empty()) throw Error(ErrorKind::EmptyCorpus, "cannot seed a vocabulary from no text");
  max_piece_len = std::max<std::size_t>(1, max_piece_len);
  const auto counts = substring_counts(corpus, max_piece_len);

  std::vector<std::pair<std::string, double>> chars;
  std::vector<std::pair<std::string, double>> longer;
  for (const auto& [s, c] : counts) {
    (utf8::length(s) == 1 ? chars : longer).emplace_back(s, c);
  }
  seed_size = std::max(seed_size, chars.size());
  const std::size_t n_longer = std::min(longer.size(), seed_size - chars.size());
  std::partial_sort(longer.begin(), longer.begin() + static_cast<std::ptrdiff_t>(n_longer),
                    longer.end(), [](const auto& a, const auto& b) {
                      return a.second != b.second ? a.second > b.second : a.first < b.first;
                    });
  longer.resize(n_longer);

  std::vector<std::pair<std::string, double>> pieces = std::move(chars);
  pieces.insert(pieces.end(), longer.begin(), longer.end());
  double total = 0.0;
  for (const auto& p : pieces) total += p.second;
  for (auto& p : pieces) p.second = std::log(p.second / total);
  std::stable_sort(pieces.begin(), pieces.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return UnigramVocab(std::move(pieces));
}

UnigramVocab build_seed_vocab(std::span<const std::string> lines, std::size_t max_piece_len,
                              std::size_t seed_size) {
  return build_seed_vocab(TrainingCorpus::from_lines(lines), max_piece_len, seed_size);
}

double corpus_log_likelihood(const UnigramVocab& v, const TrainingCorpus& corpus) {
  double ll = 0.0;
  for (std::size_t w = 0; w < corpus.words.size(); ++w) {
    const auto off = char_offsets(corpus.words[w]);
    const double z = forward_logz(v, lattice(v, corpus.words[w], off), off.size() - 1);
    if (z == kNegInf) unsegmentable(corpus, w);
    ll += corpus.freqs[w] * z;
  }
  return ll;
}

std::pair<UnigramVocab, double> em_round(const UnigramVocab& v, const TrainingCorpus& corpus) {
  std::vector<double> expected(v.num_scored(), 0.0);
  double ll = 0.0;
  for (std::size_t w = 0; w < corpus.words.size(); ++w) {
    const std::string& word = corpus.words[w];
    const auto off = char_offsets(word);
    const std::size_t n = off.size() - 1;
    const auto edges = lattice(v, word, off);

    std::vector<double> alpha(n + 1, kNegInf);
    std::vector<double> beta(n + 1, kNegInf);
    alpha[0] = 0.0;
    beta[n] = 0.0;
    for (const auto& e : edges) {
      if (alpha[e.begin] != kNegInf) {
        alpha[e.end] = log_add(alpha[e.end], alpha[e.begin] + v.log_prob(e.id));
      }
    }
    for (auto it = edges.rbegin(); it != edges.rend(); ++it) {
      if (beta[it->end] != kNegInf) {
        beta[it->begin] = log_add(beta[it->begin], v.log_prob(it->id) + beta[it->end]);
      }
    }
    const double z = alpha[n];
    if (z == kNegInf) unsegmentable(corpus, w);
    ll += corpus.freqs[w] * z;
    for (const auto& e : edges) {
      const double post = alpha[e.begin] + v.log_prob(e.id) + beta[e.end] - z;
      if (post != kNegInf) expected[static_cast<std::size_t>(e.id)] += corpus.freqs[w] * std::exp(post);
    }
  }

  // Pieces whose expected count underflows keep a vanishing floor so their
  // log-prob stays finite; pruning removes them first.
  constexpr double kFloor = 1e-250;
  double total = 0.0;
  std::vector<std::pair<std::string, double>> kept;
  for (std::size_t id = 0; id < v.num_scored(); ++id) {
    const double c = std::max(expected[id], kFloor);
    kept.emplace_back(v.pieces()[id], c);
    total += c;
  }
  for (auto& p : kept) p.second = std::min(0.0, std::log(p.second / total));
  return {UnigramVocab(std::move(kept), v.target_size()), ll};
}

std::vector<double> removal_losses(const UnigramVocab& v, const TrainingCorpus& corpus) {
  std::vector<double> loss(v.num_scored(), 0.0);
  std::vector<int> ids;
  for (std::size_t w = 0; w < corpus.words.size(); ++w) {
    const auto off = char_offsets(corpus.words[w]);
    const std::size_t n = off.size() - 1;
    const auto edges = lattice(v, corpus.words[w], off);
    const double z = forward_logz(v, edges, n);
    if (z == kNegInf) unsegmentable(corpus, w);
    ids.clear();
    for (const auto& e : edges) {
      if (!v.is_required(e.id)) ids.push_back(e.id);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (int id : ids) {
      const double z_without = forward_logz(v, edges, n, id);
      const double delta = z_without == kNegInf ? std::numeric_limits<double>::infinity()
                                                : corpus.freqs[w] * (z - z_without);
      loss[static_cast<std::size_t>(id)] += delta;
    }
  }
  return loss;
}

UnigramVocab prune(const UnigramVocab& v, const TrainingCorpus& corpus, double keep_fraction) {
  const std::size_t target = v.target_size();
  if (v.num_scored() <= target) return v;
  std::vector<int> prunable;
  for (std::size_t id = 0; id < v.num_scored(); ++id) {
    if (!v.is_required(static_cast<int>(id))) prunable.push_back(static_cast<int>(id));
  }
  if (prunable.empty()) return v;

  auto n_remove = static_cast<std::size_t>(
      std::floor(static_cast<double>(prunable.size()) * (1.0 - keep_fraction)));
  n_remove = std::max<std::size_t>(1, n_remove);
  n_remove = std::min({n_remove, v.num_scored() - target, prunable.size()});

  const auto loss = removal_losses(v, corpus);
  std::sort(prunable.begin(), prunable.end(), [&](int a, int b) {
    const double la = loss[static_cast<std::size_t>(a)];
    const double lb = loss[static_cast<std::size_t>(b)];
    return la != lb ? la < lb : v.pieces()[static_cast<std::size_t>(a)] < v.pieces()[static_cast<std::size_t>(b)];
  });
  std::vector<bool> removed(v.num_scored(), false);
  for (std::size_t k = 0; k < n_remove; ++k) removed[static_cast<std::size_t>(prunable[k])] = true;

  std::vector<std::pair<std::string, double>> kept;
  double mass = 0.0;
  for (std::size_t id = 0; id < v.num_scored(); ++id) {
    if (removed[id]) continue;
    kept.emplace_back(v.pieces()[id], v.log_probs()[id]);
    mass += std::exp(v.log_probs()[id]);
  }
  const double log_mass = std::log(mass);
  for (auto& p : kept) p.second = std::min(0.0, p.second - log_mass);
  return UnigramVocab(std::move(kept), target);
}

UnigramVocab train_unigram(std::span<const std::string> lines, std::size_t target_size,
                           const TrainerOptions& opts) {
  const auto corpus = TrainingCorpus::from_lines(lines);
  if (corpus.empty()) throw Error(ErrorKind::EmptyCorpus, "cannot train a tokenizer on no text");
  std::set<std::string> chars;
  for (const auto& w : corpus.words) {
    for (auto& c : utf8::split_chars(w)) chars.insert(std::move(c));
  }
  if (target_size < chars.size()) {
    throw Error(ErrorKind::TargetTooSmall,
                "vocab size " + std::to_string(target_size) + " is below the " +
                    std::to_string(chars.size()) + " distinct characters of the corpus",
                static_cast<std::int64_t>(target_size));
  }
  const std::size_t seed_size = opts.seed_size ? opts.seed_size : 4 * target_size;
  UnigramVocab v = build_seed_vocab(corpus, opts.max_piece_len, seed_size);
  v.set_target_size(target_size);

  for (;;) {
    for (int r = 0; r < opts.em_rounds_per_prune; ++r) v = em_round(v, corpus).first;
    if (v.num_scored() <= target_size) break;
    const std::size_t before = v.num_scored();
    v = prune(v, corpus, opts.keep_fraction);
    if (v.num_scored() == before) break;
  }
  for (int r = 0; r < opts.final_em_rounds; ++r) v = em_round(v, corpus).first;

  std::vector<std::pair<std::string, double>> pieces;
  for (std::size_t id = 0; id < v.num_scored(); ++id) {
    pieces.emplace_back(v.pieces()[id], v.log_probs()[id]);
  }
  std::stable_sort(pieces.begin(), pieces.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return UnigramVocab(std::move(pieces), target_size);
}

// -- encoding -----------------------------------------------------------------

Segmentation viterbi_word(const UnigramVocab& v, std::string_view word) {
  const auto off = char_offsets(word);
  const std::size_t n = off.size() - 1;

  struct Cell {
    bool reached = false;
    double score = kNegInf;
    std::size_t count = 0;
    std::size_t prev = 0;
    int id = -1;  // -1: unknown character emitted as bytes
  };
  std::vector<Cell> best(n + 1);
  best[0].reached = true;
  best[0].score = 0.0;

  auto path_pieces = [&](std::size_t end, std::size_t extra_begin, std::size_t extra_end,
                         int extra_id) {
    std::vector<std::string_view> seq;
    auto emit = [&](std::size_t b, std::size_t e, int id) {
      if (id >= 0) {
        seq.emplace_back(v.piece(id));
      } else {
        for (std::size_t k = off[b]; k < off[e]; ++k) {
          seq.emplace_back(v.piece(v.byte_id(static_cast<unsigned char>(word[k]))));
        }
      }
    };
    std::vector<std::tuple<std::size_t, std::size_t, int>> hops;
    for (std::size_t pos = end; pos > 0; pos = best[pos].prev) {
      hops.emplace_back(best[pos].prev, pos, best[pos].id);
    }
    for (auto it = hops.rbegin(); it != hops.rend(); ++it) emit(std::get<0>(*it), std::get<1>(*it), std::get<2>(*it));
    if (extra_end > extra_begin) emit(extra_begin, extra_end, extra_id);
    return seq;
  };

  auto relax = [&](std::size_t i, std::size_t j, int id, double score, std::size_t count) {
    Cell& cur = best[j];
    bool take = !cur.reached || score > cur.score || (score == cur.score && count < cur.count);
    if (!take && score == cur.score && count == cur.count) {
      take = path_pieces(i, i, j, id) < path_pieces(j, 0, 0, -1);
    }
    if (take) cur = Cell{true, score, count, i, id};
  };

  const double unk = v.unknown_score();
  for (std::size_t i = 0; i < n; ++i) {
    if (!best[i].reached) continue;
    bool single = false;
    v.for_each_match(word, off, i, [&](std::size_t j, int id) {
      if (j == i + 1) single = true;
      relax(i, j, id, best[i].score + v.log_prob(id), best[i].count + 1);
    });
    if (!single) relax(i, i + 1, -1, best[i].score + unk, best[i].count + (off[i + 1] - off[i]));
  }

  Segmentation seg;
  seg.score = n == 0 ? 0.0 : best[n].score;
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (std::size_t pos = n; pos > 0; pos = best[pos].prev) spans.emplace_back(best[pos].prev, pos);
  for (auto it = spans.rbegin(); it != spans.rend(); ++it) {
    const int id = best[it->second].id;
    if (id >= 0) {
      seg.ids.push_back(id);
    } else {
      for (std::size_t k = off[it->first]; k < off[it->second]; ++k) {
        seg.ids.push_back(v.byte_id(static_cast<unsigned char>(word[k])));
      }
    }
  }
  return seg;
}

Segmentation viterbi_encode(const UnigramVocab& v, std::string_view text) {
  utf8::require_valid(text);
  Segmentation out;
  for (const auto& w : split_words(text)) {
    auto seg = viterbi_word(v, w);
    out.ids.insert(out.ids.end(), seg.ids.begin(), seg.ids.end());
    out.score += seg.score;
  }
  return out;
}

std::string decode(const UnigramVocab& v, std::span<const int> ids) {
  std::string raw;
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= v.size()) {
      throw Error(ErrorKind::UnknownId, "piece id " + std::to_string(id) + " out of range", id);
    }
    if (v.is_byte(id)) {
      raw.push_back(static_cast<char>(static_cast<std::size_t>(id) - v.num_scored()));
    } else {
      raw += v.piece(id);
    }
  }
  std::string out;
  out.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    if (raw.compare(i, kWordBoundary.size(), kWordBoundary) == 0) {
      if (!out.empty()) out.push_back(' ');
      i += kWordBoundary.size();
    } else {
      out.push_back(raw[i++]);
    }
  }
  return out;
}

std::size_t count_byte_pieces(const UnigramVocab& v, std::span<const int> ids) {
  return static_cast<std::size_t>(std::count_if(ids.begin(), ids.end(), [&](int id) { return v.is_byte(id); }));
}

// -- persistence --------------------------------------------------------------

std::string serialize_vocab(const UnigramVocab& v) {
  std::string out;
  for (std::size_t id = 0; id < v.num_scored(); ++id) {
    out += v.pieces()[id];
    out += '\t';
    out += format_double(v.log_probs()[id]);
    out += '\n';
  }
  return out;
}

UnigramVocab parse_vocab(std::string_view tsv) {
  utf8::require_valid(tsv);
  std::vector<std::pair<std::string, double>> pieces;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < tsv.size()) {
    ++line_no;
    auto nl = tsv.find('\n', start);
    if (nl == std::string_view::npos) nl = tsv.size();
    const std::string_view line = tsv.substr(start, nl - start);
    start = nl + 1;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) bad_vocab_row(line_no, "missing tab");
    if (line.find('\t', tab + 1) != std::string_view::npos) bad_vocab_row(line_no, "extra column");
    const std::string_view num = line.substr(tab + 1);
    double lp = 0.0;
    const auto res = std::from_chars(num.data(), num.data() + num.size(), lp);
    if (res.ec != std::errc{} || res.ptr != num.data() + num.size()) {
      bad_vocab_row(line_no, "bad log-prob '" + std::string(num) + "'");
    }
    pieces.emplace_back(std::string(line.substr(0, tab)), lp);
  }
  const std::size_t n = pieces.size();
  return UnigramVocab(std::move(pieces), n);
}

void save_vocab(const UnigramVocab& v, const std::filesystem::path& path) {
  write_file(path, serialize_vocab(v));
}

UnigramVocab load_vocab(const std::filesystem::path& path) { return parse_vocab(read_file(path)); }

std::string vocab_fingerprint(const UnigramVocab& v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(serialize_vocab(v))));
  return buf;
}

}  // namespace codemix
