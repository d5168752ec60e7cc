#include "codemix/corpus.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "codemix/errors.hpp"
#include "codemix/utf8.hpp"

namespace codemix {

namespace {

using nlohmann::json;

[[noreturn]] void malformed(std::size_t line_no, const std::string& why) {
  throw Error(ErrorKind::MalformedRow, "line " + std::to_string(line_no) + ": " + why,
              static_cast<std::int64_t>(line_no));
}

std::string trimmed(std::string_view s) { return std::string(utf8::trim(s)); }

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      cols.push_back(line.substr(start));
      return cols;
    }
    cols.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

SentenceTriple parse_jsonl_row(std::string_view line, std::size_t line_no) {
  json row;
  try {
    row = json::parse(line);
  } catch (const json::parse_error& e) {
    malformed(line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!row.is_object() || row.size() != 3) {
    malformed(line_no, "expected an object with keys native/translated/transliterated");
  }
  SentenceTriple t;
  const std::array<std::pair<const char*, std::string*>, 3> fields{
      {{"native", &t.native}, {"translated", &t.translated}, {"transliterated", &t.transliterated}}};
  for (const auto& [key, dst] : fields) {
    auto it = row.find(key);
    if (it == row.end() || !it->is_string()) malformed(line_no, std::string("missing key ") + key);
    *dst = trimmed(it->get_ref<const std::string&>());
  }
  return t;
}

}  // namespace

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "jsonl") return CorpusFormat::Jsonl;
  if (name == "tsv") return CorpusFormat::Tsv;
  throw Error(ErrorKind::InvalidConfig, "unknown corpus format '" + std::string(name) + "'");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::IoError, "cannot open " + path.string() + ": " + std::strerror(errno));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::IoError, "cannot write " + path.string() + ": " + std::strerror(errno));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  utf8::require_valid(bytes);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < bytes.size()) {
    auto nl = bytes.find('\n', start);
    if (nl == std::string::npos) nl = bytes.size();
    lines.emplace_back(bytes.data() + start, nl - start);
    start = nl + 1;
  }
  return lines;
}

ParallelCorpus load_parallel_corpus(const std::filesystem::path& path, CorpusFormat format,
                                    CorpusLoadOptions options) {
  const auto lines = read_lines(path);
  ParallelCorpus corpus;
  corpus.source_id = path.string();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const std::string_view line = lines[i];
    if (utf8::trim(line).empty()) {
      ++corpus.skipped_blank_rows;
      continue;
    }
    SentenceTriple t;
    if (format == CorpusFormat::Jsonl) {
      t = parse_jsonl_row(line, line_no);
    } else {
      const auto cols = split_tabs(line);
      if (cols.size() != 3) {
        malformed(line_no, "expected 3 tab-separated columns, got " + std::to_string(cols.size()));
      }
      t = {trimmed(cols[0]), trimmed(cols[1]), trimmed(cols[2])};
    }
    for (const std::string* f : {&t.native, &t.translated, &t.transliterated}) {
      if (f->find('\n') != std::string::npos || f->find('\r') != std::string::npos) {
        malformed(line_no, "field contains a line break");
      }
    }
    const int blanks = int(t.native.empty()) + int(t.translated.empty()) +
                       int(t.transliterated.empty());
    if (blanks == 3) {
      ++corpus.skipped_blank_rows;
      continue;
    }
    if (blanks > 0 && !options.allow_blank_fields) malformed(line_no, "blank field");
    corpus.triples.push_back(std::move(t));
  }
  if (corpus.triples.empty()) {
    throw Error(ErrorKind::EmptyCorpus, "no valid rows in " + path.string());
  }
  return corpus;
}

void write_parallel_corpus(const ParallelCorpus& corpus, const std::filesystem::path& path,
                           CorpusFormat format) {
  std::string out;
  for (std::size_t i = 0; i < corpus.triples.size(); ++i) {
    const auto& t = corpus.triples[i];
    for (const std::string* f : {&t.native, &t.translated, &t.transliterated}) {
      const bool bad_char = f->find_first_of(format == CorpusFormat::Tsv ? "\n\r\t" : "\n\r") !=
                            std::string::npos;
      if (bad_char) malformed(i + 1, "field contains a line break or tab");
    }
    if (format == CorpusFormat::Jsonl) {
      json row = {{"native", t.native},
                  {"translated", t.translated},
                  {"transliterated", t.transliterated}};
      out += row.dump(-1, ' ', false, json::error_handler_t::strict);
    } else {
      out += t.native + '\t' + t.translated + '\t' + t.transliterated;
    }
    out += '\n';
  }
  write_file(path, out);
}

AlignmentReport validate_alignment(const ParallelCorpus& corpus) {
  AlignmentReport r;
  r.rows = corpus.size();
  std::set<std::tuple<std::string_view, std::string_view, std::string_view>> seen;
  std::array<double, 3> ratio_sum{};
  std::size_t ratio_rows = 0;
  for (const auto& t : corpus.triples) {
    const std::array<std::string_view, 3> v{utf8::trim(t.native), utf8::trim(t.translated),
                                            utf8::trim(t.transliterated)};
    bool any_blank = false;
    for (std::size_t k = 0; k < 3; ++k) {
      if (v[k].empty()) {
        ++r.blank_fields[k];
        any_blank = true;
      }
    }
    if (any_blank) ++r.rows_with_blank_field;
    seen.emplace(t.native, t.translated, t.transliterated);
    if (!v[0].empty()) {
      const double base = static_cast<double>(utf8::length(v[0]));
      for (std::size_t k = 0; k < 3; ++k) {
        ratio_sum[k] += static_cast<double>(utf8::length(v[k])) / base;
      }
      ++ratio_rows;
    }
  }
  r.duplicate_triples = r.rows - seen.size();
  if (ratio_rows > 0) {
    for (std::size_t k = 0; k < 3; ++k) r.mean_length_ratio[k] = ratio_sum[k] / double(ratio_rows);
  }
  return r;
}

void write_lines(const std::vector<std::string>& lines, const std::filesystem::path& path) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find('\n') != std::string::npos) {
      throw Error(ErrorKind::MalformedRow,
                  "line " + std::to_string(i + 1) + " contains an embedded newline",
                  static_cast<std::int64_t>(i + 1));
    }
    out += lines[i];
    out += '\n';
  }
  write_file(path, out);
}

}  // namespace codemix
