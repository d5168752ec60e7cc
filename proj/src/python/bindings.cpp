#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>
#include <sstream>

#include "codemix/cli/app.hpp"
#include "codemix/errors.hpp"
#include "codemix/markov.hpp"
#include "codemix/metrics.hpp"
#include "codemix/textprep.hpp"
#include "codemix/tokenizer.hpp"

namespace py = pybind11;
using namespace codemix;

namespace {

TransitionMatrix matrix_from(const std::vector<std::vector<double>>& rows) {
  if (rows.size() != kNumStates) throw py::value_error("transition matrix needs 3 rows");
  TransitionMatrix::Rows r{};
  for (std::size_t i = 0; i < kNumStates; ++i) {
    if (rows[i].size() != kNumStates) throw py::value_error("transition matrix rows need 3 entries");
    for (std::size_t j = 0; j < kNumStates; ++j) r[i][j] = rows[i][j];
  }
  return TransitionMatrix(r);
}

std::vector<std::vector<double>> rows_of(const TransitionMatrix::Rows& r) {
  std::vector<std::vector<double>> out;
  for (const auto& row : r) out.emplace_back(row.begin(), row.end());
  return out;
}

StateSequence sequence_from(const std::vector<std::string>& names) {
  StateSequence seq;
  for (const auto& n : names) seq.states.push_back(parse_state(n));
  if (!seq.states.empty()) seq.initial = seq.states.front();
  return seq;
}

std::vector<LabeledExample> examples_from(const std::vector<std::string>& texts,
                                          const std::vector<std::string>& labels) {
  if (texts.size() != labels.size()) throw Error(ErrorKind::LengthMismatch, "texts and labels differ in length");
  std::vector<LabeledExample> data;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    data.push_back({std::to_string(i + 1), texts[i], parse_label(labels[i])});
  }
  return data;
}

}  // namespace

PYBIND11_MODULE(_codemix, m) {
  m.doc() = "Native bindings for the codemix library";

  static py::exception<Error> error_type(m, "CodemixError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::reinterpret_borrow<py::object>(error_type.ptr())(e.what());
      inst.attr("kind") = std::string(to_string(e.kind()));
      inst.attr("detail") = e.detail();
      PyErr_SetObject(error_type.ptr(), inst.ptr());
    }
  });

  // markov
  m.def("preset_matrix", [](const std::string& name) {
    if (name == "model1") return rows_of(preset_model1().rows());
    if (name == "model2") return rows_of(preset_model2().rows());
    throw py::value_error("unknown preset '" + name + "'");
  }, py::arg("name"));
  m.def("parse_matrix", [](const std::string& csv) { return rows_of(TransitionMatrix::parse(csv).rows()); },
        py::arg("csv"));
  m.def("sample_states",
        [](const std::vector<std::vector<double>>& rows, const std::string& initial, std::size_t n,
           std::uint64_t seed) {
          const auto seq = sample_states(matrix_from(rows), parse_state(initial), n, seed);
          std::vector<std::string> out;
          out.reserve(seq.size());
          for (MixState s : seq.states) out.emplace_back(state_name(s));
          return out;
        },
        py::arg("matrix"), py::arg("initial") = "native", py::arg("n"), py::arg("seed"));
  m.def("transition_frequencies",
        [](const std::vector<std::string>& states) {
          return rows_of(empirical_transition_frequencies(sequence_from(states)));
        },
        py::arg("states"));
  m.def("synthesize",
        [](const std::vector<std::tuple<std::string, std::string, std::string>>& triples,
           const std::vector<std::string>& states) {
          ParallelCorpus corpus;
          for (const auto& [n, t, r] : triples) corpus.triples.push_back({n, t, r});
          return synthesize(corpus, sequence_from(states));
        },
        py::arg("triples"), py::arg("states"),
        "triples are (native, translated, transliterated)");

  // tokenizer
  py::class_<UnigramVocab>(m, "Vocab")
      .def_static("train",
                  [](const std::vector<std::string>& lines, std::size_t size, std::size_t max_piece_len) {
                    TrainerOptions opts;
                    opts.max_piece_len = max_piece_len;
                    return train_unigram(lines, size, opts);
                  },
                  py::arg("lines"), py::arg("size"), py::arg("max_piece_len") = 16)
      .def_static("load", &load_vocab, py::arg("path"))
      .def_static("parse", &parse_vocab, py::arg("tsv"))
      .def("save", [](const UnigramVocab& v, const std::filesystem::path& p) { save_vocab(v, p); },
           py::arg("path"))
      .def("serialize", &serialize_vocab)
      .def("encode", [](const UnigramVocab& v, const std::string& text) { return viterbi_encode(v, text).ids; },
           py::arg("text"))
      .def("decode", [](const UnigramVocab& v, const std::vector<int>& ids) { return decode(v, ids); },
           py::arg("ids"))
      .def("piece", &UnigramVocab::piece, py::arg("id"))
      .def_property_readonly("pieces", &UnigramVocab::pieces)
      .def_property_readonly("log_probs", &UnigramVocab::log_probs)
      .def_property_readonly("num_scored", &UnigramVocab::num_scored)
      .def_property_readonly("fingerprint", [](const UnigramVocab& v) { return vocab_fingerprint(v); })
      .def("__len__", &UnigramVocab::size);
  m.def("normalize_text", &normalize_text, py::arg("text"));

  // textprep
  m.def("preprocess", &preprocess, py::arg("text"));
  m.def("is_roman_only", [](const std::string& t) { return is_roman_only(t); }, py::arg("text"));
  m.def("count_tokens", &count_tokens, py::arg("text"));
  m.def("dataset_stats",
        [](const std::vector<std::string>& texts, const std::vector<std::string>& labels) {
          const auto data = examples_from(texts, labels);
          const auto s = compute_stats(data);
          py::dict d;
          d["n_examples"] = s.n_examples;
          d["n_classes"] = s.n_classes;
          d["pct_roman_only"] = s.pct_roman_only;
          d["class_counts"] = s.class_counts;
          d["min_examples_per_class"] = s.min_examples_per_class;
          d["max_examples_per_class"] = s.max_examples_per_class;
          d["avg_examples_per_class"] = s.avg_examples_per_class;
          d["min_tokens"] = s.min_tokens;
          d["max_tokens"] = s.max_tokens;
          d["avg_tokens"] = s.avg_tokens;
          d["median_tokens"] = s.median_tokens;
          return d;
        },
        py::arg("texts"), py::arg("labels"));

  // metrics
  m.def("evaluate_json",
        [](const std::vector<std::string>& golds, const std::vector<std::string>& preds) {
          return to_json(weighted_prf(confusion(golds, preds))).dump();
        },
        py::arg("golds"), py::arg("preds"));

  // cli
  m.def("run_cli",
        [](std::vector<std::string> args) {
          args.insert(args.begin(), "codemix");
          std::ostringstream out, err;
          int code = 0;
          {
            py::gil_scoped_release release;
            code = cli::run(args, out, err);
          }
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs one codemix subcommand; returns (exit_code, stdout, stderr).");
}
