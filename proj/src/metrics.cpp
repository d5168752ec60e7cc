#include "codemix/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "codemix/errors.hpp"

namespace codemix {

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) {
    for (auto c : row) n += c;
  }
  return n;
}

ConfusionMatrix confusion(std::span<const std::string> golds, std::span<const std::string> preds) {
  if (golds.size() != preds.size()) {
    throw Error(ErrorKind::LengthMismatch,
                std::to_string(golds.size()) + " gold labels vs " + std::to_string(preds.size()) +
                    " predictions",
                static_cast<std::int64_t>(golds.size()));
  }
  std::set<std::string> labels(golds.begin(), golds.end());
  labels.insert(preds.begin(), preds.end());
  ConfusionMatrix cm;
  cm.labels.assign(labels.begin(), labels.end());
  cm.counts.assign(cm.labels.size(), std::vector<std::size_t>(cm.labels.size(), 0));
  auto index = [&](const std::string& l) {
    return static_cast<std::size_t>(
        std::lower_bound(cm.labels.begin(), cm.labels.end(), l) - cm.labels.begin());
  };
  for (std::size_t i = 0; i < golds.size(); ++i) ++cm.counts[index(golds[i])][index(preds[i])];
  return cm;
}

EvalReport weighted_prf(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw Error(ErrorKind::EmptyMatrix, "confusion matrix has no entries");
  EvalReport r;
  r.matrix = cm;
  r.total = total;
  const std::size_t n = cm.labels.size();
  std::size_t correct = 0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t predicted = 0;
    std::size_t support = 0;
    for (std::size_t k = 0; k < n; ++k) {
      predicted += cm.counts[k][c];
      support += cm.counts[c][k];
    }
    const auto tp = static_cast<double>(cm.counts[c][c]);
    correct += cm.counts[c][c];
    ClassMetrics m;
    m.label = cm.labels[c];
    m.support = support;
    m.precision = predicted ? tp / static_cast<double>(predicted) : 0.0;
    m.recall = support ? tp / static_cast<double>(support) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    const double w = static_cast<double>(support) / static_cast<double>(total);
    r.weighted_precision += w * m.precision;
    r.weighted_recall += w * m.recall;
    r.weighted_f1 += w * m.f1;
    r.per_class.push_back(std::move(m));
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  return r;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j;
  j["weighted_precision"] = report.weighted_precision;
  j["weighted_recall"] = report.weighted_recall;
  j["weighted_f1"] = report.weighted_f1;
  j["accuracy"] = report.accuracy;
  j["total"] = report.total;
  auto& classes = j["per_class"] = nlohmann::json::array();
  for (const auto& m : report.per_class) {
    classes.push_back({{"label", m.label},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1},
                       {"support", m.support}});
  }
  j["confusion"] = {{"labels", report.matrix.labels}, {"counts", report.matrix.counts}};
  return j;
}

std::string format_report(const EvalReport& report) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-12s %9s %9s %9s %9s\n", "label", "precision", "recall",
                "f1", "support");
  out += buf;
  for (const auto& m : report.per_class) {
    std::snprintf(buf, sizeof(buf), "%-12s %9.2f %9.2f %9.2f %9zu\n", m.label.c_str(), m.precision,
                  m.recall, m.f1, m.support);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "%-12s %9.2f %9.2f %9.2f %9zu\n", "weighted",
                report.weighted_precision, report.weighted_recall, report.weighted_f1,
                report.total);
  out += buf;
  return out;
}

}  // namespace codemix
