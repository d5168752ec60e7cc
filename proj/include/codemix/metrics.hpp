#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace codemix {

/// Rows are gold labels, columns predicted labels, both in `labels` order.
struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> counts;

  std::size_t total() const;
};

/// Label set is the sorted union of observed labels. Throws LengthMismatch.
ConfusionMatrix confusion(std::span<const std::string> golds, std::span<const std::string> preds);

struct ClassMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct EvalReport {
  std::vector<ClassMetrics> per_class;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  std::size_t total = 0;
  ConfusionMatrix matrix;
};

/// Support-weighted precision/recall/F1. Undefined ratios count as 0.
/// Throws EmptyMatrix.
EvalReport weighted_prf(const ConfusionMatrix& cm);

nlohmann::json to_json(const EvalReport& report);

/// Two-decimal table, leader-board style.
std::string format_report(const EvalReport& report);

}  // namespace codemix
