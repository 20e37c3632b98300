#pragma once

#include "fedlsm/data.hpp"
#include "fedlsm/matrix.hpp"

#include <optional>
#include <span>
#include <vector>

namespace fedlsm {

// Mann-Whitney AUC: P(pos > neg) + 0.5 P(tie), via midrank sums. Undefined
// (nullopt) unless both classes are present.
std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels);

struct EvalResult {
  std::vector<double> per_class_auc; // NaN where undefined
  double macro_auc = 0.0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  std::size_t evaluated_classes = 0;
};

// probs: N x M. true_labels: N rows of length M with entries in {0, 1}.
// Single-label predicts the argmax; multi-label thresholds each class at 0.5
// and reports accuracy over all (sample, class) decisions. Macro scores
// average over classes with at least one positive and one negative instance;
// 0/0 counts as 0.
EvalResult macro_metrics(const Matrix& probs, std::span<const std::vector<double>> true_labels, Task task);

} // namespace fedlsm
