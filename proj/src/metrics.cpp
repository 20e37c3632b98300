#include "fedlsm/metrics.hpp"

#include "fedlsm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fedlsm {

std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw ShapeError("roc_auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int l : labels)
    n_pos += l != 0 ? 1 : 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks (1-based) of tied runs; sums stay exact multiples of 0.5.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && scores[order[j]] == scores[order[i]])
      ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] != 0)
        rank_sum_pos += midrank;
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

EvalResult macro_metrics(const Matrix& probs, std::span<const std::vector<double>> true_labels, Task task) {
  if (probs.rows == 0)
    throw ConfigError("macro_metrics: empty test set");
  if (true_labels.size() != probs.rows)
    throw ShapeError("macro_metrics: one label row per prediction row required");
  const std::size_t n = probs.rows;
  const std::size_t m = probs.cols;

  EvalResult r;
  r.per_class_auc.assign(m, std::numeric_limits<double>::quiet_NaN());

  // Predicted label matrix.
  std::vector<std::uint8_t> pred(n * m, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (true_labels[i].size() != m)
      throw ShapeError("macro_metrics: label row length differs from class count");
    if (task == Task::single_label) {
      const auto row = probs.row(i);
      const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      pred[i * m + best] = 1;
      const auto& t = true_labels[i];
      const auto truth = static_cast<std::size_t>(std::max_element(t.begin(), t.end()) - t.begin());
      correct += best == truth ? 1 : 0;
    } else {
      for (std::size_t c = 0; c < m; ++c) {
        pred[i * m + c] = probs(i, c) >= 0.5 ? 1 : 0;
        correct += (pred[i * m + c] == 1) == (true_labels[i][c] > 0.5) ? 1 : 0;
      }
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(task == Task::single_label ? n : n * m);

  std::vector<double> scores(n);
  std::vector<int> truth(n);
  double auc_sum = 0.0, f1_sum = 0.0, prec_sum = 0.0, rec_sum = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = probs(i, c);
      truth[i] = true_labels[i][c] > 0.5 ? 1 : 0;
      const bool p = pred[i * m + c] != 0;
      tp += (p && truth[i]) ? 1 : 0;
      fp += (p && !truth[i]) ? 1 : 0;
      fn += (!p && truth[i]) ? 1 : 0;
    }
    const auto auc = roc_auc(scores, truth);
    if (!auc)
      continue;
    r.per_class_auc[c] = *auc;
    const double precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    auc_sum += *auc;
    prec_sum += precision;
    rec_sum += recall;
    f1_sum += f1;
    ++r.evaluated_classes;
  }
  if (r.evaluated_classes > 0) {
    const double k = static_cast<double>(r.evaluated_classes);
    r.macro_auc = auc_sum / k;
    r.macro_f1 = f1_sum / k;
    r.macro_precision = prec_sum / k;
    r.macro_recall = rec_sum / k;
  }
  return r;
}

} // namespace fedlsm
