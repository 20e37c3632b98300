#include "fedlsm/uncertainty.hpp"

#include "fedlsm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fedlsm {

double entropy_single(std::span<const double> probs) {
  double total = 0.0;
  double h = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || p > 1.0 + 1e-12)
      throw DomainError("entropy_single: probabilities must lie in [0, 1]");
    total += p;
    if (p > 0.0)
      h -= p * std::log(p);
  }
  if (std::abs(total - 1.0) > 1e-6)
    throw DomainError("entropy_single: probabilities must sum to 1");
  return std::max(0.0, h);
}

namespace {
double binary_entropy_bits(double p) {
  double h = 0.0;
  if (p > 0.0)
    h -= p * std::log(p);
  if (p < 1.0)
    h -= (1.0 - p) * std::log1p(-p);
  return std::clamp(h / std::log(2.0), 0.0, 1.0);
}
} // namespace

double entropy_multi(std::span<const double> probs, std::span<const int> unknown,
                     MultiEntropyReduce reduce) {
  if (unknown.empty())
    throw DomainError("entropy_multi: unknown class set is empty");
  double acc = 0.0;
  for (int c : unknown) {
    if (c < 0 || static_cast<std::size_t>(c) >= probs.size())
      throw DomainError("entropy_multi: class index out of range");
    const double p = probs[static_cast<std::size_t>(c)];
    if (!(p >= 0.0 && p <= 1.0))
      throw DomainError("entropy_multi: probabilities must lie in [0, 1]");
    const double h = binary_entropy_bits(p);
    acc = reduce == MultiEntropyReduce::mean ? acc + h : std::max(acc, h);
  }
  return reduce == MultiEntropyReduce::mean ? acc / static_cast<double>(unknown.size()) : acc;
}

UncertaintyPartition partition_by_entropy(std::span<const double> entropy, double frac_l,
                                          double frac_h) {
  if (!(frac_l >= 0.0 && frac_h >= 0.0) || frac_l + frac_h > 1.0 + 1e-12)
    throw ConfigError("partition: frac_l and frac_h must be nonnegative with frac_l + frac_h <= 1");
  const std::size_t n = entropy.size();
  if (n == 0)
    throw ConfigError("partition: dataset is empty");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return entropy[a] < entropy[b] || (entropy[a] == entropy[b] && a < b);
  });

  const auto n_low = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(frac_l * static_cast<double>(n))));
  const auto n_high =
      std::min<std::size_t>(n - n_low, static_cast<std::size_t>(std::llround(frac_h * static_cast<double>(n))));

  UncertaintyPartition part;
  part.entropy.assign(entropy.begin(), entropy.end());
  part.low.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_low));
  part.mid.assign(order.begin() + static_cast<std::ptrdiff_t>(n_low),
                  order.end() - static_cast<std::ptrdiff_t>(n_high));
  part.high.assign(order.end() - static_cast<std::ptrdiff_t>(n_high), order.end());
  return part;
}

UncertaintyPartition partition(const Dataset& dataset, const ModelParams& global, Task task,
                               std::span<const int> unknown, double frac_l, double frac_h,
                               MultiEntropyReduce reduce) {
  if (dataset.empty())
    throw ConfigError("partition: dataset is empty");
  if (!(frac_l >= 0.0 && frac_h >= 0.0) || frac_l + frac_h > 1.0 + 1e-12)
    throw ConfigError("partition: frac_l and frac_h must be nonnegative with frac_l + frac_h <= 1");

  Matrix batch(dataset.size(), dataset.front().x.size());
  for (std::size_t i = 0; i < dataset.size(); ++i)
    std::copy(dataset[i].x.begin(), dataset[i].x.end(), batch.row(i).begin());
  const Matrix logits = forward(global, batch).logits;

  std::vector<double> scores(dataset.size(), 0.0);
  if (task == Task::single_label) {
    const Matrix probs = softmax_rows(logits);
    for (std::size_t i = 0; i < dataset.size(); ++i)
      scores[i] = entropy_single(probs.row(i));
  } else if (!unknown.empty()) {
    const Matrix probs = sigmoid_rows(logits);
    for (std::size_t i = 0; i < dataset.size(); ++i)
      scores[i] = entropy_multi(probs.row(i), unknown, reduce);
  }
  return partition_by_entropy(scores, frac_l, frac_h);
}

} // namespace fedlsm
