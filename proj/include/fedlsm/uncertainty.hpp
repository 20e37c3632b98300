#pragma once

// Entropy-based uncertainty estimation with the global model, splitting a
// client's data into confident (low), medium and uncertain (high) subsets.

#include "fedlsm/data.hpp"
#include "fedlsm/nn.hpp"

#include <span>
#include <vector>

namespace fedlsm {

// -sum p ln p with 0 ln 0 = 0. Requires a distribution (sum 1 +- 1e-6).
double entropy_single(std::span<const double> probs);

enum class MultiEntropyReduce { mean, max };

// Binary entropy of each unknown class, in bits, reduced by mean (default) or
// max. Result lies in [0, 1].
double entropy_multi(std::span<const double> probs, std::span<const int> unknown,
                     MultiEntropyReduce reduce = MultiEntropyReduce::mean);

struct UncertaintyPartition {
  std::vector<std::size_t> low;
  std::vector<std::size_t> mid;
  std::vector<std::size_t> high;
  std::vector<double> entropy; // per sample, indexed like the dataset
};

// Orders samples by (entropy, index) ascending; the first round(frac_l * n)
// are low, the last round(frac_h * n) are high. For multi-label data with no
// unknown classes every score is 0.
UncertaintyPartition partition_by_entropy(std::span<const double> entropy, double frac_l, double frac_h);

UncertaintyPartition partition(const Dataset& dataset, const ModelParams& global, Task task,
                               std::span<const int> unknown, double frac_l, double frac_h,
                               MultiEntropyReduce reduce = MultiEntropyReduce::mean);

} // namespace fedlsm
