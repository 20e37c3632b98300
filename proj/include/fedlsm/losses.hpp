#pragma once

// Local training objectives. Every loss takes raw logits and returns the loss
// value together with dL/dlogits, ready for backward().

#include "fedlsm/data.hpp"
#include "fedlsm/nn.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace fedlsm {

enum class PseudoState : std::int8_t { abstain, positive, negative };

struct PseudoLabelDecision {
  // Single-label: whether the teacher's label is kept, and which class.
  bool kept = false;
  int label = -1;
  // Multi-label: one state per class; identified classes always abstain.
  std::vector<PseudoState> states;

  std::size_t positives() const;
  std::size_t negatives() const;
};

// Keep iff the top probability reaches the threshold and its class is unknown.
PseudoLabelDecision decide_single(std::span<const double> probs, std::span<const int> unknown,
                                  double threshold);
// Per unknown class: positive if p >= tau_p, negative if p <= tau_n.
PseudoLabelDecision decide_multi(std::span<const double> probs, std::span<const int> unknown,
                                 double tau_p, double tau_n);

// Teacher prediction on one weakly augmented input, then the decision above.
PseudoLabelDecision pseudo_single(const ModelParams& teacher, std::span<const double> x_weak,
                                  std::span<const int> unknown, double threshold);
PseudoLabelDecision pseudo_multi(const ModelParams& teacher, std::span<const double> x_weak,
                                 std::span<const int> unknown, double tau_p, double tau_n);

struct LossResult {
  double loss = 0.0;
  Matrix dlogits;
  // Number of terms the loss was averaged over (0 means nothing contributed).
  std::size_t count = 0;
};

// Single-label: mean cross-entropy over samples carrying a class label.
// Multi-label: mean binary cross-entropy over known (sample, class) pairs with
// positive terms scaled by class_weights (empty = unweighted).
LossResult loss_identified(const Matrix& logits, std::span<const LabelRecord> labels, Task task,
                           std::span<const double> class_weights = {});

enum class UnknownNorm { kept, unlabeled };

// Pseudo-label loss on the student's strong-view logits. Single-label divides
// by the kept count (UnknownNorm::kept) or by unlabeled_count; multi-label
// divides by the batch size.
LossResult loss_unknown(const Matrix& logits, std::span<const PseudoLabelDecision> decisions, Task task,
                        UnknownNorm norm = UnknownNorm::kept, std::size_t unlabeled_count = 0);

// Soft target for a mixed sample; usable marks classes with a (pseudo)label.
struct SoftTarget {
  std::vector<double> y;
  std::vector<bool> usable;
};

// Single-label: soft cross-entropy averaged over rows. Multi-label: soft
// binary cross-entropy averaged over usable (row, class) pairs.
LossResult loss_soft(const Matrix& logits, std::span<const SoftTarget> targets, Task task);

// x = lam * x_l + (1 - lam) * x_h and likewise for labels.
std::pair<std::vector<double>, std::vector<double>> mixup(std::span<const double> x_l,
                                                          std::span<const double> y_l,
                                                          std::span<const double> x_h,
                                                          std::span<const double> y_h, double lam);

// Positive-term weights n_neg / n_pos clipped to [1, 100] from known labels.
// Classes without known positives get weight 1.
std::vector<double> positive_class_weights(const Dataset& dataset, std::size_t num_classes);

} // namespace fedlsm
