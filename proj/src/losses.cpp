#include "fedlsm/losses.hpp"

#include "fedlsm/errors.hpp"

#include <algorithm>
#include <cmath>

namespace fedlsm {
namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

// log softmax of one row.
std::vector<double> log_softmax(std::span<const double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z)
    total += std::exp(v - mx);
  const double lse = mx + std::log(total);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    out[i] = z[i] - lse;
  return out;
}

bool contains(std::span<const int> set, int c) { return std::find(set.begin(), set.end(), c) != set.end(); }

Matrix single_row(std::span<const double> x) {
  Matrix m(1, x.size());
  std::copy(x.begin(), x.end(), m.data.begin());
  return m;
}

} // namespace

std::size_t PseudoLabelDecision::positives() const {
  return static_cast<std::size_t>(std::count(states.begin(), states.end(), PseudoState::positive));
}

std::size_t PseudoLabelDecision::negatives() const {
  return static_cast<std::size_t>(std::count(states.begin(), states.end(), PseudoState::negative));
}

PseudoLabelDecision decide_single(std::span<const double> probs, std::span<const int> unknown,
                                  double threshold) {
  PseudoLabelDecision d;
  if (probs.empty())
    return d;
  const auto it = std::max_element(probs.begin(), probs.end());
  const int cls = static_cast<int>(it - probs.begin());
  if (*it >= threshold && contains(unknown, cls)) {
    d.kept = true;
    d.label = cls;
  }
  return d;
}

PseudoLabelDecision decide_multi(std::span<const double> probs, std::span<const int> unknown,
                                 double tau_p, double tau_n) {
  PseudoLabelDecision d;
  d.states.assign(probs.size(), PseudoState::abstain);
  for (int c : unknown) {
    const double p = probs[static_cast<std::size_t>(c)];
    if (p >= tau_p)
      d.states[static_cast<std::size_t>(c)] = PseudoState::positive;
    else if (p <= tau_n)
      d.states[static_cast<std::size_t>(c)] = PseudoState::negative;
  }
  return d;
}

PseudoLabelDecision pseudo_single(const ModelParams& teacher, std::span<const double> x_weak,
                                  std::span<const int> unknown, double threshold) {
  const Matrix logits = forward(teacher, single_row(x_weak)).logits;
  return decide_single(softmax(logits.row(0)), unknown, threshold);
}

PseudoLabelDecision pseudo_multi(const ModelParams& teacher, std::span<const double> x_weak,
                                 std::span<const int> unknown, double tau_p, double tau_n) {
  if (!(tau_n < tau_p))
    throw ConfigError("pseudo_multi: tau_n must be below tau_p");
  const Matrix logits = forward(teacher, single_row(x_weak)).logits;
  return decide_multi(sigmoid(logits.row(0)), unknown, tau_p, tau_n);
}

LossResult loss_identified(const Matrix& logits, std::span<const LabelRecord> labels, Task task,
                           std::span<const double> class_weights) {
  if (labels.size() != logits.rows)
    throw ShapeError("loss_identified: one label record per logits row required");
  LossResult r{0.0, Matrix(logits.rows, logits.cols), 0};

  if (task == Task::single_label) {
    for (std::size_t i = 0; i < logits.rows; ++i) {
      const int cls = labels[i].known_class();
      if (cls < 0)
        continue;
      ++r.count;
      const auto lsm = log_softmax(logits.row(i));
      r.loss -= lsm[static_cast<std::size_t>(cls)];
      for (std::size_t c = 0; c < logits.cols; ++c)
        r.dlogits(i, c) = std::exp(lsm[c]) - (static_cast<int>(c) == cls ? 1.0 : 0.0);
    }
  } else {
    for (std::size_t i = 0; i < logits.rows; ++i) {
      for (std::size_t c = 0; c < logits.cols; ++c) {
        if (!labels[i].known_mask[c])
          continue;
        ++r.count;
        const double z = logits(i, c);
        const double y = labels[i].values[c];
        const double w = class_weights.empty() ? 1.0 : class_weights[c];
        r.loss += w * y * softplus(-z) + (1.0 - y) * softplus(z);
        const double p = sigmoid(z);
        r.dlogits(i, c) = p * (w * y + 1.0 - y) - w * y;
      }
    }
  }
  if (r.count > 0) {
    const double inv = 1.0 / static_cast<double>(r.count);
    r.loss *= inv;
    for (double& g : r.dlogits.data)
      g *= inv;
  }
  return r;
}

LossResult loss_unknown(const Matrix& logits, std::span<const PseudoLabelDecision> decisions, Task task,
                        UnknownNorm norm, std::size_t unlabeled_count) {
  if (decisions.size() != logits.rows)
    throw ShapeError("loss_unknown: one decision per logits row required");
  LossResult r{0.0, Matrix(logits.rows, logits.cols), 0};
  double denom = 0.0;

  if (task == Task::single_label) {
    for (std::size_t i = 0; i < logits.rows; ++i) {
      const auto& d = decisions[i];
      if (!d.kept)
        continue;
      ++r.count;
      const auto lsm = log_softmax(logits.row(i));
      r.loss -= lsm[static_cast<std::size_t>(d.label)];
      for (std::size_t c = 0; c < logits.cols; ++c)
        r.dlogits(i, c) = std::exp(lsm[c]) - (static_cast<int>(c) == d.label ? 1.0 : 0.0);
    }
    denom = norm == UnknownNorm::kept ? static_cast<double>(r.count)
                                      : static_cast<double>(std::max(unlabeled_count, r.count));
  } else {
    for (std::size_t i = 0; i < logits.rows; ++i) {
      const auto& states = decisions[i].states;
      for (std::size_t c = 0; c < states.size() && c < logits.cols; ++c) {
        const double z = logits(i, c);
        if (states[c] == PseudoState::positive) {
          ++r.count;
          r.loss += softplus(-z);
          r.dlogits(i, c) = sigmoid(z) - 1.0;
        } else if (states[c] == PseudoState::negative) {
          ++r.count;
          r.loss += softplus(z);
          r.dlogits(i, c) = sigmoid(z);
        }
      }
    }
    denom = static_cast<double>(logits.rows);
  }
  if (r.count > 0 && denom > 0.0) {
    const double inv = 1.0 / denom;
    r.loss *= inv;
    for (double& g : r.dlogits.data)
      g *= inv;
  }
  return r;
}

LossResult loss_soft(const Matrix& logits, std::span<const SoftTarget> targets, Task task) {
  if (targets.size() != logits.rows)
    throw ShapeError("loss_soft: one target per logits row required");
  LossResult r{0.0, Matrix(logits.rows, logits.cols), 0};
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const auto& t = targets[i];
    if (task == Task::single_label) {
      ++r.count;
      const auto lsm = log_softmax(logits.row(i));
      double mass = 0.0;
      for (std::size_t c = 0; c < logits.cols; ++c) {
        r.loss -= t.y[c] * lsm[c];
        mass += t.y[c];
      }
      for (std::size_t c = 0; c < logits.cols; ++c)
        r.dlogits(i, c) = std::exp(lsm[c]) * mass - t.y[c];
    } else {
      for (std::size_t c = 0; c < logits.cols; ++c) {
        if (!t.usable[c])
          continue;
        ++r.count;
        const double z = logits(i, c);
        r.loss += t.y[c] * softplus(-z) + (1.0 - t.y[c]) * softplus(z);
        r.dlogits(i, c) = sigmoid(z) - t.y[c];
      }
    }
  }
  if (r.count > 0) {
    const double inv = 1.0 / static_cast<double>(r.count);
    r.loss *= inv;
    for (double& g : r.dlogits.data)
      g *= inv;
  }
  return r;
}

std::pair<std::vector<double>, std::vector<double>> mixup(std::span<const double> x_l,
                                                          std::span<const double> y_l,
                                                          std::span<const double> x_h,
                                                          std::span<const double> y_h, double lam) {
  if (x_l.size() != x_h.size() || y_l.size() != y_h.size())
    throw ShapeError("mixup: operand sizes differ");
  std::vector<double> x(x_l.size());
  std::vector<double> y(y_l.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = lam * x_l[i] + (1.0 - lam) * x_h[i];
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] = lam * y_l[i] + (1.0 - lam) * y_h[i];
  return {std::move(x), std::move(y)};
}

std::vector<double> positive_class_weights(const Dataset& dataset, std::size_t num_classes) {
  std::vector<double> pos(num_classes, 0.0);
  std::vector<double> neg(num_classes, 0.0);
  for (const auto& s : dataset)
    for (std::size_t c = 0; c < num_classes; ++c)
      if (s.label.known_mask[c])
        (s.label.values[c] > 0.5 ? pos : neg)[c] += 1.0;
  std::vector<double> w(num_classes, 1.0);
  for (std::size_t c = 0; c < num_classes; ++c)
    if (pos[c] > 0.0)
      w[c] = std::clamp(neg[c] / pos[c], 1.0, 100.0);
  return w;
}

} // namespace fedlsm
