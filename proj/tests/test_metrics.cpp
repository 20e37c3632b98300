#include "fedlsm/metrics.hpp"

#include <doctest.h>

#include <cmath>

using namespace fedlsm;

namespace {

// Rows put 0.8 on the predicted class and spread the rest evenly.
Matrix confident(const std::vector<int>& pred, std::size_t m) {
  Matrix p(pred.size(), m, 0.2 / static_cast<double>(m - 1));
  for (std::size_t i = 0; i < pred.size(); ++i)
    p(i, static_cast<std::size_t>(pred[i])) = 0.8;
  return p;
}

std::vector<std::vector<double>> onehots(const std::vector<int>& cls, std::size_t m) {
  std::vector<std::vector<double>> out;
  for (int c : cls) {
    out.emplace_back(m, 0.0);
    out.back()[static_cast<std::size_t>(c)] = 1.0;
  }
  return out;
}

} // namespace

TEST_CASE("roc_auc") {
  const double sep[] = {0.1, 0.2, 0.8, 0.9};
  const int lab[] = {0, 0, 1, 1};
  CHECK(roc_auc(sep, lab) == 1.0);

  const double flat[] = {0.5, 0.5, 0.5, 0.5};
  CHECK(roc_auc(flat, lab) == 0.5);

  // Pairs (pos, neg): (0.35,0.1) (0.35,0.4) (0.8,0.1) (0.8,0.4) -> 3 of 4.
  const double s[] = {0.1, 0.4, 0.35, 0.8};
  CHECK(roc_auc(s, lab) == 0.75);

  const int one_class[] = {1, 1, 1, 1};
  CHECK_FALSE(roc_auc(s, one_class).has_value());
}

TEST_CASE("macro metrics, single-label") {
  SUBCASE("perfect predictions") {
    const std::vector<int> y{0, 1, 2, 1, 0};
    const auto r = macro_metrics(confident(y, 3), onehots(y, 3), Task::single_label);
    CHECK(r.accuracy == 1.0);
    CHECK(r.macro_f1 == 1.0);
    CHECK(r.macro_auc == 1.0);
    CHECK(r.evaluated_classes == 3);
  }
  SUBCASE("hand-computed confusion matrix") {
    // Rows true, columns predicted:
    //   [2 1 0]
    //   [0 1 1]
    //   [1 0 3]
    // Per-class (precision, recall): (2/3, 2/3), (1/2, 1/2), (3/4, 3/4).
    const std::vector<int> truth{0, 0, 0, 1, 1, 2, 2, 2, 2};
    const std::vector<int> pred{0, 0, 1, 1, 2, 2, 2, 0, 2};
    const auto r = macro_metrics(confident(pred, 3), onehots(truth, 3), Task::single_label);
    CHECK(r.accuracy == doctest::Approx(6.0 / 9.0));
    CHECK(r.macro_precision == doctest::Approx((2.0 / 3.0 + 0.5 + 0.75) / 3.0));
    CHECK(r.macro_recall == doctest::Approx((2.0 / 3.0 + 0.5 + 0.75) / 3.0));
    CHECK(r.macro_f1 == doctest::Approx((2.0 / 3.0 + 0.5 + 0.75) / 3.0));
  }
  SUBCASE("a class never predicted has precision 0") {
    const std::vector<int> truth{0, 1, 2, 2};
    const std::vector<int> pred{0, 0, 2, 2};
    const auto r = macro_metrics(confident(pred, 3), onehots(truth, 3), Task::single_label);
    // precision (1/2, 0, 1), recall (1, 0, 1)
    CHECK(r.macro_precision == doctest::Approx(0.5));
    CHECK(r.macro_recall == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("classes without both outcomes are skipped") {
    const std::vector<int> truth{0, 0, 1, 1};
    const auto r = macro_metrics(confident(truth, 3), onehots(truth, 3), Task::single_label);
    CHECK(r.evaluated_classes == 2);
    CHECK(std::isnan(r.per_class_auc[2]));
    CHECK(r.macro_f1 == 1.0);
  }
}

TEST_CASE("macro metrics, multi-label") {
  Matrix p(4, 2);
  const double probs[] = {0.9, 0.2, 0.3, 0.7, 0.6, 0.4, 0.1, 0.8};
  std::copy(std::begin(probs), std::end(probs), p.data.begin());
  const std::vector<std::vector<double>> truth{{1, 0}, {0, 1}, {0, 0}, {0, 1}};
  const auto r = macro_metrics(p, truth, Task::multi_label);
  // Thresholded at 0.5, one error out of eight decisions (row 2, class 0).
  CHECK(r.accuracy == doctest::Approx(7.0 / 8.0));
  CHECK(r.per_class_auc[0] == 1.0);
  CHECK(r.per_class_auc[1] == 1.0);
  // Class 0: precision 1/2, recall 1; class 1: both 1.
  CHECK(r.macro_f1 == doctest::Approx((2.0 / 3.0 + 1.0) / 2.0));
}
