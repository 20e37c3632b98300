#include "fedlsm/client.hpp"
#include "fedlsm/errors.hpp"
#include "fedlsm/losses.hpp"
#include "fedlsm/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace fedlsm;

namespace {

LabelRecord single_labeled(std::size_t m, std::vector<int> identified, int cls) {
  LabelRecord r{std::vector<double>(m, 0.0), std::vector<bool>(m, false)};
  for (int c : identified)
    r.known_mask[static_cast<std::size_t>(c)] = true;
  if (cls >= 0)
    r.values[static_cast<std::size_t>(cls)] = 1.0;
  return r;
}

LabelRecord unlabeled(std::size_t m) { return {std::vector<double>(m, 0.0), std::vector<bool>(m, false)}; }

Sample make_sample(std::vector<double> x, std::size_t m, int true_cls, LabelRecord label) {
  Sample s;
  s.x = std::move(x);
  s.true_label.assign(m, 0.0);
  s.true_label[static_cast<std::size_t>(true_cls)] = 1.0;
  s.label = std::move(label);
  return s;
}

// Small single-label client: identified {0, 1} of 4 classes, half labeled.
struct Fixture {
  ClientSpec spec = ClientSpec::make(0, {0, 1}, 4, 40);
  Dataset data;
  ModelParams global = init_params(std::vector<std::size_t>{3, 6}, 4, 5);
  ClientConfig cfg;

  Fixture() {
    Rng rng(3);
    for (int i = 0; i < 40; ++i) {
      const int cls = i % 4;
      std::vector<double> x{cls + rng.normal(0, 0.3), -cls + rng.normal(0, 0.3), rng.normal()};
      auto label = cls < 2 ? single_labeled(4, {0, 1}, cls) : unlabeled(4);
      data.push_back(make_sample(std::move(x), 4, cls, std::move(label)));
    }
    cfg.local_iters = 5;
    cfg.batch_size = 16;
    cfg.lr = 1e-2;
    cfg.tau = 0.3;
    cfg.tau_l = 0.25;
  }
};

} // namespace

TEST_CASE("decide_single") {
  const int unknown0[] = {0};
  const double p[] = {0.96, 0.03, 0.01};
  const auto kept = decide_single(p, unknown0, 0.95);
  CHECK(kept.kept);
  CHECK(kept.label == 0);

  const double low[] = {0.90, 0.05, 0.05};
  CHECK_FALSE(decide_single(low, unknown0, 0.95).kept);

  const int unknown12[] = {1, 2};
  CHECK_FALSE(decide_single(p, unknown12, 0.95).kept);

  // Anything kept at tau is kept at a relaxed threshold.
  Rng rng(1);
  const int unknown[] = {1, 3};
  for (int t = 0; t < 200; ++t) {
    std::vector<double> z(4);
    for (double& v : z)
      v = rng.normal(0.0, 4.0);
    const auto q = softmax(z);
    if (decide_single(q, unknown, 0.95).kept)
      CHECK(decide_single(q, unknown, 0.85).kept);
  }
}

TEST_CASE("decide_multi") {
  const int unknown[] = {0, 1, 2};
  const double p[] = {0.9, 0.001, 0.5, 0.99};
  const auto d = decide_multi(p, unknown, 0.85, 5e-3);
  CHECK(d.states[0] == PseudoState::positive);
  CHECK(d.states[1] == PseudoState::negative);
  CHECK(d.states[2] == PseudoState::abstain);
  CHECK(d.states[3] == PseudoState::abstain); // identified class
  CHECK(d.positives() == 1);
  CHECK(d.negatives() == 1);

  const auto params = init_params(std::vector<std::size_t>{2, 3}, 4, 1);
  const double x[] = {0.1, 0.2};
  CHECK_THROWS_AS(pseudo_multi(params, x, unknown, 0.1, 0.2), ConfigError);
}

TEST_CASE("loss_identified") {
  SUBCASE("uniform prediction costs ln M per labeled sample") {
    const Matrix logits(2, 4, 0.0);
    const std::vector<LabelRecord> labels{single_labeled(4, {0, 1}, 1), single_labeled(4, {0, 1}, 0)};
    const auto r = loss_identified(logits, labels, Task::single_label);
    CHECK(r.loss == doctest::Approx(std::log(4.0)));
    CHECK(r.count == 2);
  }
  SUBCASE("confident correct prediction costs nothing") {
    Matrix logits(1, 3, -50.0);
    logits(0, 2) = 50.0;
    const std::vector<LabelRecord> labels{single_labeled(3, {2}, 2)};
    CHECK(loss_identified(logits, labels, Task::single_label).loss == doctest::Approx(0.0));
  }
  SUBCASE("unlabeled single-label rows contribute nothing") {
    Matrix logits(2, 3);
    logits(1, 0) = 4.0;
    const std::vector<LabelRecord> labels{single_labeled(3, {0}, 0), unlabeled(3)};
    const auto r = loss_identified(logits, labels, Task::single_label);
    CHECK(r.count == 1);
    for (std::size_t c = 0; c < 3; ++c)
      CHECK(r.dlogits(1, c) == 0.0);
  }
  SUBCASE("multi-label with nothing known has zero gradient") {
    Rng rng(2);
    Matrix logits(3, 4);
    for (double& v : logits.data)
      v = rng.normal();
    const std::vector<LabelRecord> labels(3, unlabeled(4));
    const auto r = loss_identified(logits, labels, Task::multi_label);
    CHECK(r.loss == 0.0);
    CHECK(r.count == 0);
    for (double g : r.dlogits.data)
      CHECK(g == 0.0);
  }
  SUBCASE("weighted binary cross-entropy") {
    // One positive and one negative known entry at logit 0: (w ln2 + ln2) / 2.
    const Matrix logits(1, 3, 0.0);
    LabelRecord r{{1.0, 0.0, 0.0}, {true, true, false}};
    const std::vector<LabelRecord> labels{r};
    const double w[] = {3.0, 1.0, 1.0};
    const auto res = loss_identified(logits, labels, Task::multi_label, w);
    CHECK(res.loss == doctest::Approx(2.0 * std::log(2.0)));
    CHECK(res.dlogits(0, 0) == doctest::Approx(-1.5 / 2.0));
    CHECK(res.dlogits(0, 1) == doctest::Approx(0.25));
    CHECK(res.dlogits(0, 2) == 0.0);
  }
}

TEST_CASE("loss_unknown") {
  SUBCASE("all abstain") {
    const Matrix logits(3, 4, 1.0);
    const std::vector<PseudoLabelDecision> d(3);
    const auto r = loss_unknown(logits, d, Task::single_label);
    CHECK(r.loss == 0.0);
    for (double g : r.dlogits.data)
      CHECK(g == 0.0);
  }
  SUBCASE("one kept sample on a uniform student") {
    const Matrix logits(2, 4, 0.0);
    std::vector<PseudoLabelDecision> d(2);
    d[0].kept = true;
    d[0].label = 2;
    CHECK(loss_unknown(logits, d, Task::single_label).loss == doctest::Approx(std::log(4.0)));
    CHECK(loss_unknown(logits, d, Task::single_label, UnknownNorm::unlabeled, 2).loss ==
          doctest::Approx(std::log(4.0) / 2.0));
  }
  SUBCASE("student already certain of the pseudo label") {
    Matrix logits(1, 3, -60.0);
    logits(0, 1) = 60.0;
    std::vector<PseudoLabelDecision> d(1);
    d[0].kept = true;
    d[0].label = 1;
    CHECK(loss_unknown(logits, d, Task::single_label).loss == doctest::Approx(0.0));
  }
  SUBCASE("multi-label divides positive and negative terms by the batch size") {
    const Matrix logits(2, 3, 0.0);
    std::vector<PseudoLabelDecision> d(2);
    d[0].states = {PseudoState::positive, PseudoState::negative, PseudoState::abstain};
    d[1].states = {PseudoState::abstain, PseudoState::abstain, PseudoState::abstain};
    CHECK(loss_unknown(logits, d, Task::multi_label).loss == doctest::Approx(2.0 * std::log(2.0) / 2.0));
  }
}

TEST_CASE("mixup and soft targets") {
  const double xl[] = {1, 2};
  const double yl[] = {1, 0, 0};
  const double xh[] = {3, 5};
  const double yh[] = {0, 1, 0};
  auto [x1, y1] = mixup(xl, yl, xh, yh, 1.0);
  CHECK(x1 == std::vector<double>{1, 2});
  CHECK(y1 == std::vector<double>{1, 0, 0});
  auto [x5, y5] = mixup(xl, yl, xh, yh, 0.5);
  CHECK(x5 == std::vector<double>{2, 3.5});
  CHECK(y5 == std::vector<double>{0.5, 0.5, 0});

  const Matrix logits(1, 4, 0.0);
  const std::vector<SoftTarget> t{{{0.5, 0.5, 0, 0}, {true, true, true, true}}};
  CHECK(loss_soft(logits, t, Task::single_label).loss == doctest::Approx(std::log(4.0)));
  const std::vector<SoftTarget> tm{{{0.3, 1.0, 0, 0}, {true, false, false, false}}};
  const auto rm = loss_soft(logits, tm, Task::multi_label);
  CHECK(rm.loss == doctest::Approx(std::log(2.0)));
  CHECK(rm.dlogits(0, 0) == doctest::Approx(0.5 - 0.3));
  CHECK(rm.dlogits(0, 1) == 0.0);
}

TEST_CASE("positive_class_weights") {
  Dataset ds;
  for (int i = 0; i < 10; ++i) {
    Sample s;
    s.x = {0.0};
    s.true_label = {i < 2 ? 1.0 : 0.0, 0.0, 1.0};
    s.label = LabelRecord{s.true_label, {true, true, true}};
    ds.push_back(s);
  }
  const auto w = positive_class_weights(ds, 3);
  CHECK(w[0] == doctest::Approx(4.0)); // 8 negatives / 2 positives
  CHECK(w[1] == 1.0);                  // no positives
  CHECK(w[2] == 1.0);                  // 0 / 10 clipped up to 1
}

TEST_CASE("ude_batch") {
  Fixture f;
  f.cfg.tau_l = 0.01;
  UncertaintyPartition part;
  part.low = {0, 1, 2, 3};
  CHECK(ude_batch(part, f.global, f.data, f.spec, f.cfg, 1).empty());

  part.high = {4, 5, 6, 7};
  const auto mixed = ude_batch(part, f.global, f.data, f.spec, f.cfg, 1);
  CHECK(mixed.size() == static_cast<std::size_t>(f.cfg.ude_batch));
  for (const auto& s : mixed) {
    double total = 0.0;
    for (double y : s.target.y)
      total += y;
    CHECK(total == doctest::Approx(1.0));
  }
  const auto again = ude_batch(part, f.global, f.data, f.spec, f.cfg, 1);
  CHECK(again.size() == mixed.size());
  CHECK(again[0].x == mixed[0].x);
}

TEST_CASE("local_train") {
  Fixture f;

  SUBCASE("zero local iterations return the global model") {
    f.cfg.local_iters = 0;
    const auto upd = local_train(f.global, f.data, f.spec, f.cfg, 0, 1);
    CHECK(upd.params == f.global);
    CHECK(upd.edd[2] == 0.0);
    CHECK(upd.edd[3] == 0.0);
    CHECK(upd.edd[0] == 10.0);
    CHECK(upd.edd[1] == 10.0);
  }
  SUBCASE("deterministic for a seed") {
    const auto a = local_train(f.global, f.data, f.spec, f.cfg, 2, 9);
    const auto b = local_train(f.global, f.data, f.spec, f.cfg, 2, 9);
    CHECK(a.params == b.params);
    CHECK(a.edd == b.edd);
    const auto c = local_train(f.global, f.data, f.spec, f.cfg, 2, 10);
    CHECK_FALSE(a.params == c.params);
  }
  SUBCASE("without UDE and pseudo labels it is supervised training") {
    f.cfg.frac_h = 0.0;
    f.cfg.ude_batch = 0;
    f.cfg.lambda_ude = 0.0;
    f.cfg.tau = 0.9999999;
    f.cfg.tau_l = 0.999999;
    const auto semi = local_train(f.global, f.data, f.spec, f.cfg, 1, 4);
    CHECK(semi.stats.pseudo_kept == 0);
    auto sup_cfg = f.cfg;
    sup_cfg.pseudo_labeling = false;
    const auto sup = local_train(f.global, f.data, f.spec, sup_cfg, 1, 4);
    CHECK(semi.params == sup.params);
  }
  SUBCASE("EDD counts labels plus confident pseudo labels") {
    // Identified {0, 1}: three labeled 0s, two labeled 1s, two unlabeled 2s.
    // The model ignores its input and predicts class 2 with near certainty.
    const auto spec = ClientSpec::make(0, {0, 1}, 4, 7);
    Dataset ds;
    for (int cls : {0, 0, 0, 1, 1})
      ds.push_back(make_sample({0.1 * cls, 0.2, 0.3}, 4, cls, single_labeled(4, {0, 1}, cls)));
    for (int i = 0; i < 2; ++i)
      ds.push_back(make_sample({0.5, 0.5 * i, 0.0}, 4, 2, unlabeled(4)));
    auto params = init_params(std::vector<std::size_t>{3, 2}, 4, 1).zeros_like();
    params.layers[0].bias = {3.0, 3.0};
    params.proxies(2, 0) = 10.0;
    params.proxies(2, 1) = 10.0;
    ClientConfig cfg;
    cfg.local_iters = 1;
    cfg.lr = 1e-12;
    cfg.frac_h = 0.0;
    const auto upd = local_train(params, ds, spec, cfg, 0, 1);
    CHECK(upd.edd == std::vector<double>{3, 2, 2, 0});
  }
  SUBCASE("empty dataset and bad config") {
    CHECK_THROWS_AS(local_train(f.global, Dataset{}, f.spec, f.cfg, 0, 1), ConfigError);
    f.cfg.ude_batch = f.cfg.batch_size;
    CHECK_THROWS_AS(local_train(f.global, f.data, f.spec, f.cfg, 0, 1), ConfigError);
  }
}
