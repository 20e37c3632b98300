#include "fedlsm/data.hpp"
#include "fedlsm/errors.hpp"
#include "fedlsm/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

using namespace fedlsm;

namespace {

Sample sample_with_truth(std::vector<double> truth) {
  Sample s;
  s.x = {0.5, -1.0};
  s.true_label = truth;
  s.label = full_label(truth);
  return s;
}

FederationConfig small_config(Task task) {
  FederationConfig cfg;
  cfg.task = task;
  cfg.samples_per_client = 50;
  cfg.validation_samples = 20;
  cfg.test_samples = 40;
  return cfg;
}

} // namespace

TEST_CASE("identified sets cover every class") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto sets = draw_identified_sets(5, 7, 3, seed, 1000);
    std::set<int> all;
    for (const auto& s : sets) {
      CHECK(s.size() == 3);
      CHECK(std::is_sorted(s.begin(), s.end()));
      all.insert(s.begin(), s.end());
    }
    CHECK(all.size() == 7);
  }
  // With K=2, M=4, s=2 most independent draws miss a class; resampling must
  // still end with two disjoint halves.
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto sets = draw_identified_sets(2, 4, 2, seed, 10000);
    std::set<int> all(sets[0].begin(), sets[0].end());
    all.insert(sets[1].begin(), sets[1].end());
    CHECK(all.size() == 4);
  }
  CHECK_THROWS_WITH_AS(draw_identified_sets(2, 7, 3, 1, 1000), doctest::Contains("class coverage unsatisfiable"),
                       ConfigError);
}

TEST_CASE("gen_federation") {
  const auto cfg = small_config(Task::single_label);
  const auto a = gen_federation(cfg);
  const auto b = gen_federation(cfg);
  CHECK(a.clients == b.clients);
  CHECK(a.test == b.test);

  REQUIRE(a.clients.size() == 5);
  std::set<int> covered;
  for (std::size_t k = 0; k < a.clients.size(); ++k) {
    const auto& spec = a.specs[k];
    covered.insert(spec.identified.begin(), spec.identified.end());
    CHECK(spec.identified.size() + spec.unknown.size() == 7);
    for (const auto& s : a.clients[k]) {
      const int cls = s.label.known_class();
      if (cls >= 0) {
        CHECK(spec.is_identified(cls));
        CHECK(s.true_label[static_cast<std::size_t>(cls)] == 1.0);
      } else {
        CHECK_FALSE(s.label.any_known());
      }
    }
  }
  CHECK(covered.size() == 7);
  for (const auto& s : a.test)
    CHECK(s.label == full_label(s.true_label));

  auto other = cfg;
  other.seed = 2;
  CHECK_FALSE(gen_federation(other).test == a.test);
}

TEST_CASE("single-label class centers sit class_separation * cluster_std apart") {
  auto cfg = small_config(Task::single_label);
  cfg.test_samples = 28000;
  cfg.cluster_std = 0.5;
  const auto fed = gen_federation(cfg);
  std::vector<std::vector<double>> mean(7, std::vector<double>(16, 0.0));
  std::vector<double> count(7, 0.0);
  for (const auto& s : fed.test) {
    const auto c = static_cast<std::size_t>(std::max_element(s.true_label.begin(), s.true_label.end()) -
                                            s.true_label.begin());
    count[c] += 1.0;
    for (std::size_t j = 0; j < 16; ++j)
      mean[c][j] += s.x[j];
  }
  for (std::size_t c = 0; c < 7; ++c)
    for (double& v : mean[c])
      v /= count[c];
  for (std::size_t a = 0; a < 7; ++a)
    for (std::size_t b = a + 1; b < 7; ++b) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < 16; ++j)
        d2 += (mean[a][j] - mean[b][j]) * (mean[a][j] - mean[b][j]);
      // Sampling error of each mean is about 0.5 * 4 / sqrt(4000).
      CHECK(std::sqrt(d2) == doctest::Approx(2.0).epsilon(0.05));
    }
}

TEST_CASE("multi-label positive rates land in the configured range") {
  auto cfg = small_config(Task::multi_label);
  cfg.test_samples = 20000;
  const auto fed = gen_federation(cfg);
  for (std::size_t c = 0; c < 7; ++c) {
    double pos = 0.0;
    for (const auto& s : fed.test)
      pos += s.true_label[c];
    const double rate = pos / static_cast<double>(fed.test.size());
    CHECK(rate > 0.2 - 0.015);
    CHECK(rate < 0.4 + 0.015);
  }
}

TEST_CASE("mask_labels") {
  SUBCASE("multi-label keeps exactly the identified entries") {
    const auto spec = ClientSpec::make(0, {0, 2}, 4, 1);
    const auto out = mask_labels({sample_with_truth({1, 1, 0, 1})}, spec, Task::multi_label);
    CHECK(out[0].label.values == std::vector<double>{1, 0, 0, 0});
    CHECK(out[0].label.known_mask == std::vector<bool>{true, false, true, false});
  }
  SUBCASE("single-label: identified class labeled, others unlabeled") {
    const auto spec = ClientSpec::make(0, {1}, 4, 2);
    const auto out =
        mask_labels({sample_with_truth({0, 1, 0, 0}), sample_with_truth({0, 0, 0, 1})}, spec, Task::single_label);
    CHECK(out[0].label.known_class() == 1);
    CHECK_FALSE(out[1].label.any_known());
    CHECK(out[1].label.values == std::vector<double>(4, 0.0));
  }
  SUBCASE("all classes identified leaves labels unchanged") {
    const auto spec = ClientSpec::make(0, {0, 1, 2}, 3, 2);
    const Dataset ds{sample_with_truth({1, 0, 1}), sample_with_truth({0, 1, 0})};
    CHECK(mask_labels(ds, spec, Task::multi_label) == ds);
    const Dataset single{sample_with_truth({0, 0, 1})};
    CHECK(mask_labels(single, spec, Task::single_label) == single);
  }
  SUBCASE("idempotent") {
    const auto spec = ClientSpec::make(0, {1, 3}, 5, 1);
    const Dataset ds{sample_with_truth({1, 1, 0, 0, 1}), sample_with_truth({0, 0, 0, 1, 0})};
    for (Task t : {Task::multi_label, Task::single_label}) {
      const auto once = mask_labels(ds, spec, t);
      CHECK(mask_labels(once, spec, t) == once);
    }
  }
}

TEST_CASE("augmentations") {
  const std::vector<double> x{1.0, -2.0, 0.5, 3.0};
  AugmentConfig cfg;

  AugmentConfig none{0.0, 0.0, 0.0, 0.0};
  CHECK(augment_weak(x, 3, none) == x);
  CHECK(augment_strong(x, 3, none) == x);

  CHECK(augment_weak(x, 5, cfg) == augment_weak(x, 5, cfg));
  CHECK(augment_strong(x, 5, cfg) == augment_strong(x, 5, cfg));
  CHECK_FALSE(augment_strong(x, 5, cfg) == augment_strong(x, 6, cfg));

  // Monte Carlo: weak noise has the configured spread; strong views zero out
  // coordinates at the drop rate.
  const std::vector<double> zero(1, 0.0);
  const int n = 20000;
  double sq = 0.0;
  int dropped = 0;
  for (int i = 0; i < n; ++i) {
    const double w = augment_weak(zero, static_cast<std::uint64_t>(i), cfg)[0];
    sq += w * w;
    if (augment_strong(std::vector<double>{1.0}, static_cast<std::uint64_t>(i), cfg)[0] == 0.0)
      ++dropped;
  }
  CHECK(std::sqrt(sq / n) == doctest::Approx(cfg.sigma_weak).epsilon(0.03));
  CHECK(static_cast<double>(dropped) / n == doctest::Approx(cfg.drop_prob).epsilon(0.1));
}

TEST_CASE("CSV") {
  const auto fed = gen_federation(small_config(Task::multi_label));
  const Dataset& ds = fed.clients[0];

  CHECK(parse_csv(to_csv(ds)) == ds);
  CHECK(parse_csv("").empty());

  const auto path = std::filesystem::temp_directory_path() / "fedlsm_test.csv";
  save_csv(ds, path);
  CHECK(load_csv(path) == ds);
  {
    std::ofstream(path, std::ios::trunc);
  }
  CHECK(load_csv(path).empty());
  std::filesystem::remove(path);

  // Drop the first feature cell of the second data row (line 3).
  std::string text = to_csv(ds);
  std::size_t pos = 0;
  for (int i = 0; i < 2; ++i)
    pos = text.find('\n', pos) + 1;
  text.erase(pos, text.find(',', pos) - pos + 1);
  try {
    parse_csv(text);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}
