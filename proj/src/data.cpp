#include "fedlsm/data.hpp"

#include "fedlsm/errors.hpp"
#include "fedlsm/kernels.hpp"
#include "fedlsm/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace fedlsm {

std::string to_string(Task t) { return t == Task::single_label ? "single_label" : "multi_label"; }

Task parse_task(const std::string& s) {
  if (s == "single_label" || s == "single")
    return Task::single_label;
  if (s == "multi_label" || s == "multi")
    return Task::multi_label;
  throw ConfigError("unknown task '" + s + "'");
}

bool LabelRecord::has_positive_known() const { return known_class() >= 0; }

int LabelRecord::known_class() const {
  for (std::size_t c = 0; c < values.size(); ++c)
    if (known_mask[c] && values[c] > 0.5)
      return static_cast<int>(c);
  return -1;
}

bool LabelRecord::any_known() const {
  return std::find(known_mask.begin(), known_mask.end(), true) != known_mask.end();
}

bool ClientSpec::is_identified(int c) const {
  return std::binary_search(identified.begin(), identified.end(), c);
}

ClientSpec ClientSpec::make(int id, std::vector<int> identified, std::size_t num_classes,
                            std::size_t n) {
  std::sort(identified.begin(), identified.end());
  identified.erase(std::unique(identified.begin(), identified.end()), identified.end());
  if (identified.empty())
    throw ConfigError("client " + std::to_string(id) + " has no identified classes");
  ClientSpec spec{id, std::move(identified), {}, n};
  for (int c = 0; c < static_cast<int>(num_classes); ++c)
    if (!spec.is_identified(c))
      spec.unknown.push_back(c);
  return spec;
}

void FederationConfig::validate() const {
  if (num_clients < 1)
    throw ConfigError("federation.num_clients must be at least 1");
  if (num_classes < 2)
    throw ConfigError("federation.num_classes must be at least 2");
  if (identified_per_client < 1 || identified_per_client > num_classes)
    throw ConfigError("federation.identified_per_client must lie in [1, num_classes]");
  if (identified_per_client * num_clients < num_classes)
    throw ConfigError("class coverage unsatisfiable: identified_per_client * num_clients < num_classes");
  if (feature_dim < 1)
    throw ConfigError("federation.feature_dim must be positive");
  if (samples_per_client == 0)
    throw ConfigError("federation.samples_per_client must be positive");
  if (!(cluster_std > 0.0))
    throw ConfigError("federation.cluster_std must be positive");
  if (!class_priors.empty()) {
    if (class_priors.size() != static_cast<std::size_t>(num_classes))
      throw ConfigError("federation.class_priors must have num_classes entries");
    if (std::any_of(class_priors.begin(), class_priors.end(), [](double p) { return !(p >= 0.0); }) ||
        std::accumulate(class_priors.begin(), class_priors.end(), 0.0) <= 0.0)
      throw ConfigError("federation.class_priors must be nonnegative with positive sum");
  }
  if (!(positive_rate_min > 0.0 && positive_rate_min <= positive_rate_max && positive_rate_max < 1.0))
    throw ConfigError("federation.positive_rate range must satisfy 0 < min <= max < 1");
  if (label_noise < 0.0)
    throw ConfigError("federation.label_noise must be nonnegative");
}

std::vector<std::vector<int>> draw_identified_sets(int num_clients, int num_classes, int per_client,
                                                   std::uint64_t seed, int max_attempts) {
  if (per_client < 1 || per_client > num_classes)
    throw ConfigError("identified_per_client must lie in [1, num_classes]");
  if (static_cast<long>(per_client) * num_clients < num_classes)
    throw ConfigError("class coverage unsatisfiable: s*K < M");
  Rng rng(derive_seed(seed, {0x1d5e7}));
  for (int attempt = 0; attempt < std::max(1, max_attempts); ++attempt) {
    std::vector<std::vector<int>> sets;
    std::vector<bool> covered(static_cast<std::size_t>(num_classes), false);
    for (int k = 0; k < num_clients; ++k) {
      sets.push_back(rng.choose(num_classes, per_client));
      for (int c : sets.back())
        covered[static_cast<std::size_t>(c)] = true;
    }
    if (std::all_of(covered.begin(), covered.end(), [](bool b) { return b; }))
      return sets;
  }
  throw ConfigError("class coverage unsatisfiable after " + std::to_string(max_attempts) +
                    " resampling attempts");
}

LabelRecord full_label(std::span<const double> true_label) {
  return LabelRecord{std::vector<double>(true_label.begin(), true_label.end()),
                     std::vector<bool>(true_label.size(), true)};
}

Dataset mask_labels(const Dataset& dataset, const ClientSpec& spec, Task task) {
  Dataset out = dataset;
  for (Sample& s : out) {
    const std::size_t m = s.true_label.size();
    LabelRecord rec{std::vector<double>(m, 0.0), std::vector<bool>(m, false)};
    if (task == Task::multi_label) {
      for (int c : spec.identified) {
        rec.known_mask[static_cast<std::size_t>(c)] = true;
        rec.values[static_cast<std::size_t>(c)] = s.true_label[static_cast<std::size_t>(c)];
      }
    } else {
      const auto it = std::max_element(s.true_label.begin(), s.true_label.end());
      const int cls = static_cast<int>(it - s.true_label.begin());
      if (spec.is_identified(cls)) {
        for (int c : spec.identified)
          rec.known_mask[static_cast<std::size_t>(c)] = true;
        rec.values[static_cast<std::size_t>(cls)] = 1.0;
      }
    }
    s.label = std::move(rec);
  }
  return out;
}

namespace {

// Orthonormal directions when count <= dim, random unit vectors otherwise.
std::vector<std::vector<double>> random_directions(std::size_t count, std::size_t dim, Rng& rng) {
  std::vector<std::vector<double>> dirs;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> v(dim);
    for (int tries = 0; tries < 16; ++tries) {
      for (double& x : v)
        x = rng.normal();
      if (i < dim)
        for (const auto& u : dirs)
          kernels::axpy(v, -kernels::dot(v, u), u);
      const double norm = std::sqrt(kernels::dot(v, v));
      if (norm > 1e-6) {
        kernels::scale(v, 1.0 / norm);
        break;
      }
    }
    dirs.push_back(std::move(v));
  }
  return dirs;
}

double normal_upper_quantile(double p) {
  // Solves P(Z > t) = p by bisection.
  double lo = -10.0;
  double hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(mid / std::sqrt(2.0)) > p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct Generator {
  const FederationConfig& cfg;
  std::vector<std::vector<double>> centers;    // single-label
  std::vector<std::vector<double>> directions; // multi-label
  std::vector<double> thresholds;              // multi-label
  std::vector<double> prior_cdf;

  explicit Generator(const FederationConfig& c) : cfg(c) {
    const auto m = static_cast<std::size_t>(cfg.num_classes);
    const auto d = static_cast<std::size_t>(cfg.feature_dim);
    Rng rng(derive_seed(cfg.seed, {0x9e0}));
    if (cfg.task == Task::single_label) {
      auto dirs = random_directions(m, d, rng);
      // Orthonormal vectors are sqrt(2) apart; centering keeps that distance.
      std::vector<double> mean(d, 0.0);
      for (const auto& u : dirs)
        kernels::axpy(mean, 1.0 / static_cast<double>(m), u);
      const double radius = cfg.class_separation * cfg.cluster_std / std::sqrt(2.0);
      for (auto& u : dirs) {
        if (m <= d)
          kernels::axpy(u, -1.0, mean);
        kernels::scale(u, radius);
      }
      centers = std::move(dirs);
      std::vector<double> prior = cfg.class_priors.empty() ? std::vector<double>(m, 1.0) : cfg.class_priors;
      const double total = std::accumulate(prior.begin(), prior.end(), 0.0);
      double acc = 0.0;
      for (double p : prior) {
        acc += p / total;
        prior_cdf.push_back(acc);
      }
      prior_cdf.back() = 1.0;
    } else {
      directions = random_directions(m, d, rng);
      const double spread = std::sqrt(1.0 + cfg.label_noise * cfg.label_noise);
      for (std::size_t c = 0; c < m; ++c) {
        const double rate = rng.uniform(cfg.positive_rate_min, cfg.positive_rate_max);
        thresholds.push_back(spread * normal_upper_quantile(rate));
      }
    }
  }

  Sample draw(Rng& rng) const {
    const auto m = static_cast<std::size_t>(cfg.num_classes);
    const auto d = static_cast<std::size_t>(cfg.feature_dim);
    Sample s;
    s.x.assign(d, 0.0);
    s.true_label.assign(m, 0.0);
    if (cfg.task == Task::single_label) {
      const double u = rng.uniform();
      const auto cls = static_cast<std::size_t>(
          std::min<std::ptrdiff_t>(std::upper_bound(prior_cdf.begin(), prior_cdf.end(), u) - prior_cdf.begin(),
                                   static_cast<std::ptrdiff_t>(m - 1)));
      for (std::size_t j = 0; j < d; ++j)
        s.x[j] = centers[cls][j] + rng.normal(0.0, cfg.cluster_std);
      s.true_label[cls] = 1.0;
    } else {
      for (double& v : s.x)
        v = rng.normal();
      for (std::size_t c = 0; c < m; ++c) {
        const double score = kernels::dot(s.x, directions[c]) + cfg.label_noise * rng.normal();
        s.true_label[c] = score > thresholds[c] ? 1.0 : 0.0;
      }
    }
    s.label = full_label(s.true_label);
    return s;
  }

  Dataset draw_many(std::size_t n, std::uint64_t stream) const {
    Rng rng(derive_seed(cfg.seed, {0xda7a, stream}));
    Dataset ds;
    ds.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      ds.push_back(draw(rng));
    return ds;
  }
};

} // namespace

Federation gen_federation(const FederationConfig& cfg) {
  cfg.validate();
  const auto sets = draw_identified_sets(cfg.num_clients, cfg.num_classes, cfg.identified_per_client,
                                         cfg.seed, cfg.max_coverage_attempts);
  const Generator gen(cfg);
  Federation fed;
  for (int k = 0; k < cfg.num_clients; ++k) {
    ClientSpec spec = ClientSpec::make(k, sets[static_cast<std::size_t>(k)],
                                       static_cast<std::size_t>(cfg.num_classes), cfg.samples_per_client);
    Dataset raw = gen.draw_many(cfg.samples_per_client, static_cast<std::uint64_t>(k));
    fed.clients.push_back(mask_labels(raw, spec, cfg.task));
    fed.specs.push_back(std::move(spec));
  }
  fed.validation = gen.draw_many(cfg.validation_samples, 0xa11da7e);
  fed.test = gen.draw_many(cfg.test_samples, 0x7e57);
  return fed;
}

std::vector<double> augment_weak(std::span<const double> x, std::uint64_t seed, const AugmentConfig& cfg) {
  std::vector<double> out(x.begin(), x.end());
  if (cfg.sigma_weak == 0.0)
    return out;
  Rng rng(seed);
  for (double& v : out)
    v += rng.normal(0.0, cfg.sigma_weak);
  return out;
}

std::vector<double> augment_strong(std::span<const double> x, std::uint64_t seed,
                                   const AugmentConfig& cfg) {
  std::vector<double> out(x.begin(), x.end());
  Rng rng(seed);
  for (double& v : out) {
    if (cfg.scale_jitter > 0.0)
      v *= rng.uniform(1.0 - cfg.scale_jitter, 1.0 + cfg.scale_jitter);
    if (cfg.sigma_strong > 0.0)
      v += rng.normal(0.0, cfg.sigma_strong);
    if (cfg.drop_prob > 0.0 && rng.bernoulli(cfg.drop_prob))
      v = 0.0;
  }
  return out;
}

std::string to_csv(const Dataset& dataset) {
  if (dataset.empty())
    return {};
  const std::size_t d = dataset.front().x.size();
  const std::size_t m = dataset.front().true_label.size();
  std::string out;
  auto header = [&](char prefix, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!out.empty())
        out += ',';
      out += prefix;
      out += std::to_string(i);
    }
  };
  header('x', d);
  header('y', m);
  header('m', m);
  header('t', m);
  out += '\n';
  char buf[32];
  for (const Sample& s : dataset) {
    if (s.x.size() != d || s.true_label.size() != m)
      throw ShapeError("to_csv: samples have inconsistent dimensions");
    bool first = true;
    auto put = [&](double v) {
      if (!first)
        out += ',';
      first = false;
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out += buf;
    };
    for (double v : s.x)
      put(v);
    for (double v : s.label.values)
      put(v);
    for (bool b : s.label.known_mask)
      put(b ? 1.0 : 0.0);
    for (double v : s.true_label)
      put(v);
    out += '\n';
  }
  return out;
}

Dataset parse_csv(const std::string& text) {
  Dataset ds;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::size_t d = 0;
  std::size_t m = 0;
  bool have_header = false;

  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto pos = l.find(',', start);
      cells.push_back(l.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
      if (pos == std::string::npos)
        break;
      start = pos + 1;
    }
    return cells;
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    const auto cells = split(line);
    if (!have_header) {
      std::size_t counts[4] = {0, 0, 0, 0};
      const std::string prefixes = "xymt";
      for (const auto& c : cells) {
        const auto p = c.empty() ? std::string::npos : prefixes.find(c.front());
        if (p == std::string::npos)
          throw ParseError("header cell '" + c + "' is not one of x*, y*, m*, t*", lineno);
        ++counts[p];
      }
      if (counts[0] == 0 || counts[1] == 0 || counts[1] != counts[2] || counts[1] != counts[3])
        throw ParseError("header must have d feature columns and M each of y, m, t columns", lineno);
      d = counts[0];
      m = counts[1];
      have_header = true;
      continue;
    }
    if (cells.size() != d + 3 * m)
      throw ParseError("expected " + std::to_string(d + 3 * m) + " columns, found " +
                           std::to_string(cells.size()),
                       lineno);
    std::vector<double> vals(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& c = cells[i];
      const auto res = std::from_chars(c.data(), c.data() + c.size(), vals[i]);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size())
        throw ParseError("cannot parse '" + c + "' as a number in column " + std::to_string(i + 1),
                         lineno);
    }
    Sample s;
    s.x.assign(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(d));
    s.label.values.assign(vals.begin() + static_cast<std::ptrdiff_t>(d),
                          vals.begin() + static_cast<std::ptrdiff_t>(d + m));
    s.label.known_mask.resize(m);
    for (std::size_t c = 0; c < m; ++c)
      s.label.known_mask[c] = vals[d + m + c] != 0.0;
    s.true_label.assign(vals.begin() + static_cast<std::ptrdiff_t>(d + 2 * m), vals.end());
    ds.push_back(std::move(s));
  }
  return ds;
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f)
    throw Error("cannot open " + path.string() + " for writing");
  f << to_csv(dataset);
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f)
    throw Error("cannot open " + path.string());
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_csv(buf.str());
}

} // namespace fedlsm
