#include "fedlsm/server.hpp"

#include "fedlsm/checkpoint.hpp"
#include "fedlsm/errors.hpp"
#include "fedlsm/kernels.hpp"
#include "fedlsm/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <future>
#include <numeric>

namespace fedlsm {

std::string to_string(Mode m) {
  switch (m) {
  case Mode::fedlsm:
    return "fedlsm";
  case Mode::fedavg_masked:
    return "fedavg_masked";
  case Mode::fedavg_full:
    return "fedavg_full";
  }
  return "unknown";
}

Mode parse_mode(const std::string& s) {
  if (s == "fedlsm")
    return Mode::fedlsm;
  if (s == "fedavg_masked")
    return Mode::fedavg_masked;
  if (s == "fedavg_full")
    return Mode::fedavg_full;
  throw ConfigError("unknown mode '" + s + "' (expected fedlsm, fedavg_masked or fedavg_full)");
}

namespace {

// out = sum_k w_k x_k, written as x_ref + sum_k w_k (x_k - x_ref) with the
// heaviest client as reference so that identical inputs and one-hot weights
// reproduce the input bit for bit.
void weighted_mean(std::span<double> out, const std::vector<std::span<const double>>& xs,
                   const std::vector<double>& w) {
  const auto ref = static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
  std::copy(xs[ref].begin(), xs[ref].end(), out.begin());
  std::vector<double> diff(out.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (k == ref || w[k] == 0.0)
      continue;
    for (std::size_t j = 0; j < diff.size(); ++j)
      diff[j] = xs[k][j] - xs[ref][j];
    kernels::axpy(out, w[k], diff);
  }
}

void check_shapes(std::span<const ClientUpdate> updates) {
  if (updates.empty())
    throw AggregationError("no client updates to aggregate");
  for (const auto& u : updates)
    if (!u.params.same_shape(updates.front().params))
      throw AggregationError("client " + std::to_string(u.client_id) + " sent parameters of a different shape");
}

std::vector<double> size_weights(std::span<const ClientUpdate> updates) {
  double total = 0.0;
  for (const auto& u : updates)
    total += static_cast<double>(u.n);
  if (!(total > 0.0))
    throw AggregationError("total client sample count is zero");
  std::vector<double> w;
  for (const auto& u : updates)
    w.push_back(static_cast<double>(u.n) / total);
  return w;
}

ProxyParams aggregate_proxies_with(std::span<const ClientUpdate> updates,
                                   const std::function<std::vector<double>(std::size_t)>& weights_for) {
  check_shapes(updates);
  const auto& shape = updates.front().params;
  const std::size_t m = shape.num_classes();
  ProxyParams out{Matrix(m, shape.feature_dim()), std::vector<double>(m, 0.0)};
  for (std::size_t c = 0; c < m; ++c) {
    const auto w = weights_for(c);
    std::vector<std::span<const double>> rows;
    std::vector<std::span<const double>> biases;
    for (const auto& u : updates) {
      rows.push_back(u.params.proxies.row(c));
      biases.emplace_back(&u.params.proxy_bias[c], 1);
    }
    weighted_mean(out.proxies.row(c), rows, w);
    weighted_mean(std::span<double>(&out.bias[c], 1), biases, w);
  }
  return out;
}

} // namespace

std::vector<DenseLayer> aggregate_features(std::span<const ClientUpdate> updates) {
  check_shapes(updates);
  const auto w = size_weights(updates);
  std::vector<DenseLayer> layers = updates.front().params.layers;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::vector<std::span<const double>> ws, bs;
    for (const auto& u : updates) {
      ws.emplace_back(u.params.layers[l].weight.data);
      bs.emplace_back(u.params.layers[l].bias);
    }
    weighted_mean(layers[l].weight.data, ws, w);
    weighted_mean(layers[l].bias, bs, w);
  }
  return layers;
}

std::vector<double> awpa_weights(std::span<const ClientUpdate> updates, std::size_t cls) {
  double total = 0.0;
  for (const auto& u : updates) {
    if (u.edd.size() != u.params.num_classes())
      throw AggregationError("client " + std::to_string(u.client_id) + " sent an EDD of the wrong length");
    const double q = u.edd[cls];
    if (!(q >= 0.0))
      throw AggregationError("client " + std::to_string(u.client_id) + " sent a negative EDD entry");
    total += q;
  }
  if (total == 0.0)
    return size_weights(updates);
  std::vector<double> w;
  for (const auto& u : updates)
    w.push_back(u.edd[cls] / total);
  return w;
}

ProxyParams aggregate_proxies(std::span<const ClientUpdate> updates) {
  check_shapes(updates);
  // Validate every class up front so errors do not depend on class order.
  for (std::size_t c = 0; c < updates.front().params.num_classes(); ++c)
    (void)awpa_weights(updates, c);
  return aggregate_proxies_with(updates, [&](std::size_t c) { return awpa_weights(updates, c); });
}

ProxyParams fedavg_proxies(std::span<const ClientUpdate> updates) {
  check_shapes(updates);
  const auto w = size_weights(updates);
  return aggregate_proxies_with(updates, [&](std::size_t) { return w; });
}

void SimulationConfig::validate() const {
  federation.validate();
  client.validate();
  if (rounds < 1)
    throw ConfigError("rounds must be at least 1");
  if (hidden.empty() || std::find(hidden.begin(), hidden.end(), 0u) != hidden.end())
    throw ConfigError("model.hidden must list positive layer widths");
  if (client.task != federation.task)
    throw ConfigError("client task and federation task differ");
}

EvalResult evaluate(const ModelParams& params, const Dataset& test, Task task) {
  if (test.empty())
    throw ConfigError("evaluate: empty test set");
  Matrix x(test.size(), test.front().x.size());
  std::vector<std::vector<double>> truth;
  truth.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::copy(test[i].x.begin(), test[i].x.end(), x.row(i).begin());
    truth.push_back(test[i].true_label);
  }
  const Matrix logits = forward(params, x).logits;
  const Matrix probs = task == Task::single_label ? softmax_rows(logits) : sigmoid_rows(logits);
  return macro_metrics(probs, truth, task);
}

ClientConfig client_config_for(const SimulationConfig& cfg) {
  ClientConfig c = cfg.client;
  c.task = cfg.federation.task;
  c.pseudo_labeling = cfg.mode == Mode::fedlsm;
  return c;
}

std::pair<RoundState, RoundReport> run_round(const RoundState& state, const RoundInputs& inputs,
                                             const SimulationConfig& cfg) {
  validate(state.global);
  if (inputs.specs.size() != inputs.datasets.size() || inputs.specs.empty())
    throw ConfigError("run_round: need one dataset per client spec");
  const ClientConfig ccfg = client_config_for(cfg);
  const std::size_t k = inputs.specs.size();

  auto train_one = [&](std::size_t i) {
    return local_train(state.global, inputs.datasets[i], inputs.specs[i], ccfg, state.round, state.seed);
  };

  std::vector<ClientUpdate> updates;
  updates.reserve(k);
  if (cfg.parallel_clients && k > 1) {
    std::vector<std::future<ClientUpdate>> futures;
    for (std::size_t i = 0; i < k; ++i)
      futures.push_back(std::async(std::launch::async, train_one, i));
    for (auto& f : futures)
      updates.push_back(f.get());
  } else {
    for (std::size_t i = 0; i < k; ++i)
      updates.push_back(train_one(i));
  }
  std::sort(updates.begin(), updates.end(),
            [](const ClientUpdate& a, const ClientUpdate& b) { return a.client_id < b.client_id; });

  RoundState next;
  next.round = state.round + 1;
  next.seed = state.seed;
  next.edd_history = state.edd_history;
  next.global.layers = aggregate_features(updates);
  ProxyParams proxies =
      cfg.mode == Mode::fedlsm && cfg.awpa ? aggregate_proxies(updates) : fedavg_proxies(updates);
  next.global.proxies = std::move(proxies.proxies);
  next.global.proxy_bias = std::move(proxies.bias);
  if (!next.global.all_finite())
    throw NumericError("round " + std::to_string(next.round) + ": global model diverged (non-finite parameters)");

  RoundReport report;
  report.seed = state.seed;
  report.mode = cfg.mode;
  report.round = next.round;
  if (inputs.test != nullptr)
    report.test = evaluate(next.global, *inputs.test, cfg.federation.task);
  std::vector<std::vector<double>> edds;
  for (auto& u : updates) {
    edds.push_back(u.edd);
    report.clients.push_back(ClientRoundLog{u.client_id, u.n, std::move(u.edd), u.stats});
  }
  next.edd_history.push_back(std::move(edds));
  return {std::move(next), std::move(report)};
}

Federation build_federation(const SimulationConfig& cfg) {
  FederationConfig fc = cfg.federation;
  fc.seed = cfg.seed;
  Federation fed = gen_federation(fc);
  if (cfg.mode == Mode::fedavg_full) {
    std::vector<int> all(static_cast<std::size_t>(fc.num_classes));
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t k = 0; k < fed.specs.size(); ++k) {
      fed.specs[k] = ClientSpec::make(fed.specs[k].client_id, all, all.size(), fed.specs[k].n);
      fed.clients[k] = mask_labels(fed.clients[k], fed.specs[k], fc.task);
    }
  }
  return fed;
}

ModelParams initial_model(const SimulationConfig& cfg) {
  std::vector<std::size_t> dims{static_cast<std::size_t>(cfg.federation.feature_dim)};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  return init_params(dims, static_cast<std::size_t>(cfg.federation.num_classes),
                     derive_seed(cfg.seed, {0x1417}));
}

std::vector<RoundReport> run_federation(const SimulationConfig& cfg,
                                        const std::function<void(const RoundReport&)>& on_round) {
  cfg.validate();
  const Federation fed = build_federation(cfg);
  RoundState state{0, initial_model(cfg), {}, cfg.seed};
  const RoundInputs inputs{fed.specs, fed.clients, &fed.test};

  if (!cfg.checkpoint_dir.empty())
    std::filesystem::create_directories(cfg.checkpoint_dir);

  std::vector<RoundReport> reports;
  for (int r = 0; r < cfg.rounds; ++r) {
    auto [next, report] = run_round(state, inputs, cfg);
    state = std::move(next);
    if (!cfg.checkpoint_dir.empty()) {
      char name[64];
      std::snprintf(name, sizeof(name), "seed%llu_round%03d.ckpt",
                    static_cast<unsigned long long>(cfg.seed), state.round);
      save_checkpoint(state.global, cfg.checkpoint_dir / name);
    }
    if (on_round)
      on_round(report);
    reports.push_back(std::move(report));
  }
  return reports;
}

} // namespace fedlsm
