#pragma once

// Round orchestration. Feature extractors are averaged by client data size;
// proxies are averaged per class with weights from the clients' estimated
// class distributions (adaptive weighted proxy aggregation, AWPA).

#include "fedlsm/client.hpp"
#include "fedlsm/data.hpp"
#include "fedlsm/metrics.hpp"
#include "fedlsm/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fedlsm {

enum class Mode { fedlsm, fedavg_masked, fedavg_full };

std::string to_string(Mode m);
Mode parse_mode(const std::string& s);

struct ProxyParams {
  Matrix proxies;
  std::vector<double> bias;
};

// theta = sum_k (n_k / n) theta_k.
std::vector<DenseLayer> aggregate_features(std::span<const ClientUpdate> updates);

// Per-class weights q_c^k / sum_j q_c^j, falling back to n_k / n when no
// client reports any count for the class.
std::vector<double> awpa_weights(std::span<const ClientUpdate> updates, std::size_t cls);

ProxyParams aggregate_proxies(std::span<const ClientUpdate> updates);

// Plain data-size weighting for the proxies (AWPA disabled).
ProxyParams fedavg_proxies(std::span<const ClientUpdate> updates);

struct SimulationConfig {
  FederationConfig federation;
  ClientConfig client;
  std::vector<std::size_t> hidden = {32, 32}; // feature layer widths
  int rounds = 50;
  Mode mode = Mode::fedlsm;
  bool awpa = true;
  std::uint64_t seed = 1;
  bool parallel_clients = false;
  std::filesystem::path checkpoint_dir; // per-round checkpoints when set

  void validate() const;
};

struct ClientRoundLog {
  int client_id = 0;
  std::size_t n = 0;
  std::vector<double> edd;
  ClientStats stats;
};

struct RoundReport {
  std::uint64_t seed = 0;
  Mode mode = Mode::fedlsm;
  int round = 0; // 1-based, after aggregation
  EvalResult test;
  std::vector<ClientRoundLog> clients;
};

struct RoundState {
  int round = 0;
  ModelParams global;
  std::vector<std::vector<std::vector<double>>> edd_history; // [round][client][class]
  std::uint64_t seed = 0;
};

// The client-side view a round needs.
struct RoundInputs {
  std::span<const ClientSpec> specs;
  std::span<const Dataset> datasets;
  const Dataset* test = nullptr;
};

EvalResult evaluate(const ModelParams& params, const Dataset& test, Task task);

// Client config actually used for a mode (pseudo labeling off for baselines).
ClientConfig client_config_for(const SimulationConfig& cfg);

std::pair<RoundState, RoundReport> run_round(const RoundState& state, const RoundInputs& inputs,
                                             const SimulationConfig& cfg);

// Builds the federation for cfg.mode (all classes identified for
// fedavg_full), then runs cfg.rounds rounds. on_round is called after each.
std::vector<RoundReport> run_federation(const SimulationConfig& cfg,
                                        const std::function<void(const RoundReport&)>& on_round = {});

// Federation as seen by cfg.mode.
Federation build_federation(const SimulationConfig& cfg);

ModelParams initial_model(const SimulationConfig& cfg);

} // namespace fedlsm
