#pragma once

// One client's local round: uncertainty partition with the global model,
// teacher/student training on L = L_I + L_U + lambda * L_UDE, and the
// estimated class distribution (EDD) reported to the server.

#include "fedlsm/data.hpp"
#include "fedlsm/losses.hpp"
#include "fedlsm/nn.hpp"
#include "fedlsm/uncertainty.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace fedlsm {

struct ClientConfig {
  Task task = Task::single_label;

  // Pseudo-label thresholds. tau/tau_l: single-label; the rest: multi-label.
  double tau = 0.95;
  double tau_l = 0.85;
  double tau_p = 0.85;
  double tau_n = 5e-3;
  double tau_lp = 0.7;
  double tau_ln = 1e-2;

  double lambda_ude = 0.1;
  double ema_decay = 0.999;
  double mixup_alpha = 0.2;
  double lr = 1e-4;
  double lr_decay = 5e-4; // lr_r = lr / (1 + lr_decay * round)

  int local_iters = 30;
  int batch_size = 64; // includes the ude_batch generated samples
  int ude_batch = 4;
  int ude_retries = 4; // extra candidate pairs drawn per requested pair

  double frac_l = 0.5;
  double frac_h = 0.1;

  // Multi-label positive-term weights; computed from local labels when empty
  // and weighted_bce is set.
  std::vector<double> class_weights;
  bool weighted_bce = true;

  UnknownNorm unknown_norm = UnknownNorm::kept;
  MultiEntropyReduce entropy_reduce = MultiEntropyReduce::mean;
  AugmentConfig augment;
  AdamConfig adam;

  // Off for the FedAvg baselines: supervised loss only, no partition.
  bool pseudo_labeling = true;

  void validate() const;
};

struct ClientStats {
  double loss_identified = 0.0; // means over local iterations
  double loss_unknown = 0.0;
  double loss_ude = 0.0;
  std::size_t pseudo_kept = 0; // kept single labels or multi positives, summed over iterations
  std::size_t ude_pairs = 0;
  std::size_t n_low = 0;
  std::size_t n_mid = 0;
  std::size_t n_high = 0;
};

struct ClientUpdate {
  int client_id = 0;
  ModelParams params; // student after local training
  std::size_t n = 0;
  std::vector<double> edd; // q^k, length M
  ClientStats stats;
};

struct MixedSample {
  std::vector<double> x;
  SoftTarget target;
};

// Label or relaxed pseudo label for one member of a MixUp pair. Single-label:
// the known class, else a teacher label at tau_l restricted to unknown classes.
// Multi-label: known entries as labeled, unknown entries positive at tau_lp,
// negative at tau_ln, otherwise unusable. Returns nullopt when nothing is usable.
std::optional<SoftTarget> relaxed_target(const LabelRecord& label, std::span<const double> teacher_probs,
                                         std::span<const int> unknown, const ClientConfig& cfg);

// Up to cfg.ude_batch MixUp pairs (x_l from partition.low, x_h from
// partition.high) on weak views. Empty when either subset is empty.
std::vector<MixedSample> ude_batch(const UncertaintyPartition& part, const ModelParams& teacher,
                                   const Dataset& dataset, const ClientSpec& spec,
                                   const ClientConfig& cfg, std::uint64_t seed);

// Positive label counts on identified classes; zero elsewhere.
std::vector<double> identified_counts(const Dataset& dataset, const ClientSpec& spec, std::size_t num_classes);

ClientUpdate local_train(const ModelParams& global, const Dataset& dataset, const ClientSpec& spec,
                         const ClientConfig& cfg, int round, std::uint64_t seed);

} // namespace fedlsm
