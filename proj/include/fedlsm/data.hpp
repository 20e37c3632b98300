#pragma once

// Synthetic federations with label set mismatch: every client annotates only
// its identified classes, and the identified sets jointly cover all classes.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fedlsm {

enum class Task { single_label, multi_label };

std::string to_string(Task t);
Task parse_task(const std::string& s);

// values[c] is trustworthy only where known_mask[c] is set; elsewhere it is 0.
struct LabelRecord {
  std::vector<double> values;
  std::vector<bool> known_mask;

  // Single-label: the sample carries a class label (some known entry is 1).
  bool has_positive_known() const;
  // Index of the known positive entry, or -1.
  int known_class() const;
  bool any_known() const;

  friend bool operator==(const LabelRecord&, const LabelRecord&) = default;
};

struct Sample {
  std::vector<double> x;
  LabelRecord label;
  std::vector<double> true_label; // evaluation only

  friend bool operator==(const Sample&, const Sample&) = default;
};

using Dataset = std::vector<Sample>;

struct ClientSpec {
  int client_id = 0;
  std::vector<int> identified; // sorted
  std::vector<int> unknown;    // sorted complement
  std::size_t n = 0;

  bool is_identified(int c) const;
  static ClientSpec make(int id, std::vector<int> identified, std::size_t num_classes, std::size_t n);
};

struct FederationConfig {
  int num_clients = 5;                 // K
  int num_classes = 7;                 // M
  int identified_per_client = 3;       // s
  int feature_dim = 16;                // d
  Task task = Task::single_label;
  std::size_t samples_per_client = 500;
  std::size_t validation_samples = 500;
  std::size_t test_samples = 2000;
  // Single-label: cluster spread and pairwise center distance in units of it.
  double cluster_std = 1.0;
  double class_separation = 4.0;
  // Optional class prior for single-label sampling; uniform when empty.
  std::vector<double> class_priors;
  // Multi-label: per-class positive rate drawn uniformly in [min, max], and
  // the std of the label noise added to each class score.
  double positive_rate_min = 0.2;
  double positive_rate_max = 0.4;
  double label_noise = 0.5;
  int max_coverage_attempts = 1000;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Federation {
  std::vector<ClientSpec> specs;
  std::vector<Dataset> clients; // masked per spec
  Dataset validation;           // fully labeled
  Dataset test;                 // fully labeled
};

Federation gen_federation(const FederationConfig& cfg);

// Draws one identified set per client, resampling until their union covers
// every class. Throws ConfigError("class coverage unsatisfiable") otherwise.
std::vector<std::vector<int>> draw_identified_sets(int num_clients, int num_classes, int per_client,
                                                   std::uint64_t seed, int max_attempts);

// Multi-label: keeps exactly the identified entries. Single-label: a sample
// whose true class is identified keeps its one-hot label with the mask set on
// the identified classes; any other sample becomes fully unlabeled.
Dataset mask_labels(const Dataset& dataset, const ClientSpec& spec, Task task);

// A fully labeled record (all-true mask) from a true label vector.
LabelRecord full_label(std::span<const double> true_label);

struct AugmentConfig {
  double sigma_weak = 0.01;
  double sigma_strong = 0.3;
  double scale_jitter = 0.2; // coordinate scaling in [1 - g, 1 + g]
  double drop_prob = 0.1;
};

std::vector<double> augment_weak(std::span<const double> x, std::uint64_t seed,
                                 const AugmentConfig& cfg);
std::vector<double> augment_strong(std::span<const double> x, std::uint64_t seed,
                                   const AugmentConfig& cfg);

// CSV with a header row x0..x{d-1},y0..,m0..,t0.. (features, label values,
// known mask, true label). Reals are written with round-trip precision.
void save_csv(const Dataset& dataset, const std::filesystem::path& path);
// Empty file yields an empty dataset; malformed rows raise ParseError with
// the offending line number.
Dataset load_csv(const std::filesystem::path& path);

std::string to_csv(const Dataset& dataset);
Dataset parse_csv(const std::string& text);

} // namespace fedlsm
