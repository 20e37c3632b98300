#pragma once

// Experiment configuration: a versioned JSON document. Required keys must be
// present; everything else defaults to the published hyperparameters. CLI
// overrides address keys by dotted path, e.g. "client.lr=0.003".

#include "fedlsm/server.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace fedlsm {

inline constexpr int kConfigSchemaVersion = 1;

struct ExperimentConfig {
  SimulationConfig sim; // mode and rounds live here
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir = "out";
  std::string report_file = "report.jsonl";
  std::string summary_file = "summary.csv";
  bool checkpoints = false;
};

// Sets the value at a dotted path; the value is parsed as JSON when possible
// and kept as a string otherwise. "key=value" form.
void apply_override(nlohmann::json& doc, const std::string& assignment);

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

// Full document with every key, suitable for writing back out.
nlohmann::json to_json(const ExperimentConfig& cfg);
nlohmann::json federation_json(const FederationConfig& f);

// A config document with all required keys filled with the desk-scale
// experiment defaults.
nlohmann::json default_config_json();

} // namespace fedlsm
