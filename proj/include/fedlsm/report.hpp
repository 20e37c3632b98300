#pragma once

// Line-delimited JSON run reports, seed summaries and report comparison.
//
// A report file starts with one {"type":"header",...} record describing the
// federation, followed by one {"type":"round",...} record per round per seed.
// Records hold no timestamps, so identical runs produce identical bytes.

#include "fedlsm/config.hpp"
#include "fedlsm/server.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace fedlsm {

nlohmann::json header_record(const ExperimentConfig& cfg);
nlohmann::json round_record(const RoundReport& r);

// Compact single-line serialization used in report files.
std::string to_line(const nlohmann::json& record);

// Runs cfg.sim once per seed and returns the full report text: the header
// followed by every round record in seed order.
std::string run_experiment(const ExperimentConfig& cfg,
                           const std::function<void(const RoundReport&)>& on_round = {});

struct ParsedReport {
  nlohmann::json header;
  std::vector<nlohmann::json> rounds;
};

ParsedReport parse_report(const std::string& text);
ParsedReport load_report(const std::filesystem::path& path);

inline const std::vector<std::string> kSummaryMetrics = {"macro_auc", "accuracy", "macro_f1",
                                                        "macro_precision", "macro_recall"};

struct MetricSummary {
  std::string mode;
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0; // sample standard deviation; 0 for a single run
  std::size_t runs = 0;
};

// Final-round metrics per (mode, seed), summarized over seeds.
std::vector<MetricSummary> summarize(const ParsedReport& report);
std::string summary_csv(const std::vector<MetricSummary>& rows);

struct CompareResult {
  std::string deltas_csv; // metric,a_mean,b_mean,delta(b-a)
  std::string curves_csv; // round,a_macro_auc,b_macro_auc,delta
  std::vector<std::pair<std::string, double>> deltas;
};

// Reports must describe the same federation; otherwise ConfigError.
CompareResult compare_reports(const ParsedReport& a, const ParsedReport& b);

} // namespace fedlsm
