#include "fedlsm/report.hpp"

#include "fedlsm/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace fedlsm {

using nlohmann::json;

json header_record(const ExperimentConfig& cfg) {
  return json{{"type", "header"},
              {"schema_version", kConfigSchemaVersion},
              {"federation", federation_json(cfg.sim.federation)},
              {"hidden", cfg.sim.hidden},
              {"config", to_json(cfg)}};
}

json round_record(const RoundReport& r) {
  json per_class = json::array();
  for (double v : r.test.per_class_auc)
    per_class.push_back(std::isnan(v) ? json(nullptr) : json(v));
  json clients = json::array();
  for (const auto& c : r.clients) {
    clients.push_back(json{{"id", c.client_id},
                           {"n", c.n},
                           {"edd", c.edd},
                           {"loss_identified", c.stats.loss_identified},
                           {"loss_unknown", c.stats.loss_unknown},
                           {"loss_ude", c.stats.loss_ude},
                           {"pseudo_kept", c.stats.pseudo_kept},
                           {"ude_pairs", c.stats.ude_pairs},
                           {"partition", {c.stats.n_low, c.stats.n_mid, c.stats.n_high}}});
  }
  return json{{"type", "round"},
              {"seed", r.seed},
              {"mode", to_string(r.mode)},
              {"round", r.round},
              {"macro_auc", r.test.macro_auc},
              {"accuracy", r.test.accuracy},
              {"macro_f1", r.test.macro_f1},
              {"macro_precision", r.test.macro_precision},
              {"macro_recall", r.test.macro_recall},
              {"per_class_auc", per_class},
              {"clients", clients}};
}

std::string to_line(const json& record) { return record.dump() + "\n"; }

std::string run_experiment(const ExperimentConfig& cfg, const std::function<void(const RoundReport&)>& on_round) {
  std::string text = to_line(header_record(cfg));
  for (std::uint64_t seed : cfg.seeds) {
    SimulationConfig sim = cfg.sim;
    sim.seed = seed;
    if (cfg.checkpoints)
      sim.checkpoint_dir = cfg.output_dir / "checkpoints" / to_string(sim.mode);
    run_federation(sim, [&](const RoundReport& r) {
      text += to_line(round_record(r));
      if (on_round)
        on_round(r);
    });
  }
  return text;
}

ParsedReport parse_report(const std::string& text) {
  ParsedReport out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty())
      continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object() || !rec.contains("type"))
      throw ParseError("not a report record", lineno);
    const auto type = rec["type"].get<std::string>();
    if (type == "header") {
      if (!out.header.is_null() && out.header["federation"] != rec["federation"])
        throw ParseError("report merges runs of different federations", lineno);
      out.header = std::move(rec);
    } else if (type == "round") {
      out.rounds.push_back(std::move(rec));
    } else {
      throw ParseError("unknown record type '" + type + "'", lineno);
    }
  }
  if (out.header.is_null())
    throw ParseError("report has no header record");
  return out;
}

ParsedReport load_report(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f)
    throw Error("cannot open " + path.string());
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_report(buf.str());
}

namespace {

// (mode, seed) -> last round record
std::map<std::pair<std::string, std::uint64_t>, const json*> final_rounds(const ParsedReport& r) {
  std::map<std::pair<std::string, std::uint64_t>, const json*> last;
  for (const auto& rec : r.rounds) {
    const auto key = std::make_pair(rec["mode"].get<std::string>(), rec["seed"].get<std::uint64_t>());
    auto it = last.find(key);
    if (it == last.end() || (*it->second)["round"].get<int>() <= rec["round"].get<int>())
      last[key] = &rec;
  }
  return last;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v)
    s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

} // namespace

std::vector<MetricSummary> summarize(const ParsedReport& report) {
  std::map<std::string, std::map<std::string, std::vector<double>>> values; // mode -> metric -> runs
  for (const auto& [key, rec] : final_rounds(report))
    for (const auto& metric : kSummaryMetrics)
      values[key.first][metric].push_back((*rec)[metric].get<double>());

  std::vector<MetricSummary> rows;
  for (const auto& [mode, metrics] : values) {
    for (const auto& metric : kSummaryMetrics) {
      const auto& v = metrics.at(metric);
      const double mean = mean_of(v);
      double var = 0.0;
      for (double x : v)
        var += (x - mean) * (x - mean);
      const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
      rows.push_back(MetricSummary{mode, metric, mean, sd, v.size()});
    }
  }
  return rows;
}

std::string summary_csv(const std::vector<MetricSummary>& rows) {
  std::string out = "mode,metric,mean,std,runs\n";
  for (const auto& r : rows)
    out += r.mode + "," + r.metric + "," + fmt(r.mean) + "," + fmt(r.stddev) + "," + std::to_string(r.runs) + "\n";
  return out;
}

CompareResult compare_reports(const ParsedReport& a, const ParsedReport& b) {
  const json& fa = a.header["federation"];
  const json& fb = b.header["federation"];
  if (fa != fb) {
    std::string diff;
    for (const auto& [key, value] : fa.items())
      if (!fb.contains(key) || fb[key] != value)
        diff += (diff.empty() ? "" : ", ") + key;
    throw ConfigError("reports come from different federation configs (differs in: " + diff + ")");
  }

  CompareResult out;
  out.deltas_csv = "metric,a_mean,b_mean,delta\n";
  auto finals = [](const ParsedReport& r, const std::string& metric) {
    std::vector<double> v;
    for (const auto& [key, rec] : final_rounds(r))
      v.push_back((*rec)[metric].get<double>());
    return mean_of(v);
  };
  for (const auto& metric : kSummaryMetrics) {
    const double ma = finals(a, metric);
    const double mb = finals(b, metric);
    out.deltas.emplace_back(metric, mb - ma);
    out.deltas_csv += metric + "," + fmt(ma) + "," + fmt(mb) + "," + fmt(mb - ma) + "\n";
  }

  auto curve = [](const ParsedReport& r) {
    std::map<int, std::vector<double>> by_round;
    for (const auto& rec : r.rounds)
      by_round[rec["round"].get<int>()].push_back(rec["macro_auc"].get<double>());
    std::map<int, double> out;
    for (const auto& [round, v] : by_round)
      out[round] = mean_of(v);
    return out;
  };
  const auto ca = curve(a);
  const auto cb = curve(b);
  out.curves_csv = "round,a_macro_auc,b_macro_auc,delta\n";
  for (const auto& [round, va] : ca) {
    const auto it = cb.find(round);
    if (it == cb.end())
      continue;
    out.curves_csv += std::to_string(round) + "," + fmt(va) + "," + fmt(it->second) + "," +
                      fmt(it->second - va) + "\n";
  }
  return out;
}

} // namespace fedlsm
