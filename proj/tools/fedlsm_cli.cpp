// fedlsm: experiment front-end.
//
//   fedlsm run --config exp.json [--set client.lr=0.003] [--mode fedavg_masked]... [--out dir]
//   fedlsm compare a.jsonl b.jsonl [--out prefix]
//   fedlsm gen-data --config exp.json [--out dir]
//   fedlsm gradcheck [--nets 20] [--seed 1]
//   fedlsm init-config [--out exp.json]
//
// Exit codes: 0 success, 1 validation/input error, 2 numeric failure.
// FEDLSM_OUTPUT_DIR overrides the output directory of run and gen-data.

#include "fedlsm/config.hpp"
#include "fedlsm/data.hpp"
#include "fedlsm/errors.hpp"
#include "fedlsm/kernels.hpp"
#include "fedlsm/report.hpp"
#include "fedlsm/selftest.hpp"
#include "fedlsm/server.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace fedlsm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumeric = 2;

fs::path output_dir(const fs::path& configured, const std::string& flag) {
  if (!flag.empty())
    return flag;
  if (const char* env = std::getenv("FEDLSM_OUTPUT_DIR"); env != nullptr && *env != '\0')
    return env;
  return configured;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f)
    throw Error("cannot write " + path.string());
  f << text;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& sets,
            const std::vector<std::string>& modes, const std::string& out_flag) {
  ExperimentConfig cfg = load_config(config_path, sets);
  const fs::path dir = output_dir(cfg.output_dir, out_flag);
  fs::create_directories(dir);
  cfg.output_dir = dir;

  std::vector<Mode> run_modes;
  for (const auto& m : modes)
    run_modes.push_back(parse_mode(m));
  if (run_modes.empty())
    run_modes.push_back(cfg.sim.mode);

  std::string report;
  for (Mode mode : run_modes) {
    cfg.sim.mode = mode;
    std::cerr << "fedlsm: mode=" << to_string(mode) << " rounds=" << cfg.sim.rounds << " seeds=" << cfg.seeds.size()
              << " simd=" << kernels::active_name() << "\n";
    report += run_experiment(cfg, [](const RoundReport& r) {
      std::cerr << "  seed " << r.seed << " round " << r.round << " macro_auc " << r.test.macro_auc << "\n";
    });
  }
  write_file(dir / cfg.report_file, report);

  const auto rows = summarize(parse_report(report));
  const std::string csv = summary_csv(rows);
  write_file(dir / cfg.summary_file, csv);

  std::printf("%-14s %-16s %10s %10s %5s\n", "mode", "metric", "mean", "std", "runs");
  for (const auto& r : rows)
    std::printf("%-14s %-16s %10.4f %10.4f %5zu\n", r.mode.c_str(), r.metric.c_str(), r.mean, r.stddev, r.runs);
  std::printf("report: %s\nsummary: %s\n", (dir / cfg.report_file).c_str(), (dir / cfg.summary_file).c_str());
  return kExitOk;
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& out_prefix) {
  const CompareResult res = compare_reports(load_report(a), load_report(b));
  std::cout << res.deltas_csv;
  if (!out_prefix.empty()) {
    write_file(out_prefix + "_deltas.csv", res.deltas_csv);
    write_file(out_prefix + "_curves.csv", res.curves_csv);
  } else {
    std::cout << "\n" << res.curves_csv;
  }
  return kExitOk;
}

int cmd_gen_data(const std::string& config_path, const std::vector<std::string>& sets, const std::string& out_flag) {
  const ExperimentConfig cfg = load_config(config_path, sets);
  const fs::path dir = output_dir(cfg.output_dir, out_flag);
  fs::create_directories(dir);
  SimulationConfig sim = cfg.sim;
  sim.seed = cfg.seeds.front();
  const Federation fed = build_federation(sim);
  nlohmann::json specs = nlohmann::json::array();
  for (std::size_t k = 0; k < fed.clients.size(); ++k) {
    save_csv(fed.clients[k], dir / ("client_" + std::to_string(k) + ".csv"));
    specs.push_back({{"client_id", fed.specs[k].client_id},
                     {"identified", fed.specs[k].identified},
                     {"unknown", fed.specs[k].unknown},
                     {"n", fed.specs[k].n}});
  }
  save_csv(fed.validation, dir / "validation.csv");
  save_csv(fed.test, dir / "test.csv");
  write_file(dir / "clients.json", specs.dump(2) + "\n");
  std::printf("wrote %zu client datasets, validation and test sets to %s\n", fed.clients.size(), dir.c_str());
  return kExitOk;
}

int cmd_gradcheck(int nets, std::uint64_t seed) {
  const GradcheckSummary s = gradcheck_suite(nets, seed);
  std::printf("nets: %d  simd: %.*s\n", s.nets, static_cast<int>(kernels::active_name().size()),
              kernels::active_name().data());
  std::printf("max relative error  L_I: %.3e  L_U: %.3e  L_UDE: %.3e\n", s.max_identified, s.max_unknown,
              s.max_ude);
  const bool ok = s.worst() < 1e-4;
  std::printf("%s (tolerance 1e-4)\n", ok ? "PASS" : "FAIL");
  return ok ? kExitOk : kExitNumeric;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator for label set mismatch"};
  app.require_subcommand(1);

  std::string config_path, out;
  std::vector<std::string> sets, modes;

  auto* run = app.add_subcommand("run", "Run an experiment for every configured seed");
  run->add_option("--config,-c", config_path, "Experiment config (JSON)")->required();
  run->add_option("--set", sets, "Override a config key: dotted.path=value");
  run->add_option("--mode", modes, "fedlsm | fedavg_masked | fedavg_full (repeatable)");
  run->add_option("--out,-o", out, "Output directory");

  std::string report_a, report_b;
  auto* compare = app.add_subcommand("compare", "Compare two report files");
  compare->add_option("a", report_a, "Baseline report")->required();
  compare->add_option("b", report_b, "Candidate report")->required();
  compare->add_option("--out,-o", out, "Write <prefix>_deltas.csv and <prefix>_curves.csv");

  auto* gen = app.add_subcommand("gen-data", "Materialize a federation as CSV files");
  gen->add_option("--config,-c", config_path, "Experiment config (JSON)")->required();
  gen->add_option("--set", sets, "Override a config key: dotted.path=value");
  gen->add_option("--out,-o", out, "Output directory");

  int nets = 20;
  std::uint64_t seed = 1;
  auto* grad = app.add_subcommand("gradcheck", "Check backprop against finite differences");
  grad->add_option("--nets", nets, "Number of random networks");
  grad->add_option("--seed", seed, "Random seed");

  auto* init = app.add_subcommand("init-config", "Print a config with every key at its default");
  init->add_option("--out,-o", out, "Write to file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run)
      return cmd_run(config_path, sets, modes, out);
    if (*compare)
      return cmd_compare(report_a, report_b, out);
    if (*gen)
      return cmd_gen_data(config_path, sets, out);
    if (*grad)
      return cmd_gradcheck(nets, seed);
    if (*init) {
      const std::string text = to_json(parse_config(default_config_json())).dump(2) + "\n";
      if (out.empty())
        std::cout << text;
      else
        write_file(out, text);
      return kExitOk;
    }
  } catch (const NumericError& e) {
    std::cerr << "fedlsm: numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "fedlsm: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
