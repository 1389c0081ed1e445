#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "hcqos/config.hpp"
#include "hcqos/control.hpp"
#include "hcqos/csv.hpp"
#include "hcqos/errors.hpp"
#include "hcqos/metrics.hpp"
#include "hcqos/scenarios.hpp"
#include "hcqos/traffic.hpp"

using namespace hcqos;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitIo = 3;

const char* const kScenarioNames[] = {"s1-histogram", "s2-hybrid-db"};

struct RunArgs {
  std::string positional;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string mode;
  std::optional<double> scale;
};

int cmd_run(const RunArgs& a) {
  const std::string path = !a.config.empty() ? a.config : a.positional;
  if (path.empty()) throw ConfigError("run: a config file is required (--config PATH)");
  ScenarioConfig cfg = load_config(path);
  if (a.seed) cfg.seed = *a.seed;
  if (!a.out.empty()) cfg.output = a.out;
  if (!a.mode.empty()) {
    if (a.mode == "open") cfg.modes = {FeedbackMode::Open};
    else if (a.mode == "closed") cfg.modes = {FeedbackMode::Closed};
    else if (a.mode == "both") cfg.modes = {FeedbackMode::Open, FeedbackMode::Closed};
    else throw ConfigError("--mode must be open, closed or both");
  }
  if (a.scale) {
    if (!cfg.workload) throw ConfigError("--scale needs a workload section in the config");
    cfg.workload->scale = *a.scale;
  }
  cfg.validate();
  const ScenarioRun run = run_scenario(cfg);
  const auto dir = (a.out.empty() ? output_root(cfg) : std::filesystem::path(a.out)) / run.id;
  write_run(run, dir);
  if (run.report) {
    const auto& r = *run.report;
    std::cout << run.id << ": drop fraction open " << format_sig9(r.modes[0].drop_fraction)
              << ", closed " << format_sig9(r.modes[1].drop_fraction) << "; tail mass open "
              << format_sig9(r.modes[0].tail_mass) << ", closed "
              << format_sig9(r.modes[1].tail_mass) << '\n';
  }
  std::cout << "wrote " << dir.string() << '\n';
  return 0;
}

int cmd_identify(const std::string& trace_path, int n, int m, const std::string& out) {
  std::ifstream in(trace_path, std::ios::binary);
  if (!in) throw IoError(trace_path, "cannot open state trace");
  const Trajectory t = read_state_trace_csv(in, n, m);
  const Identification id = identify_model(t, n, m);
  if (out.empty()) {
    write_model_csv(std::cout, id.model, id.residual_norm);
  } else {
    auto os = open_output(out);
    write_model_csv(os, id.model, id.residual_norm);
    if (!os) throw IoError(out, "write failed");
  }
  std::cerr << "identified from " << id.samples << " transitions, residual norm "
            << format_sig9(id.residual_norm) << " (rms " << format_sig9(id.residual_rms) << ")\n";
  return 0;
}

int cmd_trace(const std::string& config, const std::string& out, std::optional<std::uint64_t> seed) {
  ScenarioConfig cfg = load_config(config);
  if (seed) cfg.seed = *seed;
  const auto trace = generate_trace(cfg.traffic, static_cast<double>(cfg.epochs) * cfg.link.epoch,
                                    mix_seed(cfg.seed, 1));
  if (out.empty()) {
    write_trace_csv(std::cout, trace);
  } else {
    auto os = open_output(out);
    write_trace_csv(os, trace);
    if (!os) throw IoError(out, "write failed");
  }
  return 0;
}

int cmd_scenario(const std::string& name, std::uint64_t seed, const std::string& out,
                 std::optional<double> scale) {
  if (name == "s1-histogram") {
    const S1Outcome s1 = run_s1(seed);
    print_s1(std::cout, s1);
    if (!out.empty()) write_run(s1.run, std::filesystem::path(out) / s1.run.id);
    return 0;
  }
  if (name == "s2-hybrid-db") {
    const S2Outcome s2 = run_s2(seed, scale.value_or(0.001));
    print_s2(std::cout, s2);
    if (!out.empty()) write_s2(s2, std::filesystem::path(out) / ("s2-hybrid-db-seed" + std::to_string(seed)));
    return 0;
  }
  std::string names;
  for (const char* s : kScenarioNames) names += std::string(names.empty() ? "" : ", ") + s;
  throw ConfigError("unknown scenario '" + name + "'; valid names: " + names);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid-cloud bottleneck link simulator with a feedback QoS controller"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario config in open and/or closed mode");
  run_cmd->add_option("config_file", run.positional, "Scenario config (YAML)");
  run_cmd->add_option("--config", run.config, "Scenario config (YAML)");
  run_cmd->add_option("--seed", run.seed, "Override the scenario seed");
  run_cmd->add_option("--out", run.out, "Output root directory");
  run_cmd->add_option("--mode", run.mode, "open|closed|both");
  run_cmd->add_option("--scale", run.scale, "Corpus desk-scale factor");

  std::string trace_path, model_out;
  int n = 0, m = 0;
  auto* id_cmd = app.add_subcommand("identify", "Fit (A, B) to a CSV of (x, u) samples");
  id_cmd->add_option("trace", trace_path, "CSV with columns x0..x{n-1},u0..u{m-1}")->required();
  id_cmd->add_option("--n", n, "State dimension")->required();
  id_cmd->add_option("--m", m, "Control dimension")->required();
  id_cmd->add_option("--out", model_out, "Model CSV path (default: stdout)");

  std::string scenario_name, scenario_out;
  std::uint64_t scenario_seed = 7;
  std::optional<double> scenario_scale;
  auto* sc_cmd = app.add_subcommand("scenario", "Run a built-in acceptance scenario");
  sc_cmd->add_option("name", scenario_name, "s1-histogram | s2-hybrid-db")->required();
  sc_cmd->add_option("--seed", scenario_seed, "Seed");
  sc_cmd->add_option("--out", scenario_out, "Also write outputs under this directory");
  sc_cmd->add_option("--scale", scenario_scale, "Corpus desk-scale factor (s2)");

  std::string trace_cfg, trace_out;
  std::optional<std::uint64_t> trace_seed;
  auto* tr_cmd = app.add_subcommand("trace", "Export the synthetic traffic trace of a config");
  tr_cmd->add_option("config", trace_cfg, "Scenario config (YAML)")->required();
  tr_cmd->add_option("--out", trace_out, "Trace CSV path (default: stdout)");
  tr_cmd->add_option("--seed", trace_seed, "Override the scenario seed");

  auto* keys_cmd = app.add_subcommand("config-keys", "Print the scenario config key reference");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*id_cmd) return cmd_identify(trace_path, n, m, model_out);
    if (*sc_cmd) return cmd_scenario(scenario_name, scenario_seed, scenario_out, scenario_scale);
    if (*tr_cmd) return cmd_trace(trace_cfg, trace_out, trace_seed);
    if (*keys_cmd) {
      std::cout << config_reference();
      return 0;
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const RuntimeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
