#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hcqos/config.hpp"
#include "hcqos/hybrid_db.hpp"
#include "hcqos/metrics.hpp"
#include "hcqos/netsim.hpp"

namespace hcqos {

/// Run id used for output directories: "<name>-seed<N>".
std::string run_id(const ScenarioConfig& cfg);
/// `cfg.output`, unless HCQOS_OUT is set in the environment.
std::filesystem::path output_root(const ScenarioConfig& cfg);

CostWeights build_weights(const ScenarioConfig& cfg);
ControlBounds build_bounds(const ScenarioConfig& cfg);

struct ModeRun {
  FeedbackMode mode = FeedbackMode::Open;
  SimMetrics metrics;
  std::optional<ExperimentResult> workload;
};

struct ScenarioRun {
  std::string id;
  std::vector<FlowEvent> trace;
  std::optional<ControllerSpec> controller;
  std::optional<Identification> identification;  // identify-from-warmup only
  std::vector<ModeRun> runs;                     // in the order of cfg.modes
  std::optional<ComparisonReport> report;        // when both modes ran

  const ModeRun* find(FeedbackMode m) const;
};

/// Builds the closed-loop controller. For identify-from-warmup this runs a
/// randomly excited warm-up simulation and fits (A, B) to its trajectory.
ControllerSpec build_controller(const ScenarioConfig& cfg,
                                std::optional<Identification>* identification = nullptr);

ScenarioRun run_scenario(const ScenarioConfig& cfg);

/// Writes <dir>/{open,closed}/epochs.csv, report.csv, hist.csv, hist.svg and,
/// when present, model.csv and <mode>/queries.csv. Throws IoError.
void write_run(const ScenarioRun& run, const std::filesystem::path& dir);

/// Model CSV: "# A n x n" block, "# B n x m" block, then "# residual_norm v".
void write_model_csv(std::ostream& os, const StateSpaceModel& model,
                     std::optional<double> residual_norm = {});
/// Reads (x, u) rows with header x0..x{n-1},u0..u{m-1}.
Trajectory read_state_trace_csv(std::istream& is, int n, int m);
void write_state_trace_csv(std::ostream& os, const Trajectory& t);

// --- built-in acceptance scenarios -----------------------------------------

/// Two-class bursty overload: ON-period offered load 1.3x capacity.
ScenarioConfig s1_config(std::uint64_t seed = 7);

struct S1Outcome {
  ScenarioRun run;
  double drop_reduction = 0.0;
  double variance_reduction = 0.0;
  double tail_reduction = 0.0;
  double peak_offered = 0.0;  // ON-period offered load / capacity
  double mean_offered = 0.0;
  double seconds = 0.0;

  bool drop_ok() const { return drop_reduction >= 0.20; }
  bool variance_ok() const { return variance_reduction >= 0.20; }
  bool tail_ok() const { return tail_reduction >= 0.30; }
  bool runtime_ok() const { return seconds < 60.0; }
  bool pass() const { return drop_ok() && variance_ok() && tail_ok() && runtime_ok(); }
};

S1Outcome run_s1(std::uint64_t seed = 7);

struct S2Case {
  std::string name;
  double local_bytes_per_s = 0.0;
  ExperimentResult result;
};

struct S2Outcome {
  std::int64_t articles = 0;
  std::int64_t body_bytes = 0;
  int queries = 0;
  S2Case congested;
  std::vector<S2Case> idle;  // slow local store sweep
  bool identical_sets = false;
  double seconds = 0.0;

  bool congested_ok() const;
  /// Index of the first idle case with hybrid p50 < local p50, or -1.
  int idle_winner() const;
  bool runtime_ok() const { return seconds < 120.0; }
  bool pass() const;
};

S2Outcome run_s2(std::uint64_t seed = 7, double scale = 0.001);
void write_s2(const S2Outcome& s2, const std::filesystem::path& dir);

/// Human-readable summaries with PASS/FAIL per threshold.
void print_s1(std::ostream& os, const S1Outcome& s1);
void print_s2(std::ostream& os, const S2Outcome& s2);

}  // namespace hcqos
