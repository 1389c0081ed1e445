#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hcqos/control.hpp"
#include "hcqos/hybrid_db.hpp"
#include "hcqos/netsim.hpp"
#include "hcqos/traffic.hpp"

namespace hcqos {

enum class ModelSource { Explicit, Structural, IdentifyFromWarmup };

struct ControllerConfig {
  ModelSource source = ModelSource::Structural;
  Matrix A;  // Explicit
  Matrix B;
  double drain_per_share = 0.0;  // Structural; 0 derives epoch_bytes / queue_bytes
  double coupling = 0.0;
  std::int64_t warmup_epochs = 200;  // IdentifyFromWarmup
  std::optional<Vector> u_lo;  // default 0
  std::optional<Vector> u_hi;  // default 1
  Vector q_diag;  // empty: all ones
  Vector r_diag;  // empty: 0.01
  Matrix Q;       // full weights; override the diagonals when set
  Matrix R;
  Vector x_ref;   // empty: zeros
  int horizon = 3;
  int grid = 11;
  KernelPolicy kernel = KernelPolicy::Parallel;
  std::int64_t feedback_message_bytes = 0;
};

struct ReportConfig {
  double tail_threshold = 0.95;
  int bins = 20;
  double lo = 0.0;
  double hi = 1.0;

  std::vector<double> edges() const;
};

/// Optional query mix run against the scenario's link (both protocols).
struct WorkloadConfig {
  double scale = 0.001;
  std::int64_t metadata_bytes = 2048;
  std::int64_t author_count = 0;
  int queries = 100;
  double first_start = 0.0;
  double spacing = 1.0;
  BackendLatency backends;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  std::int64_t epochs = 100;
  std::vector<FeedbackMode> modes{FeedbackMode::Open, FeedbackMode::Closed};
  std::filesystem::path output = "runs";
  LinkSpec link;
  TrafficProfile traffic;
  ControllerConfig controller;
  ReportConfig report;
  std::optional<WorkloadConfig> workload;

  /// Cross-field checks. Throws ConfigError naming the field.
  void validate() const;
  bool runs(FeedbackMode m) const;
};

/// Strict YAML parsing: unknown keys and malformed values are rejected with
/// the source name, line and field path in the message.
ScenarioConfig parse_config(const std::string& text, const std::string& source = "<config>");
/// Throws IoError if the file cannot be read.
ScenarioConfig load_config(const std::filesystem::path& path);

/// Documented key list, printed by the CLI.
std::string config_reference();

}  // namespace hcqos
