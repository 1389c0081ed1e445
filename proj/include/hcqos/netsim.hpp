#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "hcqos/control.hpp"
#include "hcqos/traffic.hpp"

namespace hcqos {

enum class FeedbackMode { Open, Closed };

std::string_view to_string(FeedbackMode m);

/// Bottleneck link between the private side and the public cloud / Internet.
struct LinkSpec {
  double capacity_bps = 10e6;
  std::int64_t queue_bytes = 1 << 20;  // per class queue (the single FIFO in Open mode)
  double propagation_delay = 0.0;      // seconds
  double epoch = 1.0;                  // control epoch, seconds
  /// Queue set, in canonical class order. Every flow must map to one of these.
  std::vector<TrafficClassLabel> classes = all_class_labels();

  void validate() const;
  /// -1 when the label has no queue.
  int class_index(const TrafficClassLabel& label) const;
  int class_count() const { return static_cast<int>(classes.size()); }
  double bytes_per_second() const { return capacity_bps / 8.0; }
  /// Whole bytes the link can move in one epoch.
  std::int64_t epoch_bytes() const;
};

enum class ControlPolicy {
  Optimal,          // allocate_control every epoch
  RandomExcitation  // seeded random feasible grid point; used to identify a model
};

struct ControllerSpec {
  StateSpaceModel model;
  CostWeights weights;
  int horizon = 3;
  int grid = 11;
  KernelPolicy kernel = KernelPolicy::Parallel;
  ControlPolicy policy = ControlPolicy::Optimal;
  /// Size of the feedback message injected as A-Service traffic every epoch.
  std::int64_t feedback_message_bytes = 0;
};

struct SimOptions {
  FeedbackMode mode = FeedbackMode::Open;
  std::int64_t epochs = 1;  // run horizon
  std::optional<ControllerSpec> controller;  // required for Closed
  std::uint64_t seed = 1;
#ifdef NDEBUG
  bool check_every_event = false;
#else
  bool check_every_event = true;
#endif
  /// Optional event log; columns: tick,time,kind,queue,flow_id,bytes
  std::ostream* event_log = nullptr;
};

struct ClassCounters {
  std::int64_t arrived = 0;
  std::int64_t delivered = 0;
  std::int64_t dropped = 0;
  std::int64_t queued = 0;

  bool conserved() const { return arrived == delivered + dropped + queued; }
  friend bool operator==(const ClassCounters&, const ClassCounters&) = default;
};

struct EpochClassRecord {
  std::int64_t arrived = 0;    // during the epoch
  std::int64_t delivered = 0;  // during the epoch
  std::int64_t dropped = 0;    // during the epoch
  std::int64_t queued = 0;     // at epoch end
  double share = 1.0;
  int priority_rank = 0;
  double utilization = 0.0;    // delivered / epoch_bytes
};

struct EpochRecord {
  std::int64_t epoch = 0;
  std::vector<EpochClassRecord> classes;
  double utilization = 0.0;          // link total, delivered
  double offered_utilization = 0.0;  // arrived bytes / epoch_bytes
  Vector state;                      // x observed at the start of the epoch (Closed)
  Vector control;                    // u applied during the epoch (Closed)
};

struct SimMetrics {
  FeedbackMode mode = FeedbackMode::Open;
  std::vector<TrafficClassLabel> classes;
  std::int64_t epoch_bytes = 0;
  double epoch_seconds = 0.0;
  std::vector<ClassCounters> totals;
  std::vector<EpochRecord> epochs;
  std::vector<std::vector<double>> latencies;  // per class, seconds, delivered flows
  std::int64_t feedback_injected = 0;
  std::int64_t feedback_delivered = 0;
  std::int64_t feedback_dropped = 0;
  std::int64_t max_flow_size = 0;
  std::int64_t capacity_violations = 0;
  std::int64_t state_violations = 0;  // epochs whose observed x was outside X

  ClassCounters aggregate() const;
  double drop_fraction() const;
  std::int64_t goodput_bytes() const { return aggregate().delivered - feedback_delivered; }
  std::vector<double> utilization_series() const;
  /// (x_t, u_t) per epoch, for identification.
  Trajectory trajectory() const;
};

/// Observation at an epoch boundary: backlog fractions then utilisations.
Vector observe_state(const std::vector<ClassCounters>& q, const LinkSpec& link,
                     const std::vector<std::int64_t>& last_epoch_delivered);

/// Per-epoch scheduler settings derived from a ControlDecision.
struct SchedulerConfig {
  std::vector<std::int64_t> caps;  // bytes per class for the coming epoch
  std::vector<int> order;          // dequeue precedence, highest first
};

/// Throws ConfigError if d.u is outside U or the order is not a permutation.
SchedulerConfig apply_decision(const ControlDecision& d, const ControlBounds& U,
                               const LinkSpec& link);

/// Single-threaded discrete-event simulation of the bottleneck link.
///
/// Time is an integer tick clock: one byte occupies the link for
/// `ticks_per_byte` ticks, chosen so a tick is at most 10 ps. Flows are
/// fluid and preemptible between bytes. A byte counts as delivered (and
/// against its class cap) in the epoch in which its transmission starts.
/// Same-tick events run in the order EpochBoundary, ServiceCompletion,
/// FlowArrival, QueryStep, then insertion order.
class Simulator {
 public:
  /// Called with the delivery time (last byte plus propagation) or the drop
  /// time; `dropped` tells which.
  using FlowCallback = std::function<void(Simulator&, double time, bool dropped)>;
  using Action = std::function<void(Simulator&)>;

  Simulator(LinkSpec link, SimOptions options);
  ~Simulator();
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  /// Schedules trace arrivals. The trace must be sorted by arrival time.
  void add_trace(const std::vector<FlowEvent>& trace);
  /// Offers a flow at the current time.
  void inject(const FlowEvent& flow, FlowCallback cb);
  /// Runs `action` at `time` (seconds) as a QueryStep event.
  void at(double time, Action action);

  double now() const;
  const LinkSpec& link() const { return link_; }
  double seconds(std::int64_t tick) const;
  std::int64_t to_tick(double seconds) const;
  /// Serialisation plus propagation time of `bytes` on an idle link.
  double ideal_transit(std::int64_t bytes) const;
  /// Ends the run at the close of the current epoch.
  void stop_at_epoch_end();

  SimMetrics run();

 private:
  struct Impl;
  LinkSpec link_;
  std::unique_ptr<Impl> impl_;
};

SimMetrics run_simulation(const std::vector<FlowEvent>& trace, const LinkSpec& link,
                          const SimOptions& options);

/// Wire size of feedback traffic over a run: zero in Open mode.
std::int64_t feedback_overhead(FeedbackMode mode, std::int64_t message_bytes,
                               std::int64_t epochs);

void write_epoch_csv(std::ostream& os, const SimMetrics& metrics);

}  // namespace hcqos
