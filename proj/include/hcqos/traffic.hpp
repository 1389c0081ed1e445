#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace hcqos {

enum class Zone { LocalServer, PrivateCloud, NetworkCore, PublicCloud, Internet };
enum class ZoneClass { A, B, C };
enum class AppKind { Web, Database, File, Service };

inline constexpr std::array kAllZones{Zone::LocalServer, Zone::PrivateCloud, Zone::NetworkCore,
                                      Zone::PublicCloud, Zone::Internet};
inline constexpr std::array kAllAppKinds{AppKind::Web, AppKind::Database, AppKind::File,
                                         AppKind::Service};

std::string_view to_string(Zone z);
std::string_view to_string(ZoneClass c);
std::string_view to_string(AppKind k);
Zone parse_zone(std::string_view s);
AppKind parse_app_kind(std::string_view s);

struct FlowEvent {
  std::int64_t id = 0;
  double arrival_time = 0.0;  // seconds
  std::int64_t size = 1;      // bytes
  Zone src = Zone::LocalServer;
  Zone dst = Zone::LocalServer;
  AppKind app = AppKind::Web;

  friend bool operator==(const FlowEvent&, const FlowEvent&) = default;
};

/// Result of the two classification stages. `app_kind` is set iff zone_class is A or B.
struct TrafficClassLabel {
  ZoneClass zone_class = ZoneClass::C;
  std::optional<AppKind> app_kind;

  friend bool operator==(const TrafficClassLabel&, const TrafficClassLabel&) = default;

  /// Position in the fixed queue order A-Database, A-Web, A-File, A-Service,
  /// B-Database, B-Web, B-File, B-Service, C. Used for deterministic tie-breaks.
  int canonical_rank() const;
  std::string str() const;
  static TrafficClassLabel parse(std::string_view s);
};

/// All nine labels in canonical order.
const std::vector<TrafficClassLabel>& all_class_labels();

/// Stage 1: endpoint zones to A (local/private/core only), B (touches the public
/// cloud) or C (everything else).
ZoneClass classify_stage1(const FlowEvent& flow);

/// Stage 2: A and B are split by application kind; C stays whole.
TrafficClassLabel classify_stage2(const FlowEvent& flow, ZoneClass stage1);

inline TrafficClassLabel classify(const FlowEvent& flow) {
  return classify_stage2(flow, classify_stage1(flow));
}

/// Representative endpoints used when synthesising a flow of a given label.
std::pair<Zone, Zone> endpoints_for(const TrafficClassLabel& label);

// --- synthetic traffic -----------------------------------------------------

struct SizeDistribution {
  enum class Family { Fixed, Uniform, Exponential, LogNormal };
  Family family = Family::Fixed;
  // Fixed: a = bytes. Uniform: [a, b]. Exponential: a = mean.
  // LogNormal: a = median bytes, b = sigma of ln(size).
  double a = 1500.0;
  double b = 0.0;

  static SizeDistribution fixed(double bytes) { return {Family::Fixed, bytes, 0.0}; }
  static SizeDistribution uniform(double lo, double hi) { return {Family::Uniform, lo, hi}; }
  static SizeDistribution exponential(double mean) { return {Family::Exponential, mean, 0.0}; }
  static SizeDistribution lognormal(double median, double sigma) {
    return {Family::LogNormal, median, sigma};
  }
  double mean() const;
};

std::string_view to_string(SizeDistribution::Family f);
SizeDistribution::Family parse_size_family(std::string_view s);

struct OnOff {
  double mean_burst = 1.0;  // seconds
  double mean_idle = 1.0;   // seconds
};

struct ProfileEntry {
  TrafficClassLabel label;
  double rate = 1.0;  // long-run mean flows/second
  SizeDistribution size;
  std::optional<OnOff> on_off;  // absent: plain Poisson
};

struct TrafficProfile {
  std::vector<ProfileEntry> entries;

  /// Throws ConfigError on non-positive parameters or duplicate labels.
  void validate() const;
  /// Long-run offered load in bytes/second.
  double mean_offered_bytes_per_second() const;
};

/// Deterministic generator: mt19937_64 (bit-exact by the standard) with
/// hand-written transforms so traces do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double exponential(double mean);
  double normal();

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// On/off-modulated Poisson arrivals per profile entry, merged and sorted by
/// arrival time (ties by entry order), ids assigned 1.. in trace order.
std::vector<FlowEvent> generate_trace(const TrafficProfile& profile, double duration,
                                      std::uint64_t seed);

void write_trace_csv(std::ostream& os, const std::vector<FlowEvent>& trace);
std::vector<FlowEvent> read_trace_csv(std::istream& is);

}  // namespace hcqos
