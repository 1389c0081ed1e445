#include "hcqos/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "hcqos/csv.hpp"
#include "hcqos/errors.hpp"

namespace hcqos {

std::string_view to_string(Zone z) {
  switch (z) {
    case Zone::LocalServer: return "LocalServer";
    case Zone::PrivateCloud: return "PrivateCloud";
    case Zone::NetworkCore: return "NetworkCore";
    case Zone::PublicCloud: return "PublicCloud";
    case Zone::Internet: return "Internet";
  }
  return "?";
}

std::string_view to_string(ZoneClass c) {
  switch (c) {
    case ZoneClass::A: return "A";
    case ZoneClass::B: return "B";
    case ZoneClass::C: return "C";
  }
  return "?";
}

std::string_view to_string(AppKind k) {
  switch (k) {
    case AppKind::Web: return "Web";
    case AppKind::Database: return "Database";
    case AppKind::File: return "File";
    case AppKind::Service: return "Service";
  }
  return "?";
}

Zone parse_zone(std::string_view s) {
  for (Zone z : kAllZones)
    if (to_string(z) == s) return z;
  throw ConfigError("unknown zone '" + std::string(s) + "'");
}

AppKind parse_app_kind(std::string_view s) {
  for (AppKind k : kAllAppKinds)
    if (to_string(k) == s) return k;
  throw ConfigError("unknown application kind '" + std::string(s) + "'");
}

int TrafficClassLabel::canonical_rank() const {
  if (zone_class == ZoneClass::C || !app_kind) return 8;
  int kind = 0;
  switch (*app_kind) {
    case AppKind::Database: kind = 0; break;
    case AppKind::Web: kind = 1; break;
    case AppKind::File: kind = 2; break;
    case AppKind::Service: kind = 3; break;
  }
  return (zone_class == ZoneClass::A ? 0 : 4) + kind;
}

std::string TrafficClassLabel::str() const {
  std::string s(to_string(zone_class));
  if (app_kind) {
    s += '-';
    s += to_string(*app_kind);
  }
  return s;
}

TrafficClassLabel TrafficClassLabel::parse(std::string_view s) {
  if (s == "C") return {ZoneClass::C, std::nullopt};
  if (s.size() > 2 && s[1] == '-' && (s[0] == 'A' || s[0] == 'B')) {
    return {s[0] == 'A' ? ZoneClass::A : ZoneClass::B, parse_app_kind(s.substr(2))};
  }
  throw ConfigError("unknown traffic class '" + std::string(s) +
                    "' (expected C or A-/B- followed by Web|Database|File|Service)");
}

const std::vector<TrafficClassLabel>& all_class_labels() {
  static const std::vector<TrafficClassLabel> labels = [] {
    std::vector<TrafficClassLabel> v;
    for (ZoneClass zc : {ZoneClass::A, ZoneClass::B})
      for (AppKind k : {AppKind::Database, AppKind::Web, AppKind::File, AppKind::Service})
        v.push_back({zc, k});
    v.push_back({ZoneClass::C, std::nullopt});
    return v;
  }();
  return labels;
}

namespace {

bool inside_private_side(Zone z) {
  return z == Zone::LocalServer || z == Zone::PrivateCloud || z == Zone::NetworkCore;
}

}  // namespace

ZoneClass classify_stage1(const FlowEvent& flow) {
  if (inside_private_side(flow.src) && inside_private_side(flow.dst)) return ZoneClass::A;
  if (flow.src == Zone::PublicCloud || flow.dst == Zone::PublicCloud) return ZoneClass::B;
  return ZoneClass::C;
}

TrafficClassLabel classify_stage2(const FlowEvent& flow, ZoneClass stage1) {
  if (stage1 == ZoneClass::C) return {ZoneClass::C, std::nullopt};
  return {stage1, flow.app};
}

std::pair<Zone, Zone> endpoints_for(const TrafficClassLabel& label) {
  switch (label.zone_class) {
    case ZoneClass::A: return {Zone::PrivateCloud, Zone::LocalServer};
    case ZoneClass::B: return {Zone::PublicCloud, Zone::LocalServer};
    case ZoneClass::C: return {Zone::Internet, Zone::LocalServer};
  }
  return {Zone::Internet, Zone::Internet};
}

// --- sizes and profiles ----------------------------------------------------

double SizeDistribution::mean() const {
  switch (family) {
    case Family::Fixed: return a;
    case Family::Uniform: return 0.5 * (a + b);
    case Family::Exponential: return a;
    case Family::LogNormal: return a * std::exp(0.5 * b * b);
  }
  return a;
}

std::string_view to_string(SizeDistribution::Family f) {
  switch (f) {
    case SizeDistribution::Family::Fixed: return "fixed";
    case SizeDistribution::Family::Uniform: return "uniform";
    case SizeDistribution::Family::Exponential: return "exponential";
    case SizeDistribution::Family::LogNormal: return "lognormal";
  }
  return "?";
}

SizeDistribution::Family parse_size_family(std::string_view s) {
  using F = SizeDistribution::Family;
  for (F f : {F::Fixed, F::Uniform, F::Exponential, F::LogNormal})
    if (to_string(f) == s) return f;
  throw ConfigError("unknown size distribution '" + std::string(s) +
                    "' (expected fixed|uniform|exponential|lognormal)");
}

void TrafficProfile::validate() const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const std::string where = "traffic[" + std::to_string(i) + "] (" + e.label.str() + ")";
    if (!(e.rate > 0.0) || !std::isfinite(e.rate)) throw ConfigError(where + ": rate must be > 0");
    const auto& s = e.size;
    if (!(s.a > 0.0) || !std::isfinite(s.a))
      throw ConfigError(where + ": size parameter must be > 0");
    if (s.family == SizeDistribution::Family::Uniform && !(s.b >= s.a))
      throw ConfigError(where + ": uniform size needs hi >= lo");
    if (s.family == SizeDistribution::Family::LogNormal && !(s.b > 0.0))
      throw ConfigError(where + ": lognormal sigma must be > 0");
    if (e.on_off && (!(e.on_off->mean_burst > 0.0) || !(e.on_off->mean_idle > 0.0)))
      throw ConfigError(where + ": burst and idle durations must be > 0");
    for (std::size_t j = 0; j < i; ++j)
      if (entries[j].label == e.label) throw ConfigError(where + ": duplicate traffic class");
  }
}

double TrafficProfile::mean_offered_bytes_per_second() const {
  double total = 0.0;
  for (const auto& e : entries) total += e.rate * e.size.mean();
  return total;
}

// --- random numbers --------------------------------------------------------

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(engine_());
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return lo + static_cast<std::int64_t>(r % span);
}

double Rng::exponential(double mean) { return -mean * std::log1p(-uniform()); }

double Rng::normal() {
  if (spare_normal_) {
    double v = *spare_normal_;
    spare_normal_.reset();
    return v;
  }
  double u1 = uniform();
  while (u1 == 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_normal_ = r * std::sin(2.0 * std::numbers::pi * u2);
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finaliser over (seed, stream)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

std::int64_t draw_size(Rng& rng, const SizeDistribution& d) {
  double v = d.a;
  switch (d.family) {
    case SizeDistribution::Family::Fixed: v = d.a; break;
    case SizeDistribution::Family::Uniform: v = rng.uniform(d.a, d.b); break;
    case SizeDistribution::Family::Exponential: v = rng.exponential(d.a); break;
    case SizeDistribution::Family::LogNormal: v = d.a * std::exp(d.b * rng.normal()); break;
  }
  return std::max<std::int64_t>(1, std::llround(v));
}

struct Tagged {
  FlowEvent flow;
  std::size_t entry;
};

void generate_entry(const ProfileEntry& e, std::size_t index, double duration,
                    std::uint64_t seed, std::vector<Tagged>& out) {
  Rng rng(mix_seed(seed, index));
  const auto [src, dst] = endpoints_for(e.label);
  const AppKind app = e.label.app_kind.value_or(AppKind::Web);
  auto emit = [&](double t) {
    FlowEvent f;
    f.arrival_time = t;
    f.size = draw_size(rng, e.size);
    f.src = src;
    f.dst = dst;
    f.app = app;
    out.push_back({f, index});
  };

  if (!e.on_off) {
    for (double t = rng.exponential(1.0 / e.rate); t < duration;
         t += rng.exponential(1.0 / e.rate))
      emit(t);
    return;
  }

  // The on-period rate is scaled so the long-run mean equals e.rate.
  const auto& oo = *e.on_off;
  const double duty = oo.mean_burst / (oo.mean_burst + oo.mean_idle);
  const double on_rate = e.rate / duty;
  bool on = rng.uniform() < duty;
  double t = 0.0;
  while (t < duration) {
    const double period_end = t + rng.exponential(on ? oo.mean_burst : oo.mean_idle);
    if (on) {
      // Memorylessness lets each on-period restart the arrival clock.
      for (double a = t + rng.exponential(1.0 / on_rate); a < period_end && a < duration;
           a += rng.exponential(1.0 / on_rate))
        emit(a);
    }
    t = period_end;
    on = !on;
  }
}

}  // namespace

std::vector<FlowEvent> generate_trace(const TrafficProfile& profile, double duration,
                                      std::uint64_t seed) {
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw ConfigError("trace duration must be > 0");
  profile.validate();

  std::vector<Tagged> all;
  for (std::size_t i = 0; i < profile.entries.size(); ++i)
    generate_entry(profile.entries[i], i, duration, seed, all);

  std::stable_sort(all.begin(), all.end(), [](const Tagged& x, const Tagged& y) {
    if (x.flow.arrival_time != y.flow.arrival_time)
      return x.flow.arrival_time < y.flow.arrival_time;
    return x.entry < y.entry;
  });

  std::vector<FlowEvent> trace;
  trace.reserve(all.size());
  std::int64_t id = 1;
  for (auto& t : all) {
    t.flow.id = id++;
    trace.push_back(t.flow);
  }
  return trace;
}

void write_trace_csv(std::ostream& os, const std::vector<FlowEvent>& trace) {
  os << "id,arrival_time,size,src,dst,app\n";
  for (const auto& f : trace) {
    os << f.id << ',' << format_exact(f.arrival_time) << ',' << f.size << ','
       << to_string(f.src) << ',' << to_string(f.dst) << ',' << to_string(f.app) << '\n';
  }
}

std::vector<FlowEvent> read_trace_csv(std::istream& is) {
  CsvTable table = read_csv(is);
  table.require_header({"id", "arrival_time", "size", "src", "dst", "app"});
  std::vector<FlowEvent> trace;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    FlowEvent f;
    f.id = parse_int(row[0], "trace row " + std::to_string(r + 1) + " id");
    f.arrival_time = parse_double(row[1], "trace row " + std::to_string(r + 1) + " arrival_time");
    f.size = parse_int(row[2], "trace row " + std::to_string(r + 1) + " size");
    f.src = parse_zone(row[3]);
    f.dst = parse_zone(row[4]);
    f.app = parse_app_kind(row[5]);
    trace.push_back(f);
  }
  return trace;
}

}  // namespace hcqos
