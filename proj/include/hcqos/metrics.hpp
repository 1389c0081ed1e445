#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hcqos/netsim.hpp"

namespace hcqos {

/// Bins are half-open [e_i, e_{i+1}) except the last, which is closed.
struct Histogram {
  std::vector<double> edges;
  std::vector<std::int64_t> counts;
  std::int64_t underflow = 0;
  std::int64_t overflow = 0;

  std::int64_t in_range() const;
  std::int64_t total() const { return in_range() + underflow + overflow; }
  friend bool operator==(const Histogram&, const Histogram&) = default;
};

Histogram build_histogram(std::span<const double> samples, std::vector<double> edges);
std::vector<double> uniform_edges(double lo, double hi, int bins);

/// Linear interpolation between order statistics; NaN for no samples.
double quantile(std::vector<double> samples, double q);

/// Welford streaming mean/variance (population variance).
class RunningStats {
 public:
  void add(double x);
  std::int64_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 0 ? m2_ / static_cast<double>(n_) : 0.0; }

 private:
  std::int64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Fraction of samples strictly above `threshold`.
double tail_mass(std::span<const double> samples, double threshold);

struct ModeSummary {
  std::string mode;
  Histogram histogram;
  double drop_fraction = 0.0;
  double utilization_mean = 0.0;
  double utilization_variance = 0.0;
  double tail_mass = 0.0;
  std::vector<double> p95_latency;  // per class
  std::vector<double> p99_latency;
};

ModeSummary summarize_mode(const SimMetrics& metrics, const std::vector<double>& edges,
                           double tail_threshold);

struct ComparisonReport {
  std::string scenario;
  double tail_threshold = 0.95;
  std::vector<std::string> classes;
  /// Empty, or {first, second} as passed to compare_modes.
  std::vector<ModeSummary> modes;

  // second minus first
  double delta_drop_fraction() const;
  double delta_utilization_variance() const;
  double delta_tail_mass() const;
  std::vector<double> delta_p95() const;
  /// Relative reduction (first - second) / first; 0 when first is 0.
  static double reduction(double first, double second);
};

/// Deltas are reported as second minus first, so swapping the arguments
/// negates them. Throws ConfigError when the runs are not comparable.
ComparisonReport compare_modes(const SimMetrics& first, const SimMetrics& second,
                               double tail_threshold, const std::vector<double>& edges,
                               const std::string& first_scenario,
                               const std::string& second_scenario);

/// report.csv (mode,metric,class,value) and hist.csv (mode,bin_lo,bin_hi,count).
void write_report_csv(std::ostream& os, const ComparisonReport& r);
void write_histogram_csv(std::ostream& os, const ComparisonReport& r);
void write_histogram_svg(std::ostream& os, const ComparisonReport& r);
ComparisonReport read_report(std::istream& report_csv, std::istream& histogram_csv);

/// Writes report.csv, hist.csv and hist.svg under `dir`. Throws IoError.
void export_report(const ComparisonReport& r, const std::filesystem::path& dir);

/// Opens `path` for writing, creating parent directories; throws IoError.
std::ofstream open_output(const std::filesystem::path& path);

}  // namespace hcqos
