#include "hcqos/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "hcqos/csv.hpp"
#include "hcqos/errors.hpp"

namespace hcqos {

std::int64_t Histogram::in_range() const {
  std::int64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

Histogram build_histogram(std::span<const double> samples, std::vector<double> edges) {
  if (edges.size() < 2) throw ConfigError("histogram needs at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw ConfigError("histogram edges must increase strictly");
  Histogram h;
  h.edges = std::move(edges);
  h.counts.assign(h.edges.size() - 1, 0);
  const double lo = h.edges.front(), hi = h.edges.back();
  for (double x : samples) {
    if (std::isnan(x) || x < lo) {
      ++h.underflow;
      continue;
    }
    if (x > hi) {
      ++h.overflow;
      continue;
    }
    auto it = std::upper_bound(h.edges.begin(), h.edges.end(), x);
    auto bin = static_cast<std::size_t>(it - h.edges.begin()) - 1;
    if (bin >= h.counts.size()) bin = h.counts.size() - 1;  // x == hi
    ++h.counts[bin];
  }
  return h;
}

std::vector<double> uniform_edges(double lo, double hi, int bins) {
  if (bins < 1 || !(hi > lo)) throw ConfigError("uniform_edges needs bins >= 1 and hi > lo");
  std::vector<double> e(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) e[i] = lo + (hi - lo) * static_cast<double>(i) / bins;
  e.back() = hi;
  return e;
}

double quantile(std::vector<double> samples, double q) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("quantile must lie in [0, 1]");
  std::sort(samples.begin(), samples.end());
  const double pos = q * static_cast<double>(samples.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= samples.size()) return samples.back();
  const double f = pos - static_cast<double>(i);
  return samples[i] + f * (samples[i + 1] - samples[i]);
}

void RunningStats::add(double x) {
  ++n_;
  const double d = x - mean_;
  mean_ += d / static_cast<double>(n_);
  m2_ += d * (x - mean_);
}

double tail_mass(std::span<const double> samples, double threshold) {
  if (samples.empty()) return 0.0;
  std::int64_t above = 0;
  for (double x : samples)
    if (x > threshold) ++above;
  return static_cast<double>(above) / static_cast<double>(samples.size());
}

ModeSummary summarize_mode(const SimMetrics& m, const std::vector<double>& edges,
                           double tail_threshold) {
  ModeSummary s;
  s.mode = std::string(to_string(m.mode));
  const auto u = m.utilization_series();
  s.histogram = build_histogram(u, edges);
  s.drop_fraction = m.drop_fraction();
  RunningStats st;
  for (double x : u) st.add(x);
  s.utilization_mean = st.mean();
  s.utilization_variance = st.variance();
  s.tail_mass = tail_mass(u, tail_threshold);
  for (const auto& lat : m.latencies) {
    s.p95_latency.push_back(quantile(lat, 0.95));
    s.p99_latency.push_back(quantile(lat, 0.99));
  }
  return s;
}

double ComparisonReport::delta_drop_fraction() const {
  return modes.size() == 2 ? modes[1].drop_fraction - modes[0].drop_fraction : 0.0;
}
double ComparisonReport::delta_utilization_variance() const {
  return modes.size() == 2 ? modes[1].utilization_variance - modes[0].utilization_variance : 0.0;
}
double ComparisonReport::delta_tail_mass() const {
  return modes.size() == 2 ? modes[1].tail_mass - modes[0].tail_mass : 0.0;
}
std::vector<double> ComparisonReport::delta_p95() const {
  std::vector<double> d;
  if (modes.size() != 2) return d;
  for (std::size_t i = 0; i < modes[0].p95_latency.size(); ++i)
    d.push_back(modes[1].p95_latency[i] - modes[0].p95_latency[i]);
  return d;
}
double ComparisonReport::reduction(double first, double second) {
  return first == 0.0 ? 0.0 : (first - second) / first;
}

ComparisonReport compare_modes(const SimMetrics& first, const SimMetrics& second,
                               double tail_threshold, const std::vector<double>& edges,
                               const std::string& first_scenario,
                               const std::string& second_scenario) {
  if (first_scenario != second_scenario)
    throw ConfigError("cannot compare runs of different scenarios: " + first_scenario + " vs " +
                      second_scenario);
  if (first.classes != second.classes)
    throw ConfigError("cannot compare runs with different class sets");
  if (first.epochs.size() != second.epochs.size())
    throw ConfigError("cannot compare runs with different epoch counts");
  if (!std::isfinite(tail_threshold)) throw ConfigError("tail threshold must be finite");
  ComparisonReport r;
  r.scenario = first_scenario;
  r.tail_threshold = tail_threshold;
  for (const auto& c : first.classes) r.classes.push_back(c.str());
  r.modes.push_back(summarize_mode(first, edges, tail_threshold));
  r.modes.push_back(summarize_mode(second, edges, tail_threshold));
  return r;
}

namespace {

void row(std::ostream& os, const std::string& mode, std::string_view metric,
         std::string_view cls, double v) {
  os << mode << ',' << metric << ',' << cls << ',' << format_sig9(v) << '\n';
}

}  // namespace

void write_report_csv(std::ostream& os, const ComparisonReport& r) {
  os << "mode,metric,class,value\n";
  if (r.modes.empty()) return;
  row(os, "all", "tail_threshold", "all", r.tail_threshold);
  for (const auto& m : r.modes) {
    row(os, m.mode, "drop_fraction", "all", m.drop_fraction);
    row(os, m.mode, "utilization_mean", "all", m.utilization_mean);
    row(os, m.mode, "utilization_variance", "all", m.utilization_variance);
    row(os, m.mode, "tail_mass", "all", m.tail_mass);
    row(os, m.mode, "hist_underflow", "all", static_cast<double>(m.histogram.underflow));
    row(os, m.mode, "hist_overflow", "all", static_cast<double>(m.histogram.overflow));
    for (std::size_t i = 0; i < r.classes.size() && i < m.p95_latency.size(); ++i) {
      row(os, m.mode, "p95_latency_s", r.classes[i], m.p95_latency[i]);
      row(os, m.mode, "p99_latency_s", r.classes[i], m.p99_latency[i]);
    }
  }
  if (r.modes.size() == 2) {
    row(os, "delta", "drop_fraction", "all", r.delta_drop_fraction());
    row(os, "delta", "utilization_variance", "all", r.delta_utilization_variance());
    row(os, "delta", "tail_mass", "all", r.delta_tail_mass());
    const auto d = r.delta_p95();
    for (std::size_t i = 0; i < r.classes.size() && i < d.size(); ++i)
      row(os, "delta", "p95_latency_s", r.classes[i], d[i]);
  }
}

void write_histogram_csv(std::ostream& os, const ComparisonReport& r) {
  os << "mode,bin_lo,bin_hi,count\n";
  for (const auto& m : r.modes)
    for (std::size_t i = 0; i < m.histogram.counts.size(); ++i)
      os << m.mode << ',' << format_sig9(m.histogram.edges[i]) << ','
         << format_sig9(m.histogram.edges[i + 1]) << ',' << m.histogram.counts[i] << '\n';
}

void write_histogram_svg(std::ostream& os, const ComparisonReport& r) {
  constexpr double W = 640, H = 320, pad = 40;
  static constexpr const char* colors[] = {"#c0504d", "#4f81bd", "#9bbb59", "#8064a2"};
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::int64_t peak = 1;
  for (const auto& m : r.modes)
    for (auto c : m.histogram.counts) peak = std::max(peak, c);
  const double plot_w = W - 2 * pad, plot_h = H - 2 * pad;
  for (std::size_t k = 0; k < r.modes.size(); ++k) {
    const auto& h = r.modes[k].histogram;
    if (h.counts.empty()) continue;
    const double lo = h.edges.front(), span = h.edges.back() - lo;
    const double sub = 1.0 / static_cast<double>(r.modes.size());
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      const double x0 = pad + plot_w * (h.edges[i] - lo) / span;
      const double bw = plot_w * (h.edges[i + 1] - h.edges[i]) / span;
      const double bh = plot_h * static_cast<double>(h.counts[i]) / static_cast<double>(peak);
      os << "<rect x=\"" << format_sig9(x0 + bw * sub * static_cast<double>(k)) << "\" y=\""
         << format_sig9(H - pad - bh) << "\" width=\"" << format_sig9(bw * sub) << "\" height=\""
         << format_sig9(bh) << "\" fill=\"" << colors[k % 4] << "\"/>\n";
    }
    os << "<text x=\"" << pad + 120 * static_cast<double>(k) << "\" y=\"" << pad - 12
       << "\" font-size=\"12\" fill=\"" << colors[k % 4] << "\">" << r.modes[k].mode
       << "</text>\n";
  }
  os << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad << "\" y2=\""
     << H - pad << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 8
     << "\" font-size=\"12\" text-anchor=\"middle\">link utilisation per epoch</text>\n";
  os << "</svg>\n";
}

ComparisonReport read_report(std::istream& report_csv, std::istream& histogram_csv) {
  ComparisonReport r;
  const CsvTable rep = read_csv(report_csv);
  rep.require_header({"mode", "metric", "class", "value"});
  const CsvTable hist = read_csv(histogram_csv);
  hist.require_header({"mode", "bin_lo", "bin_hi", "count"});

  std::map<std::string, std::size_t> index;
  auto mode = [&](const std::string& name) -> ModeSummary& {
    auto it = index.find(name);
    if (it == index.end()) {
      it = index.emplace(name, r.modes.size()).first;
      r.modes.emplace_back();
      r.modes.back().mode = name;
    }
    return r.modes[it->second];
  };
  auto class_slot = [&](const std::string& cls) {
    auto it = std::find(r.classes.begin(), r.classes.end(), cls);
    if (it == r.classes.end()) {
      r.classes.push_back(cls);
      return r.classes.size() - 1;
    }
    return static_cast<std::size_t>(it - r.classes.begin());
  };
  auto put = [](std::vector<double>& v, std::size_t i, double x) {
    if (v.size() <= i) v.resize(i + 1, std::numeric_limits<double>::quiet_NaN());
    v[i] = x;
  };

  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& row = rep.rows[i];
    const std::string ctx = "report.csv row " + std::to_string(i + 2);
    const double v = parse_double(row[3], ctx);
    const std::string& m = row[0];
    const std::string& metric = row[1];
    if (m == "delta") continue;  // derived
    if (m == "all") {
      if (metric == "tail_threshold") r.tail_threshold = v;
      continue;
    }
    ModeSummary& s = mode(m);
    if (metric == "drop_fraction") s.drop_fraction = v;
    else if (metric == "utilization_mean") s.utilization_mean = v;
    else if (metric == "utilization_variance") s.utilization_variance = v;
    else if (metric == "tail_mass") s.tail_mass = v;
    else if (metric == "hist_underflow") s.histogram.underflow = std::llround(v);
    else if (metric == "hist_overflow") s.histogram.overflow = std::llround(v);
    else if (metric == "p95_latency_s") put(s.p95_latency, class_slot(row[2]), v);
    else if (metric == "p99_latency_s") put(s.p99_latency, class_slot(row[2]), v);
    else throw ConfigError(ctx + ": unknown metric '" + metric + "'");
  }
  for (std::size_t i = 0; i < hist.rows.size(); ++i) {
    const auto& row = hist.rows[i];
    const std::string ctx = "hist.csv row " + std::to_string(i + 2);
    ModeSummary& s = mode(row[0]);
    const double lo = parse_double(row[1], ctx), hi = parse_double(row[2], ctx);
    auto& e = s.histogram.edges;
    if (e.empty()) e.push_back(lo);
    else if (e.back() != lo) throw ConfigError(ctx + ": bins are not contiguous");
    e.push_back(hi);
    s.histogram.counts.push_back(parse_int(row[3], ctx));
  }
  return r;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError(path.string(), "cannot create directory: " + ec.message());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(path.string(), "cannot open for writing");
  return os;
}

void export_report(const ComparisonReport& r, const std::filesystem::path& dir) {
  const std::pair<const char*, void (*)(std::ostream&, const ComparisonReport&)> files[] = {
      {"report.csv", write_report_csv},
      {"hist.csv", write_histogram_csv},
      {"hist.svg", write_histogram_svg}};
  for (const auto& [name, writer] : files) {
    auto os = open_output(dir / name);
    writer(os, r);
    os.flush();
    if (!os) throw IoError((dir / name).string(), "write failed");
  }
}

}  // namespace hcqos
