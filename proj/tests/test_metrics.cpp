#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "hcqos/csv.hpp"
#include "hcqos/errors.hpp"
#include "hcqos/metrics.hpp"

using namespace hcqos;

namespace {

SimMetrics fake(FeedbackMode mode, std::vector<double> util, std::int64_t dropped,
                std::int64_t arrived) {
  SimMetrics m;
  m.mode = mode;
  m.classes = {TrafficClassLabel{ZoneClass::A, AppKind::Database},
               TrafficClassLabel{ZoneClass::C, std::nullopt}};
  m.epoch_bytes = 1000;
  m.epoch_seconds = 1.0;
  m.totals.resize(2);
  m.totals[0].arrived = arrived;
  m.totals[0].dropped = dropped;
  m.totals[0].delivered = arrived - dropped;
  m.latencies = {{0.1, 0.2, 0.3, 0.4}, {1.0, 2.0}};
  for (std::size_t e = 0; e < util.size(); ++e) {
    EpochRecord r;
    r.epoch = static_cast<std::int64_t>(e);
    r.classes.resize(2);
    r.utilization = util[e];
    m.epochs.push_back(r);
  }
  return m;
}

double two_pass_variance(const std::vector<double>& v) {
  double mean = 0;
  for (double x : v) mean += x;
  mean /= v.size();
  double s = 0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / v.size();
}

}  // namespace

TEST(Histogram, HandCount) {
  const std::vector<double> s{0.1, 0.5, 0.9};
  const auto h = build_histogram(s, {0, 0.5, 1.0});
  EXPECT_EQ(h.counts, (std::vector<std::int64_t>{1, 2}));
  const std::vector<double> edge{1.0, 0.0, -0.1, 1.5};
  const auto g = build_histogram(edge, {0, 0.5, 1.0});
  EXPECT_EQ(g.counts, (std::vector<std::int64_t>{1, 1}));
  EXPECT_EQ(g.underflow, 1);
  EXPECT_EQ(g.overflow, 1);
}

TEST(Histogram, EmptyAndBadEdges) {
  const auto h = build_histogram(std::vector<double>{}, uniform_edges(0, 1, 4));
  EXPECT_EQ(h.counts, std::vector<std::int64_t>(4, 0));
  EXPECT_THROW(build_histogram(std::vector<double>{}, {0.0, 0.5, 0.5}), ConfigError);
  EXPECT_THROW(build_histogram(std::vector<double>{}, {1.0, 0.0}), ConfigError);
  EXPECT_THROW(build_histogram(std::vector<double>{}, {0.0}), ConfigError);
}

TEST(Histogram, UniformWithinBinomialBound) {
  Rng rng(2024);
  std::vector<double> s(100000);
  for (auto& x : s) x = rng.uniform();
  const auto h = build_histogram(s, uniform_edges(0, 1, 10));
  const double sigma = std::sqrt(1e5 * 0.1 * 0.9);
  for (auto c : h.counts) EXPECT_LT(std::abs(c - 1e4), 4 * sigma);
  EXPECT_EQ(h.total(), 100000);
}

TEST(Histogram, TotalsAlwaysAddUp) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(rng.uniform_int(0, 300));
    for (auto& x : s) x = rng.uniform(-0.5, 1.5);
    if (!s.empty() && trial % 5 == 0) s[0] = std::numeric_limits<double>::quiet_NaN();
    const auto h = build_histogram(s, uniform_edges(0, 1, static_cast<int>(rng.uniform_int(1, 30))));
    EXPECT_EQ(h.total(), static_cast<std::int64_t>(s.size()));
  }
}

TEST(Stats, StreamingMatchesTwoPass) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(1000);
    const double offset = rng.uniform(0, 1000);
    for (auto& x : v) x = offset + rng.normal();
    RunningStats rs;
    for (double x : v) rs.add(x);
    const double ref = two_pass_variance(v);
    EXPECT_LE(std::abs(rs.variance() - ref), 1e-9 * ref);
  }
}

TEST(Stats, QuantileAndTail) {
  EXPECT_TRUE(std::isnan(quantile({}, 0.5)));
  EXPECT_DOUBLE_EQ(quantile({3, 1, 2}, 0.5), 2.0);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 1.0), 4.0);
  EXPECT_THROW(quantile({1}, 1.5), ConfigError);
  const std::vector<double> s{0.9, 0.95, 0.96, 1.0};
  EXPECT_DOUBLE_EQ(tail_mass(s, 0.95), 0.5);
}

TEST(Compare, IdenticalRunsHaveZeroDeltas) {
  const auto a = fake(FeedbackMode::Open, {0.2, 0.97, 0.5}, 10, 100);
  const auto r = compare_modes(a, a, 0.95, uniform_edges(0, 1, 20), "s", "s");
  EXPECT_EQ(r.delta_drop_fraction(), 0.0);
  EXPECT_EQ(r.delta_utilization_variance(), 0.0);
  EXPECT_EQ(r.delta_tail_mass(), 0.0);
  for (double d : r.delta_p95()) EXPECT_EQ(d, 0.0);
}

TEST(Compare, DeltasAreAntisymmetric) {
  const auto a = fake(FeedbackMode::Open, {0.2, 0.97, 0.99, 0.1}, 30, 100);
  const auto b = fake(FeedbackMode::Closed, {0.6, 0.7, 0.96, 0.5}, 10, 100);
  const auto e = uniform_edges(0, 1, 20);
  const auto ab = compare_modes(a, b, 0.95, e, "s", "s");
  const auto ba = compare_modes(b, a, 0.95, e, "s", "s");
  EXPECT_EQ(ab.delta_drop_fraction(), -ba.delta_drop_fraction());
  EXPECT_EQ(ab.delta_utilization_variance(), -ba.delta_utilization_variance());
  EXPECT_EQ(ab.delta_tail_mass(), -ba.delta_tail_mass());
  EXPECT_DOUBLE_EQ(ab.delta_drop_fraction(), 0.1 - 0.3);
  EXPECT_DOUBLE_EQ(ab.delta_tail_mass(), 0.25 - 0.5);
  EXPECT_DOUBLE_EQ(ComparisonReport::reduction(0.3, 0.1), 2.0 / 3.0);
  EXPECT_EQ(ComparisonReport::reduction(0.0, 0.1), 0.0);
  EXPECT_NEAR(ab.modes[0].utilization_variance,
              two_pass_variance({0.2, 0.97, 0.99, 0.1}), 1e-12);
}

TEST(Compare, MismatchedRunsRejected) {
  const auto a = fake(FeedbackMode::Open, {0.2}, 0, 10);
  auto b = fake(FeedbackMode::Closed, {0.2}, 0, 10);
  const auto e = uniform_edges(0, 1, 5);
  EXPECT_THROW(compare_modes(a, b, 0.95, e, "s1", "s2"), ConfigError);
  b.classes.pop_back();
  EXPECT_THROW(compare_modes(a, b, 0.95, e, "s", "s"), ConfigError);
}

TEST(Export, EmptyReportHeaderOnly) {
  ComparisonReport r;
  std::stringstream ss;
  write_report_csv(ss, r);
  EXPECT_EQ(ss.str(), "mode,metric,class,value\n");
}

TEST(Export, RoundTripAndByteIdentical) {
  const auto a = fake(FeedbackMode::Open, {0.123456789123, 0.97, 0.99, 0.1}, 30, 100);
  const auto b = fake(FeedbackMode::Closed, {0.6, 0.7, 0.96, 0.5}, 7, 100);
  const auto r = compare_modes(a, b, 0.95, uniform_edges(0, 1, 20), "x", "x");
  std::stringstream rep, hist;
  write_report_csv(rep, r);
  write_histogram_csv(hist, r);
  std::stringstream rep2(rep.str()), hist2(hist.str());
  const auto back = read_report(rep2, hist2);
  ASSERT_EQ(back.modes.size(), 2u);
  auto sig9 = [](double v) { return parse_double(format_sig9(v), "v"); };
  for (int i = 0; i < 2; ++i) {
    const auto& x = r.modes[i];
    const auto& y = back.modes[i];
    EXPECT_EQ(y.mode, x.mode);
    EXPECT_EQ(y.histogram, x.histogram);
    EXPECT_EQ(y.drop_fraction, sig9(x.drop_fraction));
    EXPECT_EQ(y.utilization_mean, sig9(x.utilization_mean));
    EXPECT_EQ(y.utilization_variance, sig9(x.utilization_variance));
    EXPECT_EQ(y.tail_mass, sig9(x.tail_mass));
    ASSERT_EQ(y.p95_latency.size(), x.p95_latency.size());
    for (std::size_t c = 0; c < x.p95_latency.size(); ++c) {
      EXPECT_EQ(y.p95_latency[c], sig9(x.p95_latency[c]));
      EXPECT_EQ(y.p99_latency[c], sig9(x.p99_latency[c]));
    }
  }
  EXPECT_EQ(back.classes, r.classes);
  EXPECT_EQ(back.tail_threshold, r.tail_threshold);

  // re-writing the parsed report reproduces the file
  std::stringstream rep3;
  write_report_csv(rep3, back);
  EXPECT_EQ(rep3.str(), rep.str());

  const auto dir = std::filesystem::temp_directory_path() / "hcqos_test_export";
  std::filesystem::remove_all(dir);
  export_report(r, dir / "a");
  export_report(r, dir / "b");
  for (const char* f : {"report.csv", "hist.csv", "hist.svg"}) {
    std::ifstream x(dir / "a" / f), y(dir / "b" / f);
    std::stringstream sx, sy;
    sx << x.rdbuf();
    sy << y.rdbuf();
    EXPECT_FALSE(sx.str().empty()) << f;
    EXPECT_EQ(sx.str(), sy.str()) << f;
  }
  std::ifstream svg(dir / "a" / "hist.svg");
  std::stringstream ssvg;
  ssvg << svg.rdbuf();
  EXPECT_EQ(ssvg.str().find("<script"), std::string::npos);
  EXPECT_NE(ssvg.str().find("<svg"), std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST(Export, UnwritablePathIsIoError) {
  const auto base = std::filesystem::temp_directory_path() / "hcqos_test_blocker";
  std::filesystem::remove_all(base);
  { std::ofstream(base.string()) << "x"; }
  try {
    export_report(ComparisonReport{}, base / "sub");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("hcqos_test_blocker"), std::string::npos);
  }
  std::filesystem::remove_all(base);
}
