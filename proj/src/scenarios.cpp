#include "hcqos/scenarios.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <set>

#include "hcqos/csv.hpp"
#include "hcqos/errors.hpp"
#include "hcqos/kernels.hpp"

namespace hcqos {

std::string run_id(const ScenarioConfig& cfg) {
  return cfg.name + "-seed" + std::to_string(cfg.seed);
}

std::filesystem::path output_root(const ScenarioConfig& cfg) {
  if (const char* env = std::getenv("HCQOS_OUT"); env && *env) return env;
  return cfg.output;
}

CostWeights build_weights(const ScenarioConfig& cfg) {
  const auto& c = cfg.controller;
  const int k = cfg.link.class_count();
  Matrix Q = c.Q.size() ? c.Q
                        : Matrix(c.q_diag.size() ? c.q_diag : Vector::Ones(2 * k)).asDiagonal();
  Matrix R = c.R.size() ? c.R
                        : Matrix(Vector(c.r_diag.size() ? c.r_diag
                                                        : Vector::Constant(k, 0.01))
                                     .asDiagonal());
  Vector x_ref = c.x_ref.size() ? c.x_ref : Vector::Zero(2 * k);
  return CostWeights::make(std::move(Q), std::move(R), std::move(x_ref));
}

ControlBounds build_bounds(const ScenarioConfig& cfg) {
  const int k = cfg.link.class_count();
  ControlBounds U = ControlBounds::simplex(k);
  if (cfg.controller.u_lo) U.lo = *cfg.controller.u_lo;
  if (cfg.controller.u_hi) U.hi = *cfg.controller.u_hi;
  return U;
}

const ModeRun* ScenarioRun::find(FeedbackMode m) const {
  for (const auto& r : runs)
    if (r.mode == m) return &r;
  return nullptr;
}

namespace {

double trace_duration(const ScenarioConfig& cfg, std::int64_t epochs) {
  return static_cast<double>(epochs) * cfg.link.epoch;
}

StateSpaceModel structural_for(const ScenarioConfig& cfg) {
  const auto& c = cfg.controller;
  const double kappa =
      c.drain_per_share > 0.0
          ? c.drain_per_share
          : static_cast<double>(cfg.link.epoch_bytes()) / static_cast<double>(cfg.link.queue_bytes);
  return structural_queue_model(cfg.link.class_count(), kappa, c.coupling);
}

}  // namespace

ControllerSpec build_controller(const ScenarioConfig& cfg,
                                std::optional<Identification>* identification) {
  const auto& c = cfg.controller;
  const int k = cfg.link.class_count();
  ControllerSpec spec;
  spec.weights = build_weights(cfg);
  spec.horizon = c.horizon;
  spec.grid = c.grid;
  spec.kernel = c.kernel;
  spec.feedback_message_bytes = c.feedback_message_bytes;
  const ControlBounds U = build_bounds(cfg);

  switch (c.source) {
    case ModelSource::Explicit:
      spec.model = StateSpaceModel::make(c.A, c.B);
      break;
    case ModelSource::Structural:
      spec.model = structural_for(cfg);
      break;
    case ModelSource::IdentifyFromWarmup: {
      ControllerSpec warm = spec;
      warm.model = structural_for(cfg);
      warm.model.U = U;
      warm.policy = ControlPolicy::RandomExcitation;
      SimOptions opt;
      opt.mode = FeedbackMode::Closed;
      opt.epochs = c.warmup_epochs;
      opt.controller = warm;
      opt.seed = mix_seed(cfg.seed, 0x3A53ull);
      const auto trace = generate_trace(cfg.traffic, trace_duration(cfg, c.warmup_epochs),
                                        mix_seed(cfg.seed, 2));
      const SimMetrics m = run_simulation(trace, cfg.link, opt);
      Identification id = identify_model(m.trajectory(), 2 * k, k);
      spec.model = id.model;
      if (identification) *identification = id;
      break;
    }
  }
  spec.model.X = StateBounds::unit(2 * k);
  spec.model.U = U;
  spec.model.validate();
  (void)kernels::enumerate_grid(U, spec.grid);  // empty feasible grid is a config error
  return spec;
}

ScenarioRun run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  ScenarioRun run;
  run.id = run_id(cfg);
  run.trace = generate_trace(cfg.traffic, trace_duration(cfg, cfg.epochs), mix_seed(cfg.seed, 1));
  if (cfg.runs(FeedbackMode::Closed)) run.controller = build_controller(cfg, &run.identification);

  std::optional<Corpus> corpus;
  std::vector<std::int64_t> authors;
  if (cfg.workload) {
    const auto& w = *cfg.workload;
    CorpusSpec cs = CorpusSpec::desk_scale(w.scale, mix_seed(cfg.seed, 3));
    cs.metadata_bytes = w.metadata_bytes;
    cs.author_count = w.author_count;
    corpus = build_corpus(cs);
    std::vector<std::int64_t> present;
    for (const auto& [a, ids] : corpus->by_author) present.push_back(a);
    Rng rng(mix_seed(cfg.seed, 4));
    for (int i = 0; i < w.queries; ++i)
      authors.push_back(present[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(present.size()) - 1))]);
  }

  for (FeedbackMode mode : cfg.modes) {
    SimOptions opt;
    opt.mode = mode;
    opt.epochs = cfg.epochs;
    opt.seed = cfg.seed;
    if (mode == FeedbackMode::Closed) opt.controller = run.controller;
    ModeRun mr;
    mr.mode = mode;
    mr.metrics = run_simulation(run.trace, cfg.link, opt);
    if (corpus) {
      LinkScenario ls{cfg.link, opt, run.trace};
      mr.workload = run_experiment(corpus->hybrid_view(), authors, cfg.workload->backends, ls,
                                   cfg.workload->first_start, cfg.workload->spacing);
    }
    run.runs.push_back(std::move(mr));
  }

  const ModeRun* open = run.find(FeedbackMode::Open);
  const ModeRun* closed = run.find(FeedbackMode::Closed);
  if (open && closed)
    run.report = compare_modes(open->metrics, closed->metrics, cfg.report.tail_threshold,
                               cfg.report.edges(), run.id, run.id);
  return run;
}

void write_model_csv(std::ostream& os, const StateSpaceModel& model,
                     std::optional<double> residual_norm) {
  auto block = [&os](const char* name, const Matrix& M) {
    os << "# " << name << ' ' << M.rows() << " x " << M.cols() << '\n';
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
      for (Eigen::Index c = 0; c < M.cols(); ++c)
        os << (c ? "," : "") << format_exact(M(r, c));
      os << '\n';
    }
  };
  block("A", model.A);
  block("B", model.B);
  if (residual_norm) os << "# residual_norm " << format_exact(*residual_norm) << '\n';
}

void write_state_trace_csv(std::ostream& os, const Trajectory& t) {
  if (t.empty()) return;
  const auto n = t.front().first.size(), m = t.front().second.size();
  for (Eigen::Index i = 0; i < n; ++i) os << (i ? "," : "") << 'x' << i;
  for (Eigen::Index i = 0; i < m; ++i) os << (n + i ? "," : "") << 'u' << i;
  os << '\n';
  for (const auto& [x, u] : t) {
    for (Eigen::Index i = 0; i < n; ++i) os << (i ? "," : "") << format_exact(x[i]);
    for (Eigen::Index i = 0; i < m; ++i) os << (n + i ? "," : "") << format_exact(u[i]);
    os << '\n';
  }
}

Trajectory read_state_trace_csv(std::istream& is, int n, int m) {
  if (n < 1 || m < 0) throw DimensionError("state trace needs n >= 1 and m >= 0");
  const CsvTable t = read_csv(is);
  if (static_cast<int>(t.header.size()) != n + m)
    throw DimensionError("state trace has " + std::to_string(t.header.size()) +
                         " columns, expected n+m = " + std::to_string(n + m));
  for (int i = 0; i < n + m; ++i) {
    const std::string want = i < n ? "x" + std::to_string(i) : "u" + std::to_string(i - n);
    if (t.header[i] != want)
      throw ConfigError("state trace column " + std::to_string(i + 1) + " is '" + t.header[i] +
                        "', expected '" + want + "'");
  }
  Trajectory out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string ctx = "state trace row " + std::to_string(r + 2);
    if (static_cast<int>(row.size()) != n + m) throw ConfigError(ctx + ": wrong number of fields");
    Vector x(n), u(m);
    for (int i = 0; i < n; ++i) x[i] = parse_double(row[i], ctx);
    for (int i = 0; i < m; ++i) u[i] = parse_double(row[n + i], ctx);
    out.emplace_back(std::move(x), std::move(u));
  }
  return out;
}

void write_run(const ScenarioRun& run, const std::filesystem::path& dir) {
  for (const auto& r : run.runs) {
    const auto sub = dir / std::string(to_string(r.mode));
    {
      auto os = open_output(sub / "epochs.csv");
      write_epoch_csv(os, r.metrics);
      if (!os) throw IoError((sub / "epochs.csv").string(), "write failed");
    }
    if (r.workload) {
      auto os = open_output(sub / "queries.csv");
      write_experiment_csv(os, *r.workload);
      if (!os) throw IoError((sub / "queries.csv").string(), "write failed");
    }
  }
  if (run.report) {
    export_report(*run.report, dir);
  } else if (!run.runs.empty()) {
    // Single mode: a one-sided report with the same schema.
    ComparisonReport r;
    r.scenario = run.id;
    for (const auto& c : run.runs.front().metrics.classes) r.classes.push_back(c.str());
    r.modes.push_back(summarize_mode(run.runs.front().metrics, uniform_edges(0.0, 1.0, 20), 0.95));
    export_report(r, dir);
  }
  if (run.controller) {
    auto os = open_output(dir / "model.csv");
    write_model_csv(os, run.controller->model,
                    run.identification ? std::optional(run.identification->residual_norm)
                                       : std::nullopt);
    if (!os) throw IoError((dir / "model.csv").string(), "write failed");
  }
}

// --- S1 -------------------------------------------------------------------

ScenarioConfig s1_config(std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.name = "s1-histogram";
  cfg.seed = seed;
  cfg.epochs = 4000;
  cfg.output = "runs";
  cfg.link.capacity_bps = 10e6;
  cfg.link.queue_bytes = 1 << 20;
  cfg.link.epoch = 0.25;
  cfg.link.classes = {TrafficClassLabel::parse("A-Database"), TrafficClassLabel::parse("B-File")};

  // Each class alone offers 0.65 of capacity while ON; both ON is 1.3x.
  const double peak_each = 0.65 * cfg.link.bytes_per_second();
  const OnOff burst{2.0, 2.0};
  const double duty = burst.mean_burst / (burst.mean_burst + burst.mean_idle);
  const SizeDistribution db = SizeDistribution::lognormal(20e3, 0.5);
  const SizeDistribution file = SizeDistribution::lognormal(80e3, 0.5);
  cfg.traffic.entries = {
      {cfg.link.classes[0], duty * peak_each / db.mean(), db, burst},
      {cfg.link.classes[1], duty * peak_each / file.mean(), file, burst},
  };

  auto& c = cfg.controller;
  c.source = ModelSource::Structural;
  c.coupling = 0.1;
  c.horizon = 1;
  c.grid = 11;
  // Backlog pushed below zero drains queues; the utilisation block mostly
  // weighs the total against 0.8 of capacity.
  c.Q = Matrix::Zero(4, 4);
  c.Q(0, 0) = c.Q(1, 1) = 1.0;
  c.Q.block(2, 2, 2, 2) << 1.2, 1.0, 1.0, 1.2;
  c.R = 0.1 * Matrix::Identity(2, 2);
  c.x_ref = (Vector(4) << -0.5, -0.5, 0.4, 0.4).finished();
  cfg.report = ReportConfig{};
  return cfg;
}

S1Outcome run_s1(std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioConfig cfg = s1_config(seed);
  S1Outcome out;
  out.run = run_scenario(cfg);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto& r = *out.run.report;
  out.drop_reduction = ComparisonReport::reduction(r.modes[0].drop_fraction, r.modes[1].drop_fraction);
  out.variance_reduction =
      ComparisonReport::reduction(r.modes[0].utilization_variance, r.modes[1].utilization_variance);
  out.tail_reduction = ComparisonReport::reduction(r.modes[0].tail_mass, r.modes[1].tail_mass);
  const double bps = cfg.link.bytes_per_second();
  for (const auto& e : cfg.traffic.entries) {
    const double duty = e.on_off ? e.on_off->mean_burst / (e.on_off->mean_burst + e.on_off->mean_idle)
                                 : 1.0;
    out.peak_offered += e.rate / duty * e.size.mean() / bps;
  }
  out.mean_offered = cfg.traffic.mean_offered_bytes_per_second() / bps;
  return out;
}

void print_s1(std::ostream& os, const S1Outcome& s) {
  const auto& r = *s.run.report;
  const auto& o = r.modes[0];
  const auto& c = r.modes[1];
  auto verdict = [](bool ok) { return ok ? "PASS" : "FAIL"; };
  os << "s1-histogram: " << s.run.runs.front().metrics.epochs.size() << " epochs, ON-period load "
     << format_sig9(s.peak_offered) << "x capacity (mean " << format_sig9(s.mean_offered) << "x)\n";
  os << "                      open         closed       reduction\n";
  auto line = [&](const char* name, double a, double b, double red, bool ok) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "  %-18s %-12.6g %-12.6g %7.1f%%  %s\n", name, a, b, 100 * red,
                  verdict(ok));
    os << buf;
  };
  line("drop fraction", o.drop_fraction, c.drop_fraction, s.drop_reduction, s.drop_ok());
  line("util variance", o.utilization_variance, c.utilization_variance, s.variance_reduction,
       s.variance_ok());
  line("tail mass >0.95", o.tail_mass, c.tail_mass, s.tail_reduction, s.tail_ok());
  os << "  drop-fraction delta (closed - open): " << format_sig9(r.delta_drop_fraction()) << '\n';
  os << "  runtime " << format_sig9(s.seconds) << " s  " << verdict(s.runtime_ok()) << '\n';
  os << "s1-histogram " << verdict(s.pass()) << '\n';
}

// --- S2 -------------------------------------------------------------------

bool S2Outcome::congested_ok() const {
  return congested.result.hybrid_summary.mean > congested.result.local_summary.mean;
}

int S2Outcome::idle_winner() const {
  for (std::size_t i = 0; i < idle.size(); ++i)
    if (idle[i].result.hybrid_summary.p50 < idle[i].result.local_summary.p50)
      return static_cast<int>(i);
  return -1;
}

bool S2Outcome::pass() const {
  return identical_sets && congested_ok() && idle_winner() >= 0 && runtime_ok();
}

namespace {

bool same_result_sets(const ExperimentResult& r) {
  if (r.local.size() != r.hybrid.size()) return false;
  for (std::size_t i = 0; i < r.local.size(); ++i)
    if (r.local[i].articles != r.hybrid[i].articles || r.local[i].bytes != r.hybrid[i].bytes)
      return false;
  return true;
}

}  // namespace

S2Outcome run_s2(std::uint64_t seed, double scale) {
  const auto t0 = std::chrono::steady_clock::now();
  S2Outcome out;
  CorpusSpec cs = CorpusSpec::desk_scale(scale, mix_seed(seed, 3));
  const Corpus corpus = build_corpus(cs).hybrid_view();
  out.articles = static_cast<std::int64_t>(corpus.articles.size());
  out.body_bytes = corpus.total_body_bytes();
  out.queries = 100;

  std::vector<std::int64_t> present;
  for (const auto& [a, ids] : corpus.by_author) present.push_back(a);
  Rng rng(mix_seed(seed, 4));
  std::vector<std::int64_t> authors;
  for (int i = 0; i < out.queries; ++i)
    authors.push_back(present[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(present.size()) - 1))]);

  // Congested: a 20 Mbit/s bottleneck already carrying bursty cloud traffic
  // at 0.8 of capacity, half of it in the class the blob fetches use.
  {
    LinkScenario ls;
    ls.link.capacity_bps = 20e6;
    ls.link.queue_bytes = 8 << 20;
    ls.link.propagation_delay = 0.01;
    ls.link.classes = {TrafficClassLabel::parse("B-Database"), TrafficClassLabel::parse("C")};
    ls.options.mode = FeedbackMode::Open;
    ls.options.epochs = 100000;
    ls.options.seed = seed;
    const SizeDistribution sz = SizeDistribution::lognormal(50e3, 1.0);
    TrafficProfile bg;
    const double load = 0.8 * ls.link.bytes_per_second();
    bg.entries = {{ls.link.classes[0], 0.5 * load / sz.mean(), sz, OnOff{5.0, 5.0}},
                  {ls.link.classes[1], 0.5 * load / sz.mean(), sz, std::nullopt}};
    ls.background = generate_trace(bg, 1200.0, mix_seed(seed, 5));
    BackendLatency be;
    out.congested.name = "congested";
    out.congested.local_bytes_per_s = be.local_bytes_per_s;
    out.congested.result = run_experiment(corpus, authors, be, ls, 5.0, 10.0);
  }

  // Idle: a fast, empty 1 Gbit/s path to the cloud against a slow local store.
  for (double local_rate : {20e6, 10e6, 5e6}) {
    LinkScenario ls;
    ls.link.capacity_bps = 1e9;
    ls.link.queue_bytes = 8 << 20;
    ls.link.propagation_delay = 0.005;
    ls.link.classes = {TrafficClassLabel::parse("B-Database")};
    ls.options.mode = FeedbackMode::Open;
    ls.options.epochs = 100000;
    ls.options.seed = seed;
    BackendLatency be;
    be.local_bytes_per_s = local_rate;
    S2Case c;
    c.name = "idle-local" + std::to_string(static_cast<int>(local_rate / 1e6)) + "MBps";
    c.local_bytes_per_s = local_rate;
    c.result = run_experiment(corpus, authors, be, ls, 0.0, 2.0);
    out.idle.push_back(std::move(c));
  }

  out.identical_sets = same_result_sets(out.congested.result);
  for (const auto& c : out.idle) out.identical_sets = out.identical_sets && same_result_sets(c.result);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

void write_s2(const S2Outcome& s2, const std::filesystem::path& dir) {
  std::vector<const S2Case*> cases{&s2.congested};
  for (const auto& c : s2.idle) cases.push_back(&c);
  {
    auto os = open_output(dir / "summary.csv");
    os << "case,local_bytes_per_s,protocol,mean_s,p50_s,p95_s\n";
    for (const S2Case* c : cases)
      for (const auto& [name, s] : {std::pair{"local", c->result.local_summary},
                                    std::pair{"hybrid", c->result.hybrid_summary}})
        os << c->name << ',' << format_sig9(c->local_bytes_per_s) << ',' << name << ','
           << format_sig9(s.mean) << ',' << format_sig9(s.p50) << ',' << format_sig9(s.p95)
           << '\n';
    if (!os) throw IoError((dir / "summary.csv").string(), "write failed");
  }
  for (const S2Case* c : cases) {
    auto os = open_output(dir / c->name / "queries.csv");
    write_experiment_csv(os, c->result);
    if (!os) throw IoError((dir / c->name / "queries.csv").string(), "write failed");
  }
}

void print_s2(std::ostream& os, const S2Outcome& s) {
  auto verdict = [](bool ok) { return ok ? "PASS" : "FAIL"; };
  os << "s2-hybrid-db: " << s.articles << " articles, " << s.body_bytes << " body bytes, "
     << s.queries << " author queries\n";
  char buf[200];
  std::snprintf(buf, sizeof buf, "  %-22s %-8s %12s %12s %12s\n", "case", "protocol", "mean_s",
                "p50_s", "p95_s");
  os << buf;
  std::vector<const S2Case*> cases{&s.congested};
  for (const auto& c : s.idle) cases.push_back(&c);
  for (const S2Case* c : cases)
    for (const auto& [name, sum] : {std::pair{"local", c->result.local_summary},
                                    std::pair{"hybrid", c->result.hybrid_summary}}) {
      std::snprintf(buf, sizeof buf, "  %-22s %-8s %12.6f %12.6f %12.6f\n", c->name.c_str(), name,
                    sum.mean, sum.p50, sum.p95);
      os << buf;
    }
  const int w = s.idle_winner();
  os << "  (a) identical result sets: " << verdict(s.identical_sets) << '\n';
  os << "  (b) congested: hybrid mean > local mean: " << verdict(s.congested_ok()) << '\n';
  os << "  (c) idle link, slow local store: hybrid p50 < local p50 in "
     << (w >= 0 ? s.idle[w].name : std::string("no case")) << ": " << verdict(w >= 0) << '\n';
  os << "  runtime " << format_sig9(s.seconds) << " s  " << verdict(s.runtime_ok()) << '\n';
  os << "s2-hybrid-db " << verdict(s.pass()) << '\n';
}

}  // namespace hcqos
