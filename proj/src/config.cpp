#include "hcqos/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "hcqos/errors.hpp"

namespace hcqos {

std::vector<double> ReportConfig::edges() const {
  if (bins < 1) throw ConfigError("report.bins must be >= 1");
  if (!(hi > lo)) throw ConfigError("report.hi must exceed report.lo");
  std::vector<double> e(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) e[i] = lo + (hi - lo) * static_cast<double>(i) / bins;
  e.back() = hi;
  return e;
}

bool ScenarioConfig::runs(FeedbackMode m) const {
  return std::find(modes.begin(), modes.end(), m) != modes.end();
}

void ScenarioConfig::validate() const {
  if (name.empty()) throw ConfigError("name must not be empty");
  for (char c : name)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
      throw ConfigError("name may only contain letters, digits, '-', '_' and '.'");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (modes.empty()) throw ConfigError("modes must select at least one mode");
  link.validate();
  traffic.validate();
  for (const auto& e : traffic.entries)
    if (link.class_index(e.label) < 0)
      throw ConfigError("traffic class " + e.label.str() + " is not listed in link.classes");
  (void)report.edges();
  if (!(report.tail_threshold >= 0.0) || !std::isfinite(report.tail_threshold))
    throw ConfigError("report.tail_threshold must be >= 0");

  const ControllerConfig& c = controller;
  const int k = link.class_count();
  if (c.horizon < 1) throw ConfigError("controller.horizon must be >= 1");
  if (c.grid < 2) throw ConfigError("controller.grid must be >= 2");
  if (c.feedback_message_bytes < 0) throw ConfigError("controller.feedback_message_bytes must be >= 0");
  if (c.feedback_message_bytes > 0 && link.class_index({ZoneClass::A, AppKind::Service}) < 0)
    throw ConfigError("controller.feedback_message_bytes needs A-Service in link.classes");
  auto check_len = [k](const Vector& v, const char* field, int len) {
    if (v.size() != 0 && v.size() != len)
      throw DimensionError(std::string("controller.") + field + " must have " +
                           std::to_string(len) + " entries");
  };
  check_len(c.q_diag, "q_diag", 2 * k);
  check_len(c.r_diag, "r_diag", k);
  check_len(c.x_ref, "x_ref", 2 * k);
  if (c.u_lo) check_len(*c.u_lo, "u_lo", k);
  if (c.u_hi) check_len(*c.u_hi, "u_hi", k);
  for (int i = 0; i < c.q_diag.size(); ++i)
    if (!(c.q_diag[i] >= 0.0) || !std::isfinite(c.q_diag[i]))
      throw ConfigError("controller.q_diag entries must be >= 0");
  for (int i = 0; i < c.r_diag.size(); ++i)
    if (!(c.r_diag[i] > 0.0) || !std::isfinite(c.r_diag[i]))
      throw ConfigError("controller.r_diag entries must be > 0");
  if (c.Q.size() != 0 && (c.Q.rows() != 2 * k || c.Q.cols() != 2 * k))
    throw DimensionError("controller.Q must be " + std::to_string(2 * k) + "x" +
                         std::to_string(2 * k));
  if (c.R.size() != 0 && (c.R.rows() != k || c.R.cols() != k))
    throw DimensionError("controller.R must be " + std::to_string(k) + "x" + std::to_string(k));
  if (c.source == ModelSource::Explicit) {
    if (c.A.rows() != 2 * k || c.A.cols() != 2 * k || c.B.rows() != 2 * k || c.B.cols() != k)
      throw DimensionError("controller.A must be " + std::to_string(2 * k) + "x" +
                           std::to_string(2 * k) + " and controller.B " + std::to_string(2 * k) +
                           "x" + std::to_string(k) + " for " + std::to_string(k) + " classes");
  }
  if (c.source == ModelSource::Structural && !(c.drain_per_share >= 0.0))
    throw ConfigError("controller.drain_per_share must be >= 0");
  if (c.source == ModelSource::IdentifyFromWarmup && c.warmup_epochs < 2 * k + k + 2)
    throw ConfigError("controller.warmup_epochs is too short to identify a " +
                      std::to_string(2 * k) + "-state model");

  if (workload) {
    const WorkloadConfig& w = *workload;
    if (!(w.scale > 0.0) || w.scale > 1.0) throw ConfigError("workload.scale must lie in (0, 1]");
    if (w.queries < 1) throw ConfigError("workload.queries must be >= 1");
    if (!(w.spacing >= 0.0)) throw ConfigError("workload.spacing must be >= 0");
    if (!(w.first_start >= 0.0)) throw ConfigError("workload.first_start must be >= 0");
    if (w.metadata_bytes < 0) throw ConfigError("workload.metadata_bytes must be >= 0");
    if (w.author_count < 0) throw ConfigError("workload.author_count must be >= 0");
    w.backends.validate();
    const TrafficClassLabel blob{ZoneClass::B, w.backends.blob_kind};
    if (link.class_index(blob) < 0)
      throw ConfigError("workload blob traffic class " + blob.str() +
                        " is not listed in link.classes");
  }
}

// ---------------------------------------------------------------------------

namespace {

class Parser {
 public:
  explicit Parser(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& n, const std::string& field,
                         const std::string& msg) const {
    std::ostringstream os;
    os << source_;
    if (n.IsDefined() && n.Mark().line >= 0) os << ':' << n.Mark().line + 1;
    os << ": " << field << ": " << msg;
    throw ConfigError(os.str());
  }

  void keys(const YAML::Node& n, const std::string& field,
            std::initializer_list<const char*> allowed) const {
    if (!n.IsMap()) fail(n, field, "expected a mapping");
    for (const auto& kv : n) {
      const auto key = kv.first.as<std::string>();
      bool ok = false;
      for (const char* a : allowed) ok = ok || key == a;
      if (!ok) {
        std::string list;
        for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
        fail(kv.first, join(field, key), "unknown key (allowed: " + list + ")");
      }
    }
  }

  static std::string join(const std::string& a, const std::string& b) {
    return a.empty() ? b : a + "." + b;
  }

  template <class T>
  T scalar(const YAML::Node& n, const std::string& field, const char* what) const {
    if (!n.IsScalar()) fail(n, field, std::string("expected ") + what);
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, field, std::string("expected ") + what + ", got '" + n.Scalar() + "'");
    }
  }

  double real(const YAML::Node& n, const std::string& f) const {
    const double v = scalar<double>(n, f, "a number");
    if (!std::isfinite(v)) fail(n, f, "must be finite");
    return v;
  }
  double positive(const YAML::Node& n, const std::string& f) const {
    const double v = real(n, f);
    if (!(v > 0.0)) fail(n, f, "must be > 0");
    return v;
  }
  double nonneg(const YAML::Node& n, const std::string& f) const {
    const double v = real(n, f);
    if (!(v >= 0.0)) fail(n, f, "must be >= 0");
    return v;
  }
  std::int64_t integer(const YAML::Node& n, const std::string& f, std::int64_t lo) const {
    const auto v = scalar<long long>(n, f, "an integer");
    if (v < lo) fail(n, f, "must be >= " + std::to_string(lo));
    return v;
  }
  std::string text(const YAML::Node& n, const std::string& f) const {
    return scalar<std::string>(n, f, "a string");
  }

  Vector vec(const YAML::Node& n, const std::string& f) const {
    if (!n.IsSequence()) fail(n, f, "expected a list of numbers");
    Vector v(static_cast<Eigen::Index>(n.size()));
    for (std::size_t i = 0; i < n.size(); ++i)
      v[static_cast<Eigen::Index>(i)] = real(n[i], f + "[" + std::to_string(i) + "]");
    return v;
  }

  Matrix mat(const YAML::Node& n, const std::string& f) const {
    if (!n.IsSequence() || n.size() == 0) fail(n, f, "expected a list of rows");
    const auto rows = static_cast<Eigen::Index>(n.size());
    Matrix M;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const std::string fr = f + "[" + std::to_string(r) + "]";
      const Vector row = vec(n[static_cast<std::size_t>(r)], fr);
      if (r == 0) M.resize(rows, row.size());
      if (row.size() != M.cols()) fail(n[static_cast<std::size_t>(r)], fr, "ragged matrix row");
      M.row(r) = row.transpose();
    }
    return M;
  }

  template <class Fn>
  auto guarded(const YAML::Node& n, const std::string& f, Fn fn) const {
    try {
      return fn();
    } catch (const ConfigError& e) {
      fail(n, f, e.what());
    }
  }

  LinkSpec link(const YAML::Node& n) const {
    keys(n, "link", {"capacity_bps", "queue_bytes", "propagation_delay", "epoch", "classes"});
    LinkSpec l;
    if (n["capacity_bps"]) l.capacity_bps = positive(n["capacity_bps"], "link.capacity_bps");
    if (n["queue_bytes"]) l.queue_bytes = integer(n["queue_bytes"], "link.queue_bytes", 1);
    if (n["propagation_delay"])
      l.propagation_delay = nonneg(n["propagation_delay"], "link.propagation_delay");
    if (n["epoch"]) l.epoch = positive(n["epoch"], "link.epoch");
    if (const auto c = n["classes"]) {
      if (!c.IsSequence() || c.size() == 0) fail(c, "link.classes", "expected a non-empty list");
      l.classes.clear();
      for (std::size_t i = 0; i < c.size(); ++i) {
        const std::string f = "link.classes[" + std::to_string(i) + "]";
        const std::string s = text(c[i], f);
        l.classes.push_back(guarded(c[i], f, [&] { return TrafficClassLabel::parse(s); }));
      }
    }
    guarded(n, "link", [&] {
      l.validate();
      return 0;
    });
    return l;
  }

  SizeDistribution size(const YAML::Node& n, const std::string& f) const {
    if (!n.IsMap()) fail(n, f, "expected a mapping with 'family'");
    if (!n["family"]) fail(n, f + ".family", "missing");
    const std::string fam = text(n["family"], f + ".family");
    const auto family = guarded(n["family"], f + ".family", [&] { return parse_size_family(fam); });
    using F = SizeDistribution::Family;
    auto need = [&](const char* key) {
      if (!n[key]) fail(n, join(f, key), "missing");
      return positive(n[key], join(f, key));
    };
    switch (family) {
      case F::Fixed:
        keys(n, f, {"family", "bytes"});
        return SizeDistribution::fixed(need("bytes"));
      case F::Uniform: {
        keys(n, f, {"family", "lo", "hi"});
        const double lo = need("lo"), hi = need("hi");
        if (hi < lo) fail(n["hi"], f + ".hi", "must be >= lo");
        return SizeDistribution::uniform(lo, hi);
      }
      case F::Exponential:
        keys(n, f, {"family", "mean"});
        return SizeDistribution::exponential(need("mean"));
      case F::LogNormal:
        keys(n, f, {"family", "median", "sigma"});
        return SizeDistribution::lognormal(need("median"), need("sigma"));
    }
    fail(n, f, "unsupported family");
  }

  TrafficProfile traffic(const YAML::Node& n) const {
    if (!n.IsSequence()) fail(n, "traffic", "expected a list of class entries");
    TrafficProfile p;
    for (std::size_t i = 0; i < n.size(); ++i) {
      const YAML::Node e = n[i];
      const std::string f = "traffic[" + std::to_string(i) + "]";
      keys(e, f, {"class", "rate", "size", "on_off"});
      ProfileEntry pe;
      if (!e["class"]) fail(e, f + ".class", "missing");
      const std::string cls = text(e["class"], f + ".class");
      pe.label = guarded(e["class"], f + ".class", [&] { return TrafficClassLabel::parse(cls); });
      if (!e["rate"]) fail(e, f + ".rate", "missing");
      pe.rate = positive(e["rate"], f + ".rate");
      if (!e["size"]) fail(e, f + ".size", "missing");
      pe.size = size(e["size"], f + ".size");
      if (const auto o = e["on_off"]) {
        keys(o, f + ".on_off", {"mean_burst", "mean_idle"});
        OnOff oo;
        if (o["mean_burst"]) oo.mean_burst = positive(o["mean_burst"], f + ".on_off.mean_burst");
        if (o["mean_idle"]) oo.mean_idle = positive(o["mean_idle"], f + ".on_off.mean_idle");
        pe.on_off = oo;
      }
      p.entries.push_back(pe);
    }
    guarded(n, "traffic", [&] {
      p.validate();
      return 0;
    });
    return p;
  }

  ControllerConfig controller(const YAML::Node& n) const {
    keys(n, "controller",
         {"model", "A", "B", "drain_per_share", "coupling", "warmup_epochs", "u_lo", "u_hi",
          "q_diag", "r_diag", "Q", "R", "x_ref", "horizon", "grid", "kernel", "feedback_message_bytes"});
    ControllerConfig c;
    if (const auto m = n["model"]) {
      const std::string s = text(m, "controller.model");
      if (s == "explicit") c.source = ModelSource::Explicit;
      else if (s == "structural") c.source = ModelSource::Structural;
      else if (s == "identify-from-warmup") c.source = ModelSource::IdentifyFromWarmup;
      else fail(m, "controller.model", "expected explicit|structural|identify-from-warmup");
    }
    if (c.source == ModelSource::Explicit) {
      if (!n["A"] || !n["B"]) fail(n, "controller", "model: explicit needs both A and B");
      c.A = mat(n["A"], "controller.A");
      c.B = mat(n["B"], "controller.B");
    } else if (n["A"] || n["B"]) {
      fail(n["A"] ? n["A"] : n["B"], "controller", "A and B are only used with model: explicit");
    }
    if (n["drain_per_share"])
      c.drain_per_share = nonneg(n["drain_per_share"], "controller.drain_per_share");
    if (n["coupling"]) c.coupling = real(n["coupling"], "controller.coupling");
    if (n["warmup_epochs"])
      c.warmup_epochs = integer(n["warmup_epochs"], "controller.warmup_epochs", 1);
    if (n["u_lo"]) c.u_lo = vec(n["u_lo"], "controller.u_lo");
    if (n["u_hi"]) c.u_hi = vec(n["u_hi"], "controller.u_hi");
    if (n["q_diag"]) c.q_diag = vec(n["q_diag"], "controller.q_diag");
    if (n["r_diag"]) c.r_diag = vec(n["r_diag"], "controller.r_diag");
    if (n["Q"]) c.Q = mat(n["Q"], "controller.Q");
    if (n["R"]) c.R = mat(n["R"], "controller.R");
    if (n["x_ref"]) c.x_ref = vec(n["x_ref"], "controller.x_ref");
    if (n["horizon"])
      c.horizon = static_cast<int>(integer(n["horizon"], "controller.horizon", 1));
    if (n["grid"]) c.grid = static_cast<int>(integer(n["grid"], "controller.grid", 2));
    if (const auto k = n["kernel"]) {
      const std::string s = text(k, "controller.kernel");
      if (s == "serial") c.kernel = KernelPolicy::Serial;
      else if (s == "parallel") c.kernel = KernelPolicy::Parallel;
      else fail(k, "controller.kernel", "expected serial|parallel");
    }
    if (n["feedback_message_bytes"])
      c.feedback_message_bytes =
          integer(n["feedback_message_bytes"], "controller.feedback_message_bytes", 0);
    return c;
  }

  ReportConfig report(const YAML::Node& n) const {
    keys(n, "report", {"tail_threshold", "bins", "lo", "hi"});
    ReportConfig r;
    if (n["tail_threshold"]) r.tail_threshold = nonneg(n["tail_threshold"], "report.tail_threshold");
    if (n["bins"]) r.bins = static_cast<int>(integer(n["bins"], "report.bins", 1));
    if (n["lo"]) r.lo = real(n["lo"], "report.lo");
    if (n["hi"]) r.hi = real(n["hi"], "report.hi");
    if (!(r.hi > r.lo)) fail(n, "report.hi", "must exceed report.lo");
    return r;
  }

  WorkloadConfig workload(const YAML::Node& n) const {
    keys(n, "workload",
         {"scale", "metadata_bytes", "author_count", "queries", "first_start", "spacing",
          "backends"});
    WorkloadConfig w;
    if (n["scale"]) {
      w.scale = positive(n["scale"], "workload.scale");
      if (w.scale > 1.0) fail(n["scale"], "workload.scale", "must be <= 1");
    }
    if (n["metadata_bytes"])
      w.metadata_bytes = integer(n["metadata_bytes"], "workload.metadata_bytes", 0);
    if (n["author_count"]) w.author_count = integer(n["author_count"], "workload.author_count", 0);
    if (n["queries"]) w.queries = static_cast<int>(integer(n["queries"], "workload.queries", 1));
    if (n["first_start"]) w.first_start = nonneg(n["first_start"], "workload.first_start");
    if (n["spacing"]) w.spacing = nonneg(n["spacing"], "workload.spacing");
    if (const auto b = n["backends"]) {
      const std::string f = "workload.backends";
      keys(b, f,
           {"lookup_s", "per_row_s", "blob_first_byte_s", "blob_bytes_per_s", "local_bytes_per_s",
            "fetch_parallelism", "blob_kind", "retry_backoff_s"});
      auto& be = w.backends;
      if (b["lookup_s"]) be.lookup_s = positive(b["lookup_s"], f + ".lookup_s");
      if (b["per_row_s"]) be.per_row_s = positive(b["per_row_s"], f + ".per_row_s");
      if (b["blob_first_byte_s"])
        be.blob_first_byte_s = positive(b["blob_first_byte_s"], f + ".blob_first_byte_s");
      if (b["blob_bytes_per_s"])
        be.blob_bytes_per_s = positive(b["blob_bytes_per_s"], f + ".blob_bytes_per_s");
      if (b["local_bytes_per_s"])
        be.local_bytes_per_s = positive(b["local_bytes_per_s"], f + ".local_bytes_per_s");
      if (b["fetch_parallelism"])
        be.fetch_parallelism =
            static_cast<int>(integer(b["fetch_parallelism"], f + ".fetch_parallelism", 1));
      if (b["retry_backoff_s"])
        be.retry_backoff_s = positive(b["retry_backoff_s"], f + ".retry_backoff_s");
      if (const auto k = b["blob_kind"]) {
        const std::string s = text(k, f + ".blob_kind");
        if (s != "Database" && s != "File") fail(k, f + ".blob_kind", "expected Database|File");
        be.blob_kind = parse_app_kind(s);
      }
    }
    return w;
  }

  ScenarioConfig scenario(const YAML::Node& root) const {
    keys(root, "",
         {"name", "seed", "epochs", "modes", "output", "link", "traffic", "controller", "report",
          "workload"});
    ScenarioConfig cfg;
    if (root["name"]) cfg.name = text(root["name"], "name");
    if (root["seed"]) cfg.seed = static_cast<std::uint64_t>(integer(root["seed"], "seed", 0));
    if (root["epochs"]) cfg.epochs = integer(root["epochs"], "epochs", 1);
    if (const auto m = root["modes"]) {
      const std::string s = text(m, "modes");
      if (s == "open") cfg.modes = {FeedbackMode::Open};
      else if (s == "closed") cfg.modes = {FeedbackMode::Closed};
      else if (s == "both") cfg.modes = {FeedbackMode::Open, FeedbackMode::Closed};
      else fail(m, "modes", "expected open|closed|both");
    }
    if (root["output"]) cfg.output = text(root["output"], "output");
    if (!root["link"]) fail(root, "link", "missing section");
    cfg.link = link(root["link"]);
    if (!root["traffic"]) fail(root, "traffic", "missing section");
    cfg.traffic = traffic(root["traffic"]);
    if (root["controller"]) cfg.controller = controller(root["controller"]);
    if (root["report"]) cfg.report = report(root["report"]);
    if (root["workload"]) cfg.workload = workload(root["workload"]);
    guarded(root, "scenario", [&] {
      cfg.validate();
      return 0;
    });
    return cfg;
  }

 private:
  std::string source_;
};

}  // namespace

ScenarioConfig parse_config(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) throw ConfigError(source + ": expected a mapping at the top level");
  return Parser(source).scenario(root);
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open config");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(path.string(), "read failed");
  return parse_config(ss.str(), path.string());
}

std::string config_reference() {
  return R"(Scenario config keys (YAML; unknown keys are rejected):
  name: run id (letters, digits, - _ .)          seed: integer        epochs: integer >= 1
  modes: open | closed | both                    output: directory (HCQOS_OUT overrides)
  link:
    capacity_bps, queue_bytes (per class queue; the single FIFO in open mode),
    propagation_delay (s), epoch (s), classes: [A-Database, ..., C] in canonical order
  traffic: list of
    class, rate (mean flows/s), size {family: fixed bytes | uniform lo hi | exponential mean |
    lognormal median sigma}, on_off {mean_burst, mean_idle} (optional)
  controller:
    model: structural | explicit | identify-from-warmup
    A, B (explicit), drain_per_share, coupling (structural), warmup_epochs (identify)
    u_lo, u_hi, q_diag, r_diag, Q, R (full matrices), x_ref, horizon, grid, kernel: serial | parallel,
    feedback_message_bytes
  report: tail_threshold, bins, lo, hi
  workload (optional):
    scale, metadata_bytes, author_count, queries, first_start, spacing,
    backends {lookup_s, per_row_s, blob_first_byte_s, blob_bytes_per_s, local_bytes_per_s,
              fetch_parallelism, blob_kind: Database | File, retry_backoff_s}
)";
}

}  // namespace hcqos
