#include "hcqos/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "hcqos/csv.hpp"
#include "hcqos/errors.hpp"
#include "hcqos/kernels.hpp"

namespace hcqos {

std::string_view to_string(FeedbackMode m) { return m == FeedbackMode::Open ? "open" : "closed"; }

void LinkSpec::validate() const {
  if (!(capacity_bps > 0.0) || !std::isfinite(capacity_bps))
    throw ConfigError("link.capacity_bps must be > 0");
  if (queue_bytes <= 0) throw ConfigError("link.queue_bytes must be > 0");
  if (!(propagation_delay >= 0.0) || !std::isfinite(propagation_delay))
    throw ConfigError("link.propagation_delay must be >= 0");
  if (!(epoch > 0.0) || !std::isfinite(epoch)) throw ConfigError("link.epoch must be > 0");
  if (classes.empty()) throw ConfigError("link.classes must list at least one class");
  for (std::size_t i = 1; i < classes.size(); ++i)
    if (classes[i - 1].canonical_rank() >= classes[i].canonical_rank())
      throw ConfigError("link.classes must be distinct and in canonical order "
                        "(A-Database, A-Web, A-File, A-Service, B-..., C)");
  if (epoch_bytes() < 1) throw ConfigError("link epoch carries less than one byte");
}

int LinkSpec::class_index(const TrafficClassLabel& label) const {
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i] == label) return static_cast<int>(i);
  return -1;
}

std::int64_t LinkSpec::epoch_bytes() const { return std::llround(epoch * bytes_per_second()); }

ClassCounters SimMetrics::aggregate() const {
  ClassCounters a;
  for (const auto& c : totals) {
    a.arrived += c.arrived;
    a.delivered += c.delivered;
    a.dropped += c.dropped;
    a.queued += c.queued;
  }
  return a;
}

double SimMetrics::drop_fraction() const {
  const auto a = aggregate();
  return a.arrived == 0 ? 0.0 : static_cast<double>(a.dropped) / static_cast<double>(a.arrived);
}

std::vector<double> SimMetrics::utilization_series() const {
  std::vector<double> u;
  u.reserve(epochs.size());
  for (const auto& e : epochs) u.push_back(e.utilization);
  return u;
}

Trajectory SimMetrics::trajectory() const {
  Trajectory t;
  for (const auto& e : epochs)
    if (e.state.size() > 0) t.emplace_back(e.state, e.control);
  return t;
}

Vector observe_state(const std::vector<ClassCounters>& q, const LinkSpec& link,
                     const std::vector<std::int64_t>& last_epoch_delivered) {
  const int k = link.class_count();
  if (static_cast<int>(q.size()) != k || static_cast<int>(last_epoch_delivered.size()) != k)
    throw DimensionError("observe_state: counters do not match the class count");
  const double qcap = static_cast<double>(link.queue_bytes);
  const double ebytes = static_cast<double>(link.epoch_bytes());
  Vector x(2 * k);
  for (int i = 0; i < k; ++i) {
    x[i] = static_cast<double>(q[i].queued) / qcap;
    x[k + i] = static_cast<double>(last_epoch_delivered[i]) / ebytes;
  }
  return x;
}

SchedulerConfig apply_decision(const ControlDecision& d, const ControlBounds& U,
                               const LinkSpec& link) {
  const int k = link.class_count();
  if (d.u.size() != k) throw DimensionError("decision has the wrong number of shares");
  if (!U.contains(d.u)) throw ConfigError("decision share vector is outside U");
  std::vector<int> seen(k, 0);
  if (static_cast<int>(d.priority_order.size()) != k)
    throw ConfigError("priority order is not a permutation");
  for (int q : d.priority_order) {
    if (q < 0 || q >= k || seen[q]++) throw ConfigError("priority order is not a permutation");
  }
  SchedulerConfig s;
  s.order = d.priority_order;
  const double ebytes = static_cast<double>(link.epoch_bytes());
  s.caps.resize(k);
  for (int i = 0; i < k; ++i)
    s.caps[i] = static_cast<std::int64_t>(std::floor(std::max(0.0, d.u[i]) * ebytes + 1e-6));
  return s;
}

std::int64_t feedback_overhead(FeedbackMode mode, std::int64_t message_bytes,
                               std::int64_t epochs) {
  if (mode == FeedbackMode::Open) return 0;
  return std::max<std::int64_t>(0, message_bytes) * std::max<std::int64_t>(0, epochs);
}

// ---------------------------------------------------------------------------

namespace {

enum EventKind : int { kEpoch = 0, kService = 1, kArrival = 2, kQuery = 3 };

struct Event {
  std::int64_t tick;
  int kind;
  std::uint64_t seq;
  std::int64_t payload;

  bool operator>(const Event& o) const {
    if (tick != o.tick) return tick > o.tick;
    if (kind != o.kind) return kind > o.kind;
    return seq > o.seq;
  }
};

struct Pending {
  std::int64_t id = 0;
  std::int64_t size = 0;
  std::int64_t remaining = 0;
  std::int64_t arrival_tick = 0;
  int cls = 0;
  int callback = -1;
  bool control = false;
};

struct Offer {
  FlowEvent flow;
  int cls = 0;
  int callback = -1;
};

constexpr std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

}  // namespace

struct Simulator::Impl {
  LinkSpec link;
  SimOptions opt;
  int k = 0;
  std::int64_t ticks_per_byte = 1;
  double ticks_per_second = 1.0;
  std::int64_t epoch_bytes = 1;
  std::int64_t epoch_ticks = 1;
  std::int64_t prop_ticks = 0;
  int feedback_class = -1;

  std::vector<std::deque<Pending>> queues;
  std::vector<std::int64_t> queue_bytes;
  std::vector<ClassCounters> counters;
  std::vector<std::int64_t> ep_arrived, ep_delivered, ep_dropped, last_delivered, cap_used;
  SchedulerConfig sched;
  std::vector<double> shares;
  std::vector<int> ranks;
  Vector cur_state, cur_control;

  struct Segment {
    bool active = false;
    int queue = 0;
    std::int64_t start = 0;
    std::int64_t planned = 0;
    std::int64_t committed = 0;
  } seg;
  std::int64_t link_free = 0;
  std::uint64_t generation = 0;

  std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
  std::uint64_t seq = 0;
  std::int64_t now = 0;
  std::int64_t last_trace_tick = 0;
  std::vector<Offer> offers;
  std::vector<FlowCallback> callbacks;
  std::vector<Action> actions;
  std::optional<kernels::ControlGrid> excitation_grid;
  Rng rng{1};
  std::int64_t next_control_id = -1;
  bool ran = false;
  bool stopped = false;

  SimMetrics metrics;

  bool closed() const { return opt.mode == FeedbackMode::Closed; }
  int queue_of(int cls) const { return closed() ? cls : 0; }

  void push(std::int64_t tick, int kind, std::int64_t payload) {
    events.push({tick, kind, seq++, payload});
  }

  void log(std::int64_t tick, std::string_view kind, int queue, std::int64_t id,
           std::int64_t bytes) {
    if (!opt.event_log) return;
    *opt.event_log << tick << ',' << format_exact(static_cast<double>(tick) / ticks_per_second)
                   << ',' << kind << ',' << queue << ',' << id << ',' << bytes << '\n';
  }

  std::int64_t cap_remaining(int cls) const {
    if (!closed()) return std::numeric_limits<std::int64_t>::max();
    return sched.caps[cls] - cap_used[cls];
  }

  void finish_flow(const Pending& f, std::int64_t done_tick, Simulator& self) {
    const std::int64_t delivered_at = done_tick + prop_ticks;
    metrics.latencies[f.cls].push_back(static_cast<double>(delivered_at - f.arrival_tick) /
                                       ticks_per_second);
    if (f.control) metrics.feedback_delivered += f.size;
    log(done_tick, "depart", queue_of(f.cls), f.id, f.size);
    if (f.callback >= 0) {
      const int cb = f.callback;
      const double when = static_cast<double>(delivered_at) / ticks_per_second;
      actions.push_back([this, cb, when](Simulator& s) {
        FlowCallback f = std::move(callbacks[cb]);
        f(s, when, false);
      });
      push(delivered_at, kQuery, static_cast<std::int64_t>(actions.size() - 1));
    }
    (void)self;
  }

  // Credits every byte whose transmission started before tick t.
  void commit(std::int64_t t, Simulator& self) {
    if (!seg.active) return;
    const std::int64_t started =
        t <= seg.start ? 0 : std::min(seg.planned, ceil_div(t - seg.start, ticks_per_byte));
    const std::int64_t delta = started - seg.committed;
    if (delta > 0) {
      auto& q = queues[seg.queue];
      Pending& head = q.front();
      head.remaining -= delta;
      queue_bytes[seg.queue] -= delta;
      auto& c = counters[head.cls];
      c.queued -= delta;
      c.delivered += delta;
      ep_delivered[head.cls] += delta;
      cap_used[head.cls] += delta;
      seg.committed = started;
      if (head.remaining == 0) {
        const Pending done = head;
        q.pop_front();
        finish_flow(done, seg.start + seg.committed * ticks_per_byte, self);
      }
    }
    if (seg.committed == seg.planned && t >= seg.start + seg.planned * ticks_per_byte) {
      link_free = seg.start + seg.planned * ticks_per_byte;
      seg.active = false;
    }
  }

  void replan(std::int64_t t) {
    if (seg.active) {
      link_free = seg.start + seg.committed * ticks_per_byte;
      seg.active = false;
    }
    ++generation;
    int chosen = -1;
    std::int64_t budget = 0;
    if (closed()) {
      for (int cls : sched.order) {
        if (queues[cls].empty()) continue;
        const std::int64_t rem = cap_remaining(cls);
        if (rem <= 0) continue;
        chosen = cls;
        budget = rem;
        break;
      }
    } else if (!queues[0].empty()) {
      chosen = 0;
      budget = std::numeric_limits<std::int64_t>::max();
    }
    if (chosen < 0) return;
    const Pending& head = queues[chosen].front();
    seg.active = true;
    seg.queue = chosen;
    seg.start = std::max(t, link_free);
    seg.planned = std::min(head.remaining, budget);
    seg.committed = 0;
    push(seg.start + seg.planned * ticks_per_byte, kService,
         static_cast<std::int64_t>(generation));
  }

  void admit(const FlowEvent& f, int cls, int callback, bool control, bool at_head,
             Simulator& self) {
    auto& c = counters[cls];
    c.arrived += f.size;
    ep_arrived[cls] += f.size;
    metrics.max_flow_size = std::max(metrics.max_flow_size, f.size);
    const int q = queue_of(cls);
    if (queue_bytes[q] + f.size > link.queue_bytes) {
      c.dropped += f.size;
      ep_dropped[cls] += f.size;
      if (control) metrics.feedback_dropped += f.size;
      log(now, "drop", q, f.id, f.size);
      if (callback >= 0) {
        const double when = static_cast<double>(now) / ticks_per_second;
        FlowCallback f = std::move(callbacks[callback]);
        f(self, when, true);
      }
      return;
    }
    Pending p{f.id, f.size, f.size, now, cls, callback, control};
    if (at_head)
      queues[q].push_front(p);
    else
      queues[q].push_back(p);
    queue_bytes[q] += f.size;
    c.queued += f.size;
    log(now, "enqueue", q, f.id, f.size);
  }

  void check_conservation() const {
    for (int i = 0; i < k; ++i)
      if (!counters[i].conserved())
        throw RuntimeError("byte conservation violated for class " + link.classes[i].str());
    for (std::size_t q = 0; q < queue_bytes.size(); ++q)
      if (queue_bytes[q] > link.queue_bytes || queue_bytes[q] < 0)
        throw RuntimeError("queue " + std::to_string(q) + " exceeds its capacity");
  }

  void close_epoch(std::int64_t e) {
    EpochRecord rec;
    rec.epoch = e;
    rec.classes.resize(k);
    std::int64_t delivered = 0, arrived = 0;
    for (int i = 0; i < k; ++i) {
      auto& r = rec.classes[i];
      r.arrived = ep_arrived[i];
      r.delivered = ep_delivered[i];
      r.dropped = ep_dropped[i];
      r.queued = counters[i].queued;
      r.share = shares[i];
      r.priority_rank = ranks[i];
      r.utilization = static_cast<double>(ep_delivered[i]) / static_cast<double>(epoch_bytes);
      delivered += ep_delivered[i];
      arrived += ep_arrived[i];
    }
    rec.utilization = static_cast<double>(delivered) / static_cast<double>(epoch_bytes);
    rec.offered_utilization = static_cast<double>(arrived) / static_cast<double>(epoch_bytes);
    rec.state = cur_state;
    rec.control = cur_control;
    if (delivered > epoch_bytes + metrics.max_flow_size) ++metrics.capacity_violations;
    metrics.epochs.push_back(std::move(rec));
    last_delivered = ep_delivered;
  }

  ControlDecision decide(std::int64_t e, const Vector& x) {
    const ControllerSpec& ctl = *opt.controller;
    if (ctl.policy == ControlPolicy::RandomExcitation) {
      if (!excitation_grid) excitation_grid = kernels::enumerate_grid(ctl.model.U, ctl.grid);
      ControlDecision d;
      const auto idx = rng.uniform_int(0, static_cast<std::int64_t>(excitation_grid->size()) - 1);
      d.u = excitation_grid->point(static_cast<std::size_t>(idx));
      d.priority_order.resize(k);
      std::iota(d.priority_order.begin(), d.priority_order.end(), 0);
      d.epoch_index = e;
      return d;
    }
    ControlDecision d =
        allocate_control(ctl.model, ctl.weights, x, ctl.horizon, ctl.grid, ctl.kernel);
    d.epoch_index = e;
    return d;
  }

  void open_epoch(std::int64_t e, Simulator& self) {
    std::fill(ep_arrived.begin(), ep_arrived.end(), 0);
    std::fill(ep_delivered.begin(), ep_delivered.end(), 0);
    std::fill(ep_dropped.begin(), ep_dropped.end(), 0);
    std::fill(cap_used.begin(), cap_used.end(), 0);
    if (!closed()) return;

    const ControllerSpec& ctl = *opt.controller;
    cur_state = observe_state(counters, link, last_delivered);
    if (!ctl.model.X.contains(cur_state)) ++metrics.state_violations;
    const ControlDecision d = decide(e, cur_state);
    sched = apply_decision(d, ctl.model.U, link);
    cur_control = d.u;
    for (int i = 0; i < k; ++i) shares[i] = d.u[i];
    for (int r = 0; r < k; ++r) ranks[d.priority_order[r]] = r;

    if (ctl.feedback_message_bytes > 0) {
      FlowEvent msg;
      msg.id = next_control_id--;
      msg.arrival_time = static_cast<double>(now) / ticks_per_second;
      msg.size = ctl.feedback_message_bytes;
      msg.src = Zone::NetworkCore;
      msg.dst = Zone::LocalServer;
      msg.app = AppKind::Service;
      metrics.feedback_injected += msg.size;
      admit(msg, feedback_class, -1, true, true, self);
    }
  }
};

Simulator::Simulator(LinkSpec link, SimOptions options)
    : link_(std::move(link)), impl_(std::make_unique<Impl>()) {
  link_.validate();
  if (options.epochs < 1) throw ConfigError("simulation needs at least one epoch");
  Impl& s = *impl_;
  s.link = link_;
  s.opt = std::move(options);
  s.k = link_.class_count();

  const double rate = link_.bytes_per_second();
  // A tick is at most 10 ps; each byte spans a whole number of ticks.
  s.ticks_per_byte = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(8e11 / link_.capacity_bps)));
  s.ticks_per_second = static_cast<double>(s.ticks_per_byte) * rate;
  s.epoch_bytes = link_.epoch_bytes();
  s.epoch_ticks = s.epoch_bytes * s.ticks_per_byte;
  if (static_cast<double>(s.epoch_ticks) * static_cast<double>(s.opt.epochs + 1) > 9e18)
    throw ConfigError("simulation horizon overflows the tick clock");
  s.prop_ticks = to_tick(link_.propagation_delay);

  if (s.closed()) {
    if (!s.opt.controller) throw ConfigError("closed mode needs a controller");
    const auto& ctl = *s.opt.controller;
    ctl.model.validate();
    ctl.weights.validate();
    if (ctl.model.n() != 2 * s.k || ctl.model.m() != s.k)
      throw DimensionError("closed mode with " + std::to_string(s.k) +
                           " classes needs a model with n=" + std::to_string(2 * s.k) +
                           ", m=" + std::to_string(s.k) + "; got n=" +
                           std::to_string(ctl.model.n()) + ", m=" + std::to_string(ctl.model.m()));
    if (ctl.weights.Q.rows() != ctl.model.n() || ctl.weights.R.rows() != ctl.model.m())
      throw DimensionError("cost weights do not match the model");
    if (ctl.horizon < 1 || ctl.grid < 2) throw ConfigError("controller needs horizon >= 1, grid >= 2");
    if (ctl.feedback_message_bytes < 0) throw ConfigError("feedback message size must be >= 0");
    if (ctl.feedback_message_bytes > 0) {
      s.feedback_class = link_.class_index({ZoneClass::A, AppKind::Service});
      if (s.feedback_class < 0)
        throw ConfigError("feedback messages need an A-Service queue in link.classes");
    }
  }

  const int nq = s.closed() ? s.k : 1;
  s.queues.resize(nq);
  s.queue_bytes.assign(nq, 0);
  s.counters.assign(s.k, {});
  s.ep_arrived.assign(s.k, 0);
  s.ep_delivered.assign(s.k, 0);
  s.ep_dropped.assign(s.k, 0);
  s.last_delivered.assign(s.k, 0);
  s.cap_used.assign(s.k, 0);
  s.shares.assign(s.k, 1.0);
  s.ranks.assign(s.k, 0);
  s.rng = Rng(mix_seed(s.opt.seed, 0xC0117Eull));

  s.metrics.mode = s.opt.mode;
  s.metrics.classes = link_.classes;
  s.metrics.epoch_bytes = s.epoch_bytes;
  s.metrics.epoch_seconds = static_cast<double>(s.epoch_bytes) / rate;
  s.metrics.latencies.resize(s.k);
}

Simulator::~Simulator() = default;

double Simulator::seconds(std::int64_t tick) const {
  return static_cast<double>(tick) / impl_->ticks_per_second;
}

std::int64_t Simulator::to_tick(double seconds) const {
  const double t = seconds * impl_->ticks_per_second;
  const double r = std::round(t);
  if (std::abs(t - r) <= 1e-6) return static_cast<std::int64_t>(r);
  return static_cast<std::int64_t>(std::ceil(t));
}

double Simulator::now() const { return seconds(impl_->now); }

double Simulator::ideal_transit(std::int64_t bytes) const {
  return seconds(bytes * impl_->ticks_per_byte + impl_->prop_ticks);
}

void Simulator::stop_at_epoch_end() {
  Impl& s = *impl_;
  s.opt.epochs = std::min(s.opt.epochs, s.now / s.epoch_ticks + 1);
}

void Simulator::add_trace(const std::vector<FlowEvent>& trace) {
  Impl& s = *impl_;
  double prev = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const FlowEvent& f = trace[i];
    if (!(f.arrival_time >= 0.0) || !std::isfinite(f.arrival_time))
      throw ConfigError("malformed trace: flow " + std::to_string(f.id) + " has a negative time");
    if (f.arrival_time < prev)
      throw ConfigError("malformed trace: not sorted at flow " + std::to_string(f.id));
    if (f.size < 1) throw ConfigError("malformed trace: flow " + std::to_string(f.id) + " is empty");
    prev = f.arrival_time;
    const int cls = link_.class_index(classify(f));
    if (cls < 0)
      throw ConfigError("malformed trace: flow " + std::to_string(f.id) + " has class " +
                        classify(f).str() + " with no queue on the link");
    s.offers.push_back({f, cls, -1});
    s.push(to_tick(f.arrival_time), kArrival, static_cast<std::int64_t>(s.offers.size() - 1));
  }
}

void Simulator::inject(const FlowEvent& flow, FlowCallback cb) {
  Impl& s = *impl_;
  if (flow.size < 1) throw ConfigError("injected flow must carry at least one byte");
  const int cls = link_.class_index(classify(flow));
  if (cls < 0)
    throw ConfigError("injected flow class " + classify(flow).str() + " has no queue on the link");
  s.callbacks.push_back(std::move(cb));
  FlowEvent f = flow;
  f.arrival_time = now();
  s.admit(f, cls, static_cast<int>(s.callbacks.size() - 1), false, false, *this);
}

void Simulator::at(double time, Action action) {
  Impl& s = *impl_;
  s.actions.push_back(std::move(action));
  s.push(std::max(s.now, to_tick(time)), kQuery, static_cast<std::int64_t>(s.actions.size() - 1));
}

SimMetrics Simulator::run() {
  Impl& s = *impl_;
  if (s.ran) throw RuntimeError("simulator already ran");
  s.ran = true;
  s.push(0, kEpoch, 0);

  while (!s.events.empty() && !s.stopped) {
    const Event ev = s.events.top();
    s.events.pop();
    // superseded by a later replan
    if (ev.kind == kService && static_cast<std::uint64_t>(ev.payload) != s.generation) continue;
    s.now = ev.tick;
    s.commit(ev.tick, *this);

    switch (ev.kind) {
      case kEpoch: {
        const std::int64_t e = ev.payload;
        if (e > 0) s.close_epoch(e - 1);
        if (e == s.opt.epochs) {
          s.stopped = true;
          break;
        }
        s.open_epoch(e, *this);
        s.push((e + 1) * s.epoch_ticks, kEpoch, e + 1);
        break;
      }
      case kService:
        break;  // commit() already credited the bytes
      case kArrival: {
        const Offer& o = s.offers[static_cast<std::size_t>(ev.payload)];
        s.admit(o.flow, o.cls, o.callback, false, false, *this);
        break;
      }
      case kQuery: {
        // Moved out: the action may append to `actions`, and runs only once.
        Action a = std::move(s.actions[static_cast<std::size_t>(ev.payload)]);
        a(*this);
        break;
      }
    }
    if (s.stopped) break;
    s.replan(ev.tick);
    if (s.opt.check_every_event) s.check_conservation();
  }
  s.check_conservation();
  s.metrics.totals = s.counters;
  return std::move(s.metrics);
}

SimMetrics run_simulation(const std::vector<FlowEvent>& trace, const LinkSpec& link,
                          const SimOptions& options) {
  Simulator sim(link, options);
  sim.add_trace(trace);
  return sim.run();
}

void write_epoch_csv(std::ostream& os, const SimMetrics& m) {
  os << "epoch,class,arrived,delivered,dropped,queued,share,priority_rank,utilization\n";
  for (const auto& e : m.epochs)
    for (std::size_t i = 0; i < e.classes.size(); ++i) {
      const auto& c = e.classes[i];
      os << e.epoch << ',' << m.classes[i].str() << ',' << c.arrived << ',' << c.delivered << ','
         << c.dropped << ',' << c.queued << ',' << format_sig9(c.share) << ','
         << c.priority_rank << ',' << format_sig9(c.utilization) << '\n';
    }
}

}  // namespace hcqos
