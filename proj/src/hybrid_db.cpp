#include "hcqos/hybrid_db.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <ostream>

#include "hcqos/csv.hpp"
#include "hcqos/errors.hpp"
#include "hcqos/metrics.hpp"

namespace hcqos {

std::string_view to_string(BodyLocation l) {
  return l == BodyLocation::LocalStore ? "LocalStore" : "CloudBlob";
}

std::string_view to_string(Protocol p) {
  return p == Protocol::Local4Step ? "local" : "hybrid";
}

CorpusSpec CorpusSpec::desk_scale(double scale, std::uint64_t seed) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("corpus scale must be > 0");
  const double mean = 0.5 * static_cast<double>(kMinArticleBytes + kMaxArticleBytes);
  CorpusSpec spec;
  spec.total_body_target = std::llround(kFullCorpusBytes * scale);
  spec.article_count = std::max<std::int64_t>(1, std::llround(kFullCorpusBytes * scale / mean));
  spec.seed = seed;
  return spec;
}

std::int64_t Corpus::total_body_bytes() const {
  std::int64_t t = 0;
  for (const auto& a : articles) t += a.body_size;
  return t;
}

Corpus Corpus::hybrid_view() const {
  Corpus c = *this;
  for (auto& a : c.articles) a.location = BodyLocation::CloudBlob;
  return c;
}

Corpus build_corpus(const CorpusSpec& spec) {
  if (spec.article_count <= 0) throw ConfigError("corpus.article_count must be > 0");
  if (spec.metadata_bytes < 0) throw ConfigError("corpus.metadata_bytes must be >= 0");
  const std::int64_t count = spec.article_count;
  const std::int64_t authors =
      spec.author_count > 0 ? spec.author_count : std::max<std::int64_t>(10, 2 * count);
  if (authors < 1) throw ConfigError("corpus.author_count must be > 0");

  Rng rng(mix_seed(spec.seed, 0xA271C1Eull));
  std::vector<std::int64_t> strata(count);
  std::iota(strata.begin(), strata.end(), 0);
  for (std::int64_t i = count - 1; i > 0; --i)
    std::swap(strata[i], strata[rng.uniform_int(0, i)]);

  Corpus corpus;
  corpus.metadata_bytes = spec.metadata_bytes;
  corpus.articles.reserve(count);
  const double span = static_cast<double>(kMaxArticleBytes - kMinArticleBytes);
  std::vector<std::int64_t> pool(authors);
  for (std::int64_t i = 0; i < count; ++i) {
    ArticleRecord a;
    a.article_id = i + 1;
    const double u = (static_cast<double>(strata[i]) + rng.uniform()) / static_cast<double>(count);
    a.body_size = std::clamp<std::int64_t>(
        kMinArticleBytes + std::llround(u * span), kMinArticleBytes, kMaxArticleBytes);
    a.main_author = rng.uniform_int(1, authors);
    const std::int64_t want = rng.uniform_int(0, kMaxCoauthors);
    const std::int64_t n_co = std::min<std::int64_t>(want, authors - 1);
    // Partial Fisher-Yates over the authors other than the main one.
    std::iota(pool.begin(), pool.end(), 1);
    std::swap(pool[a.main_author - 1], pool[authors - 1]);
    for (std::int64_t j = 0; j < n_co; ++j) {
      const std::int64_t pick = rng.uniform_int(j, authors - 2);
      std::swap(pool[j], pool[pick]);
      a.coauthors.push_back(pool[j]);
    }
    corpus.by_author[a.main_author].push_back(a.article_id);
    for (auto co : a.coauthors) corpus.by_author[co].push_back(a.article_id);
    corpus.articles.push_back(std::move(a));
  }
  for (auto& [author, ids] : corpus.by_author) std::sort(ids.begin(), ids.end());
  return corpus;
}

void write_corpus_csv(std::ostream& os, const Corpus& corpus) {
  os << "article_id,body_size,main_author,coauthor_count,location\n";
  for (const auto& a : corpus.articles)
    os << a.article_id << ',' << a.body_size << ',' << a.main_author << ',' << a.coauthors.size()
       << ',' << to_string(a.location) << '\n';
}

QueryPlan plan_query(const Corpus& corpus, std::int64_t query_id, std::int64_t author,
                     Protocol protocol) {
  QueryPlan p;
  p.query_id = query_id;
  p.author = author;
  p.protocol = protocol;
  if (auto it = corpus.by_author.find(author); it != corpus.by_author.end()) p.articles = it->second;
  return p;
}

void BackendLatency::validate() const {
  if (!(lookup_s > 0.0)) throw ConfigError("backends.lookup_s must be > 0");
  if (!(per_row_s > 0.0)) throw ConfigError("backends.per_row_s must be > 0");
  if (!(blob_first_byte_s > 0.0)) throw ConfigError("backends.blob_first_byte_s must be > 0");
  if (!(blob_bytes_per_s > 0.0)) throw ConfigError("backends.blob_bytes_per_s must be > 0");
  if (!(local_bytes_per_s > 0.0)) throw ConfigError("backends.local_bytes_per_s must be > 0");
  if (fetch_parallelism < 1) throw ConfigError("backends.fetch_parallelism must be >= 1");
  if (!(retry_backoff_s > 0.0)) throw ConfigError("backends.retry_backoff_s must be > 0");
  if (blob_kind != AppKind::Database && blob_kind != AppKind::File)
    throw ConfigError("backends.blob_kind must be Database or File");
}

namespace {

struct Lane {
  double transfer = 0.0;
  double queue = 0.0;
  double end = 0.0;
  bool done = false;
};

struct QueryRun {
  const Corpus* corpus = nullptr;
  BackendLatency backends;
  QueryPlan plan;
  QueryResult* out = nullptr;
  double t0 = 0.0;
  double t_meta = 0.0;
  double t_client = 0.0;
  std::size_t next_article = 0;
  std::vector<Lane> lanes;
  int lanes_open = 0;
};

void finish(QueryRun& q) {
  QueryResult& r = *q.out;
  const Lane* critical = nullptr;
  for (const auto& l : q.lanes)
    if (!critical || l.end > critical->end) critical = &l;
  r.transfer_s = q.t_client - q.t_meta;
  if (critical) {
    r.transfer_s += critical->transfer;
    r.queue_s = critical->queue;
    r.end_s = critical->end;
  } else {
    r.end_s = q.t_client;
  }
  r.latency_s = r.meta_s + r.transfer_s + r.queue_s;
  r.completed = true;
}

void start_fetch(Simulator& sim, const std::shared_ptr<QueryRun>& q, std::size_t lane);

void offer_blob(Simulator& sim, const std::shared_ptr<QueryRun>& q, std::size_t lane,
                const ArticleRecord& a, double served_at, double server_s) {
  FlowEvent f;
  f.id = -(q->plan.query_id * 1000 + static_cast<std::int64_t>(lane));
  f.size = a.body_size;
  f.src = Zone::PublicCloud;
  f.dst = Zone::LocalServer;
  f.app = q->backends.blob_kind;
  const std::int64_t size = a.body_size;
  sim.inject(f, [q, lane, size, served_at, server_s, &a](Simulator& s, double when, bool dropped) {
    if (dropped) {
      ++q->out->retries;
      s.at(when + q->backends.retry_backoff_s, [q, lane, served_at, server_s, &a](Simulator& s2) {
        offer_blob(s2, q, lane, a, served_at, server_s);
      });
      return;
    }
    const double ideal = s.ideal_transit(size);
    Lane& l = q->lanes[lane];
    l.transfer += server_s + ideal;
    l.queue += (when - served_at) - ideal;
    l.end = when;
    q->out->link_bytes += size;
    start_fetch(s, q, lane);
  });
}

void start_fetch(Simulator& sim, const std::shared_ptr<QueryRun>& q, std::size_t lane) {
  if (q->next_article >= q->plan.articles.size()) {
    Lane& l = q->lanes[lane];
    if (!l.done) {
      l.done = true;
      if (l.end < q->t_client) l.end = q->t_client;
      if (--q->lanes_open == 0) finish(*q);
    }
    return;
  }
  const ArticleRecord& a = q->corpus->article(q->plan.articles[q->next_article++]);
  const double requested = sim.now();
  const double ready = requested + q->backends.blob_first_byte_s +
                       static_cast<double>(a.body_size) / q->backends.blob_bytes_per_s;
  sim.at(ready, [q, lane, requested, &a](Simulator& s) {
    const double served_at = s.now();
    offer_blob(s, q, lane, a, served_at, served_at - requested);
  });
}

}  // namespace

void schedule_query(Simulator& sim, const Corpus& corpus, const QueryPlan& plan,
                    const BackendLatency& backends, double start, QueryResult& out) {
  backends.validate();
  auto q = std::make_shared<QueryRun>();
  q->corpus = &corpus;
  q->backends = backends;
  q->plan = plan;
  q->out = &out;

  out = QueryResult{};
  out.query_id = plan.query_id;
  out.author = plan.author;
  out.protocol = plan.protocol;
  out.articles = plan.articles;
  std::int64_t body = 0;
  for (auto id : plan.articles) body += corpus.article(id).body_size;
  const auto rows = static_cast<std::int64_t>(plan.articles.size());
  const std::int64_t meta = rows * corpus.metadata_bytes;
  out.bytes = meta + body;

  sim.at(start, [q, rows, meta, body](Simulator& s) {
    q->t0 = s.now();
    q->out->start_s = q->t0;
    const double lookup = q->backends.lookup_s + q->backends.per_row_s * static_cast<double>(rows);
    // Steps 1-3: client -> service -> SQL server; metadata (and, locally, bodies) come back.
    s.at(q->t0 + lookup, [q, meta, body](Simulator& s2) {
      q->t_meta = s2.now();
      q->out->meta_s = q->t_meta - q->t0;
      const bool local = q->plan.protocol == Protocol::Local4Step;
      const double bytes = static_cast<double>(local ? meta + body : meta);
      s2.at(q->t_meta + bytes / q->backends.local_bytes_per_s, [q, local](Simulator& s3) {
        q->t_client = s3.now();
        if (local || q->plan.articles.empty()) {
          finish(*q);
          return;
        }
        // Step 5: the client fetches each body from the blob store over the link.
        const std::size_t lanes = std::min<std::size_t>(
            static_cast<std::size_t>(q->backends.fetch_parallelism), q->plan.articles.size());
        q->lanes.assign(lanes, Lane{});
        q->lanes_open = static_cast<int>(lanes);
        for (std::size_t l = 0; l < lanes; ++l) start_fetch(s3, q, l);
      });
    });
  });
}

QueryResult execute_query(const QueryPlan& plan, const Corpus& corpus,
                          const BackendLatency& backends, const LinkScenario& scenario,
                          double start) {
  Simulator sim(scenario.link, scenario.options);
  sim.add_trace(scenario.background);
  QueryResult out;
  schedule_query(sim, corpus, plan, backends, start, out);
  std::function<void(Simulator&)> poll;
  poll = [&](Simulator& s) {
    if (out.completed) {
      s.stop_at_epoch_end();
      return;
    }
    s.at(s.now() + scenario.link.epoch, poll);
  };
  sim.at(start, poll);
  sim.run();
  if (!out.completed)
    throw RuntimeError("query " + std::to_string(plan.query_id) +
                       " did not complete within the simulation horizon");
  return out;
}

LatencySummary summarize(const std::vector<QueryResult>& results) {
  LatencySummary s;
  if (results.empty()) return s;
  std::vector<double> lat;
  lat.reserve(results.size());
  double sum = 0.0;
  for (const auto& r : results) {
    lat.push_back(r.latency_s);
    sum += r.latency_s;
  }
  s.mean = sum / static_cast<double>(results.size());
  s.p50 = quantile(lat, 0.50);
  s.p95 = quantile(lat, 0.95);
  return s;
}

ExperimentResult run_experiment(const Corpus& corpus, const std::vector<std::int64_t>& authors,
                                const BackendLatency& backends, const LinkScenario& scenario,
                                double first_start, double spacing) {
  backends.validate();
  ExperimentResult r;
  const std::size_t n = authors.size();
  r.local.resize(n);
  r.hybrid.resize(n);
  Simulator sim(scenario.link, scenario.options);
  sim.add_trace(scenario.background);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = first_start + spacing * static_cast<double>(i);
    const auto id = static_cast<std::int64_t>(i + 1);
    schedule_query(sim, corpus, plan_query(corpus, id, authors[i], Protocol::Local4Step), backends,
                   t, r.local[i]);
    schedule_query(sim, corpus, plan_query(corpus, id, authors[i], Protocol::Hybrid5Step),
                   backends, t, r.hybrid[i]);
  }
  auto all_done = [&r] {
    for (const auto* v : {&r.local, &r.hybrid})
      for (const auto& q : *v)
        if (!q.completed) return false;
    return true;
  };
  std::function<void(Simulator&)> poll;
  poll = [&](Simulator& s) {
    if (all_done()) {
      s.stop_at_epoch_end();
      return;
    }
    s.at(s.now() + scenario.link.epoch, poll);
  };
  sim.at(first_start, poll);
  r.link_metrics = sim.run();
  if (!all_done())
    throw RuntimeError("experiment queries did not complete within the simulation horizon");
  r.local_summary = summarize(r.local);
  r.hybrid_summary = summarize(r.hybrid);
  return r;
}

void write_experiment_csv(std::ostream& os, const ExperimentResult& result) {
  os << "query_id,author,protocol,latency_s,bytes,meta_s,transfer_s,queue_s\n";
  const std::size_t n = std::max(result.local.size(), result.hybrid.size());
  for (std::size_t i = 0; i < n; ++i)
    for (const auto* v : {&result.local, &result.hybrid}) {
      if (i >= v->size()) continue;
      const QueryResult& q = (*v)[i];
      os << q.query_id << ',' << q.author << ',' << to_string(q.protocol) << ','
         << format_sig9(q.latency_s) << ',' << q.bytes << ',' << format_sig9(q.meta_s) << ','
         << format_sig9(q.transfer_s) << ',' << format_sig9(q.queue_s) << '\n';
    }
}

}  // namespace hcqos
