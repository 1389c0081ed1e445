#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "hcqos/netsim.hpp"

namespace hcqos {

inline constexpr std::int64_t kMinArticleBytes = 100 * 1024;
inline constexpr std::int64_t kMaxArticleBytes = 3 * 1024 * 1024;
inline constexpr int kMaxCoauthors = 9;
/// Size of the article bodies held in the cloud store at full scale.
inline constexpr double kFullCorpusBytes = 27e9;

enum class BodyLocation { LocalStore, CloudBlob };
std::string_view to_string(BodyLocation l);

struct ArticleRecord {
  std::int64_t article_id = 0;
  std::int64_t body_size = 0;
  std::int64_t main_author = 0;
  std::vector<std::int64_t> coauthors;
  BodyLocation location = BodyLocation::LocalStore;
};

struct CorpusSpec {
  std::int64_t article_count = 0;
  std::int64_t total_body_target = 0;  // informational once article_count is set
  std::int64_t metadata_bytes = 2048;  // per article row
  std::int64_t author_count = 0;       // 0: twice the article count, at least 10
  std::uint64_t seed = 1;

  /// Article count chosen so the expected body total is `scale` of the full corpus.
  static CorpusSpec desk_scale(double scale, std::uint64_t seed);
};

struct Corpus {
  std::vector<ArticleRecord> articles;                        // by article_id - 1
  std::map<std::int64_t, std::vector<std::int64_t>> by_author;  // author -> sorted article ids
  std::int64_t metadata_bytes = 0;

  std::int64_t total_body_bytes() const;
  const ArticleRecord& article(std::int64_t id) const { return articles.at(id - 1); }
  /// The same corpus with every body moved to the cloud store.
  Corpus hybrid_view() const;
};

/// Sizes use stratified uniform sampling over [100 KiB, 3 MiB]: each size is
/// marginally uniform and the total tracks count * mean closely.
Corpus build_corpus(const CorpusSpec& spec);

void write_corpus_csv(std::ostream& os, const Corpus& corpus);

enum class Protocol { Local4Step, Hybrid5Step };
std::string_view to_string(Protocol p);

struct QueryPlan {
  std::int64_t query_id = 0;
  std::int64_t author = 0;
  std::vector<std::int64_t> articles;  // resolved article ids, sorted
  Protocol protocol = Protocol::Local4Step;
};

QueryPlan plan_query(const Corpus& corpus, std::int64_t query_id, std::int64_t author,
                     Protocol protocol);

/// Stand-ins for the SQL server, the blob store and the local file store.
struct BackendLatency {
  double lookup_s = 0.001;              // per query
  double per_row_s = 0.0001;            // per result row
  double blob_first_byte_s = 0.02;
  double blob_bytes_per_s = 50e6;
  double local_bytes_per_s = 100e6;     // local store and client/service path
  int fetch_parallelism = 1;            // blob fetches in flight (1 = sequential)
  AppKind blob_kind = AppKind::Database;
  double retry_backoff_s = 0.05;        // after a blob transfer is dropped

  void validate() const;
};

struct QueryResult {
  std::int64_t query_id = 0;
  std::int64_t author = 0;
  Protocol protocol = Protocol::Local4Step;
  std::vector<std::int64_t> articles;
  std::int64_t bytes = 0;       // metadata + bodies returned to the client
  std::int64_t link_bytes = 0;  // bytes carried by the bottleneck link
  double meta_s = 0.0;          // metadata lookup
  double transfer_s = 0.0;      // moving bytes at backend and link rates
  double queue_s = 0.0;         // waiting on the bottleneck (queueing, retries)
  double latency_s = 0.0;       // meta_s + transfer_s + queue_s
  double start_s = 0.0;
  double end_s = 0.0;
  int retries = 0;
  bool completed = false;
};

/// Drives one query through the simulator starting at `start`; the result is
/// filled in when its last step completes.
void schedule_query(Simulator& sim, const Corpus& corpus, const QueryPlan& plan,
                    const BackendLatency& backends, double start, QueryResult& out);

/// Link scenario a query mix runs against.
struct LinkScenario {
  LinkSpec link;
  SimOptions options;                 // mode, controller, seed; epochs is the horizon cap
  std::vector<FlowEvent> background;  // competing traffic
};

/// Runs a single query alone on the scenario.
QueryResult execute_query(const QueryPlan& plan, const Corpus& corpus,
                          const BackendLatency& backends, const LinkScenario& scenario,
                          double start = 0.0);

struct LatencySummary {
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
};

struct ExperimentResult {
  std::vector<QueryResult> local;
  std::vector<QueryResult> hybrid;
  LatencySummary local_summary;
  LatencySummary hybrid_summary;
  SimMetrics link_metrics;
};

/// Each author query is issued at first_start + i * spacing under both
/// protocols within one simulation of the scenario.
ExperimentResult run_experiment(const Corpus& corpus, const std::vector<std::int64_t>& authors,
                                const BackendLatency& backends, const LinkScenario& scenario,
                                double first_start, double spacing);

LatencySummary summarize(const std::vector<QueryResult>& results);

void write_experiment_csv(std::ostream& os, const ExperimentResult& result);

}  // namespace hcqos
