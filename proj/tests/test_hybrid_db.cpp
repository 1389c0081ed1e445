#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "hcqos/errors.hpp"
#include "hcqos/hybrid_db.hpp"

using namespace hcqos;

namespace {

const TrafficClassLabel kBDb{ZoneClass::B, AppKind::Database};
const TrafficClassLabel kC{ZoneClass::C, std::nullopt};

Corpus tiny(std::vector<std::int64_t> sizes, std::int64_t meta = 2048) {
  Corpus c;
  c.metadata_bytes = meta;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    ArticleRecord a;
    a.article_id = static_cast<std::int64_t>(i) + 1;
    a.body_size = sizes[i];
    a.main_author = 1;
    a.location = BodyLocation::CloudBlob;
    c.articles.push_back(a);
    c.by_author[1].push_back(a.article_id);
  }
  return c;
}

LinkScenario idle(double bps = 1e9, double prop = 0.005) {
  LinkScenario s;
  s.link.capacity_bps = bps;
  s.link.queue_bytes = 8 << 20;
  s.link.propagation_delay = prop;
  s.link.epoch = 0.1;
  s.link.classes = {kBDb, kC};
  s.options.mode = FeedbackMode::Open;
  s.options.epochs = 100000;
  return s;
}

// five steps on an empty link, added up by hand
double hybrid_closed_form(const Corpus& c, const std::vector<std::int64_t>& ids,
                          const BackendLatency& b, const LinkSpec& l) {
  const double rows = static_cast<double>(ids.size());
  double t = b.lookup_s + b.per_row_s * rows;
  t += rows * c.metadata_bytes / b.local_bytes_per_s;
  for (auto id : ids) {
    const double size = static_cast<double>(c.article(id).body_size);
    t += b.blob_first_byte_s + size / b.blob_bytes_per_s;
    t += size * 8.0 / l.capacity_bps + l.propagation_delay;
  }
  return t;
}

}  // namespace

TEST(Corpus, SingleArticleWithinBounds) {
  CorpusSpec s;
  s.article_count = 1;
  s.seed = 3;
  const auto c = build_corpus(s);
  ASSERT_EQ(c.articles.size(), 1u);
  const auto& a = c.articles[0];
  EXPECT_GE(a.body_size, 100 * 1024);
  EXPECT_LE(a.body_size, 3 * 1024 * 1024);
  EXPECT_LE(a.coauthors.size(), 9u);
}

TEST(Corpus, RejectsZeroCount) {
  CorpusSpec s;
  s.article_count = 0;
  EXPECT_THROW(build_corpus(s), ConfigError);
}

TEST(Corpus, DeskScaleHitsByteTarget) {
  for (std::uint64_t seed : {1u, 2u, 3u, 7u}) {
    const auto c = build_corpus(CorpusSpec::desk_scale(0.001, seed));
    const double total = static_cast<double>(c.total_body_bytes());
    EXPECT_LT(std::abs(total - 27e6) / 27e6, 0.10) << seed << " " << total;
  }
  // larger scales: the sum over many articles against count * mean
  const auto big = build_corpus(CorpusSpec::desk_scale(0.1, 5));
  EXPECT_LT(std::abs(big.total_body_bytes() - 27e8) / 27e8, 0.10);
}

TEST(Corpus, InvariantsAndIndex) {
  CorpusSpec s;
  s.article_count = 3000;
  s.seed = 9;
  const auto c = build_corpus(s);
  std::vector<int> coauthor_counts(10, 0);
  std::int64_t below_mid = 0;
  const std::int64_t mid = (kMinArticleBytes + kMaxArticleBytes) / 2;
  for (const auto& a : c.articles) {
    EXPECT_GE(a.body_size, kMinArticleBytes);
    EXPECT_LE(a.body_size, kMaxArticleBytes);
    ASSERT_LE(a.coauthors.size(), 9u);
    ++coauthor_counts[a.coauthors.size()];
    std::set<std::int64_t> uniq(a.coauthors.begin(), a.coauthors.end());
    EXPECT_EQ(uniq.size(), a.coauthors.size());
    EXPECT_EQ(uniq.count(a.main_author), 0u);
    for (auto au : a.coauthors) {
      const auto& list = c.by_author.at(au);
      EXPECT_TRUE(std::binary_search(list.begin(), list.end(), a.article_id));
    }
    const auto& mine = c.by_author.at(a.main_author);
    EXPECT_TRUE(std::binary_search(mine.begin(), mine.end(), a.article_id));
    below_mid += a.body_size < mid;
  }
  // uniform counts over 0..9: each ~300, sd ~16
  for (int n : coauthor_counts) EXPECT_NEAR(n, 300, 80);
  EXPECT_NEAR(static_cast<double>(below_mid) / 3000.0, 0.5, 0.05);
  for (const auto& [author, ids] : c.by_author) EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
}

TEST(Corpus, Deterministic) {
  const auto s = CorpusSpec::desk_scale(0.001, 4);
  std::stringstream a, b;
  write_corpus_csv(a, build_corpus(s));
  write_corpus_csv(b, build_corpus(s));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')),
            "article_id,body_size,main_author,coauthor_count,location");
}

TEST(Query, UnknownAuthorIsLookupOnly) {
  const auto c = tiny({200000});
  BackendLatency b;
  for (auto p : {Protocol::Local4Step, Protocol::Hybrid5Step}) {
    const auto plan = plan_query(c, 1, 42, p);
    EXPECT_TRUE(plan.articles.empty());
    const auto r = execute_query(plan, c, b, idle());
    EXPECT_NEAR(r.latency_s, b.lookup_s, 1e-12);
    EXPECT_EQ(r.bytes, 0);
    EXPECT_EQ(r.link_bytes, 0);
  }
}

TEST(Query, LocalOneMegabyte) {
  const auto c = tiny({1'000'000});
  BackendLatency b;
  b.lookup_s = 0.001;
  b.local_bytes_per_s = 100e6;
  const auto r = execute_query(plan_query(c, 1, 1, Protocol::Local4Step), c, b, idle());
  const double expect = 0.001 + b.per_row_s + (1'000'000 + 2048) / 100e6;
  EXPECT_NEAR(r.latency_s, expect, 1e-9);
  EXPECT_GT(r.latency_s, 0.011);
  EXPECT_LT(r.latency_s, 0.012);
  EXPECT_EQ(r.link_bytes, 0);
  EXPECT_EQ(r.bytes, 1'000'000 + 2048);
}

TEST(Query, HybridIdleMatchesClosedForm) {
  const auto c = tiny({150000, 3000000, 777777, 102400});
  BackendLatency b;
  for (double bps : {1e9, 50e6, 8e6}) {
    const auto s = idle(bps, 0.003);
    const auto plan = plan_query(c, 1, 1, Protocol::Hybrid5Step);
    const auto r = execute_query(plan, c, b, s);
    EXPECT_NEAR(r.latency_s, hybrid_closed_form(c, plan.articles, b, s.link), 1e-9) << bps;
    EXPECT_NEAR(r.queue_s, 0.0, 1e-9);
    EXPECT_EQ(r.latency_s, r.meta_s + r.transfer_s + r.queue_s);
    EXPECT_NEAR(r.end_s - r.start_s, r.latency_s, 1e-9);
    EXPECT_EQ(r.link_bytes, c.total_body_bytes());
    EXPECT_EQ(r.bytes, c.total_body_bytes() + 4 * 2048);
    EXPECT_EQ(r.retries, 0);
  }
}

TEST(Query, ParallelFetchOverlaps) {
  const auto c = tiny({1000000, 1000000, 1000000, 1000000});
  BackendLatency seq;
  BackendLatency par = seq;
  par.fetch_parallelism = 4;
  const auto plan = plan_query(c, 1, 1, Protocol::Hybrid5Step);
  const auto a = execute_query(plan, c, seq, idle());
  const auto b = execute_query(plan, c, par, idle());
  EXPECT_LT(b.latency_s, a.latency_s);
  EXPECT_EQ(a.link_bytes, b.link_bytes);
  EXPECT_EQ(b.latency_s, b.meta_s + b.transfer_s + b.queue_s);
}

TEST(Query, SlowLocalStoreLosesOnIdleLink) {
  const auto c = tiny({3000000, 2500000});
  BackendLatency b;
  b.local_bytes_per_s = 5e6;
  const auto plan_l = plan_query(c, 1, 1, Protocol::Local4Step);
  const auto plan_h = plan_query(c, 1, 1, Protocol::Hybrid5Step);
  EXPECT_LT(execute_query(plan_h, c, b, idle()).latency_s,
            execute_query(plan_l, c, b, idle()).latency_s);
}

TEST(Query, CongestedLinkMakesHybridSlower) {
  const auto c = tiny({3000000, 2500000});
  BackendLatency b;
  auto s = idle(20e6, 0.01);
  TrafficProfile bg;
  bg.entries.push_back({kC, 0.95 * s.link.bytes_per_second() / 20000, SizeDistribution::fixed(20000), {}});
  s.background = generate_trace(bg, 60.0, 3);
  const auto rl = execute_query(plan_query(c, 1, 1, Protocol::Local4Step), c, b, s, 1.0);
  const auto rh = execute_query(plan_query(c, 1, 1, Protocol::Hybrid5Step), c, b, s, 1.0);
  EXPECT_GT(rh.latency_s, rl.latency_s);
  EXPECT_GT(rh.queue_s, 0.0);
}

TEST(Query, BackendValidation) {
  BackendLatency b;
  b.blob_bytes_per_s = 0;
  EXPECT_THROW(b.validate(), ConfigError);
  b = {};
  b.fetch_parallelism = 0;
  EXPECT_THROW(b.validate(), ConfigError);
  b = {};
  b.blob_kind = AppKind::Web;
  EXPECT_THROW(b.validate(), ConfigError);
}

TEST(Experiment, SameArticlesBothProtocolsAndBytesReconcile) {
  const auto c = build_corpus(CorpusSpec::desk_scale(0.001, 3)).hybrid_view();
  std::vector<std::int64_t> authors;
  for (const auto& [a, ids] : c.by_author) authors.push_back(a);
  authors.push_back(1'000'000);  // unknown
  BackendLatency b;
  const auto r = run_experiment(c, authors, b, idle(200e6), 0.0, 1.0);
  ASSERT_EQ(r.local.size(), authors.size());
  ASSERT_EQ(r.hybrid.size(), authors.size());
  std::int64_t link = 0;
  for (std::size_t i = 0; i < authors.size(); ++i) {
    EXPECT_EQ(r.local[i].articles, r.hybrid[i].articles);
    EXPECT_EQ(r.local[i].bytes, r.hybrid[i].bytes);
    std::int64_t body = 0;
    for (auto id : r.hybrid[i].articles) body += c.article(id).body_size;
    EXPECT_EQ(r.hybrid[i].link_bytes, body);
    EXPECT_EQ(r.hybrid[i].bytes, body + c.metadata_bytes * std::int64_t(r.hybrid[i].articles.size()));
    EXPECT_EQ(r.hybrid[i].latency_s, r.hybrid[i].meta_s + r.hybrid[i].transfer_s + r.hybrid[i].queue_s);
    EXPECT_EQ(r.local[i].latency_s, r.local[i].meta_s + r.local[i].transfer_s + r.local[i].queue_s);
    link += body;
  }
  EXPECT_EQ(r.link_metrics.aggregate().delivered, link);
  EXPECT_EQ(r.link_metrics.aggregate().dropped, 0);
  EXPECT_EQ(r.local.back().latency_s, r.hybrid.back().latency_s);
}

TEST(Experiment, AllEmptyQueriesTie) {
  const auto c = tiny({200000});
  BackendLatency b;
  const auto r = run_experiment(c, {7, 8, 9}, b, idle(), 0.0, 0.5);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r.local[i].latency_s, r.hybrid[i].latency_s);
  EXPECT_EQ(r.local_summary.mean, r.hybrid_summary.mean);
}

TEST(Experiment, CsvDeterministicAndSummary) {
  const auto c = build_corpus(CorpusSpec::desk_scale(0.001, 8)).hybrid_view();
  std::vector<std::int64_t> authors;
  for (const auto& [a, ids] : c.by_author) authors.push_back(a);
  BackendLatency b;
  std::string out[2];
  for (auto& s : out) {
    std::stringstream ss;
    write_experiment_csv(ss, run_experiment(c, authors, b, idle(100e6), 0.0, 1.0));
    s = ss.str();
  }
  EXPECT_EQ(out[0], out[1]);
  EXPECT_EQ(out[0].substr(0, out[0].find('\n')),
            "query_id,author,protocol,latency_s,bytes,meta_s,transfer_s,queue_s");
  std::vector<QueryResult> rs(4);
  for (int i = 0; i < 4; ++i) rs[i].latency_s = i + 1;
  const auto s = summarize(rs);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.p50, 2.5);
  EXPECT_DOUBLE_EQ(s.p95, 3.85);
}
