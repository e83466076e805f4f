#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "skbqa/error.hpp"
#include "skbqa/rng.hpp"
#include "skbqa/vector_index.hpp"
#include "support.hpp"

namespace skbqa {
namespace {

using json = nlohmann::json;

Vector raw(std::vector<double> c) { return Vector{std::move(c), ""}; }

TEST(Cosine, Basics) {
  EXPECT_DOUBLE_EQ(cosine(raw({1, 0}), raw({0, 1})), 0.0);
  EXPECT_DOUBLE_EQ(cosine(raw({1, 2}), raw({2, 4})), 1.0);
  EXPECT_DOUBLE_EQ(cosine(raw({1, 0}), raw({-1, 0})), -1.0);
  EXPECT_DOUBLE_EQ(cosine(raw({0, 0}), raw({1, 1})), 0.0);
  EXPECT_THROW(cosine(raw({1}), raw({1, 2})), InvalidArgument);
}

TEST(Tokenize, LowercasesAndSplits) {
  EXPECT_EQ(tokenize("Hello, World-42 ok"),
            (std::vector<std::string>{"hello", "world", "42", "ok"}));
  EXPECT_TRUE(tokenize(" ,.; ").empty());
}

TEST(HashEmbedder, DeterministicUnitNorm) {
  HashEmbedder emb;
  auto a = emb.embed("symbolic computation engines");
  auto b = emb.embed("Symbolic   computation, engines");
  EXPECT_EQ(a.components, b.components);
  EXPECT_NEAR(a.norm(), 1.0, 1e-12);
  EXPECT_EQ(a.dim(), 256u);
  EXPECT_EQ(a.origin, emb.fingerprint());
  EXPECT_EQ(emb.fingerprint(), "hash-bow-fnv1a:dim=256");
  EXPECT_TRUE(emb.embed("").is_zero());
}

TEST(DocIndex, TopKMatchesFullScanOracle) {
  Rng rng(5);
  const std::size_t dim = 8;
  DocIndex index(dim, "test");
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  for (int i = 0; i < 60; ++i) {
    std::vector<double> c(dim);
    for (auto& x : c) x = static_cast<double>(rng.between(-3, 3));
    auto id = "d" + std::to_string(100 + i);
    rows.emplace_back(id, c);
    index.add(id, raw(c));
  }
  for (int q = 0; q < 25; ++q) {
    std::vector<double> qc(dim);
    for (auto& x : qc) x = static_cast<double>(rng.between(-3, 3));
    // Oracle: explicit dot products, full sort by (score desc, id asc).
    std::vector<std::pair<double, std::string>> expected;
    double qn = 0;
    for (double x : qc) qn += x * x;
    for (const auto& [id, c] : rows) {
      double dot = 0;
      double n = 0;
      for (std::size_t i = 0; i < dim; ++i) {
        dot += qc[i] * c[i];
        n += c[i] * c[i];
      }
      double s = (qn == 0 || n == 0) ? 0.0 : dot / (std::sqrt(qn) * std::sqrt(n));
      expected.emplace_back(-s, id);
    }
    std::sort(expected.begin(), expected.end());
    auto got = index.top_k(raw(qc), 10);
    ASSERT_EQ(got.size(), 10u);
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].id, expected[i].second) << "query " << q << " rank " << i;
      EXPECT_NEAR(got[i].score, -expected[i].first, 1e-12);
    }
  }
}

TEST(DocIndex, KLargerThanSizeAndZeroK) {
  DocIndex index(2, "test");
  index.add("a", raw({1, 0}));
  EXPECT_EQ(index.top_k(raw({1, 0}), 5).size(), 1u);
  EXPECT_THROW(index.top_k(raw({1, 0}), 0), InvalidArgument);
}

TEST(DocIndex, RejectsForeignQueries) {
  DocIndex index(2, "provider-a");
  index.add("a", raw({1, 0}));
  EXPECT_THROW(index.top_k(raw({1, 0, 0}), 1), InvalidArgument);
  EXPECT_THROW(index.top_k(Vector{{1, 0}, "provider-b"}, 1), InvalidArgument);
  EXPECT_NO_THROW(index.top_k(Vector{{1, 0}, "provider-a"}, 1));
}

TEST(DocIndex, BuildSaveLoadRoundTrip) {
  testing::TempDir dir;
  auto skb = testing::mini_skb();
  HashEmbedder emb;
  auto index = build_index(skb, emb);
  ASSERT_EQ(index.size(), 4u);
  EXPECT_EQ(index.entries()[0].id, "P1");
  index.save(dir / "a.jsonl");
  auto again = build_index(skb, emb);
  again.save(dir / "b.jsonl");
  EXPECT_EQ(testing::read_text(dir / "a.jsonl"), testing::read_text(dir / "b.jsonl"));
  auto loaded = DocIndex::load(dir / "a.jsonl");
  EXPECT_TRUE(loaded == index);
  auto q = emb.embed(testing::kMiniQuestion);
  EXPECT_EQ(loaded.top_k(q, 4), index.top_k(q, 4));
}

// Embedding service double: vector = [text length, batch size].
class EmbedServer {
 public:
  explicit EmbedServer(int failures_before_success) : failures_(failures_before_success) {
    server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      if (failures_.fetch_sub(1) > 0) {
        res.status = 503;
        return;
      }
      auto body = json::parse(req.body);
      json vectors = json::array();
      for (const auto& t : body["texts"]) {
        vectors.push_back({static_cast<double>(t.get<std::string>().size()),
                           static_cast<double>(body["texts"].size())});
      }
      auth_ = req.get_header_value("Authorization");
      res.set_content(json{{"vectors", vectors}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~EmbedServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/embed"; }
  int requests() const { return requests_.load(); }
  std::string auth() const { return auth_; }

 private:
  httplib::Server server_;
  std::atomic<int> failures_;
  std::atomic<int> requests_{0};
  std::string auth_;
  int port_ = 0;
  std::thread thread_;
};

TEST(HttpEmbedder, BatchesInOrder) {
  EmbedServer server(0);
  HttpEmbedderOptions opts;
  opts.endpoint = server.url();
  opts.api_key = "k";
  opts.batch_size = 2;
  opts.parallelism = 3;
  opts.backoff = std::chrono::milliseconds(1);
  HttpEmbedder emb(opts);
  std::vector<std::string> texts{"a", "bb", "ccc", "dddd", "eeeee"};
  auto vs = emb.embed_batch(texts);
  ASSERT_EQ(vs.size(), 5u);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    EXPECT_EQ(vs[i].components[0], static_cast<double>(texts[i].size()));
    EXPECT_EQ(vs[i].origin, "http:" + server.url());
  }
  EXPECT_EQ(vs[4].components[1], 1.0);
  EXPECT_EQ(server.requests(), 3);
  EXPECT_EQ(server.auth(), "Bearer k");
}

TEST(HttpEmbedder, RetriesTransientFailures) {
  EmbedServer server(2);
  HttpEmbedderOptions opts;
  opts.endpoint = server.url();
  opts.max_retries = 3;
  opts.backoff = std::chrono::milliseconds(1);
  HttpEmbedder emb(opts);
  auto v = emb.embed("abc");
  EXPECT_EQ(v.components[0], 3.0);
  EXPECT_EQ(server.requests(), 3);
}

TEST(HttpEmbedder, GivesUpAfterRetries) {
  EmbedServer server(100);
  HttpEmbedderOptions opts;
  opts.endpoint = server.url();
  opts.max_retries = 2;
  opts.backoff = std::chrono::milliseconds(1);
  HttpEmbedder emb(opts);
  EXPECT_THROW(emb.embed("abc"), TransportError);
  EXPECT_EQ(server.requests(), 3);
}

TEST(HttpEmbedder, UnreachableEndpointIsTransportError) {
  HttpEmbedderOptions opts;
  opts.endpoint = "http://127.0.0.1:1/embed";
  opts.max_retries = 1;
  opts.backoff = std::chrono::milliseconds(1);
  opts.timeout = std::chrono::seconds(2);
  HttpEmbedder emb(opts);
  EXPECT_THROW(emb.embed("abc"), TransportError);
}

}  // namespace
}  // namespace skbqa
