#pragma once
// Embedding providers and a brute-force cosine index over entity documents.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace skbqa {

class Skb;

struct Vector {
  std::vector<double> components;
  // Fingerprint of the provider that produced this vector; empty for raw
  // vectors built by hand.
  std::string origin;

  std::size_t dim() const { return components.size(); }
  bool is_zero() const;
  double norm() const;

  friend bool operator==(const Vector&, const Vector&) = default;
};

// 0 when either vector has zero norm. Throws InvalidArgument on dim mismatch.
double cosine(const Vector& u, const Vector& v);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::vector<Vector> embed_batch(std::span<const std::string> texts) = 0;
  virtual std::string fingerprint() const = 0;

  Vector embed(std::string_view text);
};

// Bag-of-tokens hashing embedder: lowercase, split on non-alphanumerics,
// FNV-1a each token into one of `dim` buckets, L2-normalise.
class HashEmbedder final : public EmbeddingProvider {
 public:
  explicit HashEmbedder(std::size_t dim = 256);

  std::vector<Vector> embed_batch(std::span<const std::string> texts) override;
  std::string fingerprint() const override;
  std::size_t dim() const { return dim_; }

  Vector embed_one(std::string_view text) const;

 private:
  std::size_t dim_;
};

std::vector<std::string> tokenize(std::string_view text);

struct HttpEmbedderOptions {
  std::string endpoint;  // full URL, e.g. http://localhost:8080/embed
  std::string api_key;
  std::size_t batch_size = 32;
  std::size_t parallelism = 4;
  int max_retries = 3;
  std::chrono::milliseconds backoff{500};
  std::chrono::seconds timeout{60};

  // EMB_ENDPOINT / EMB_API_KEY. Throws ConfigError when EMB_ENDPOINT is unset.
  static HttpEmbedderOptions from_env();
};

// POST {"texts": [...]} -> {"vectors": [[...], ...]} in input order.
class HttpEmbedder final : public EmbeddingProvider {
 public:
  explicit HttpEmbedder(HttpEmbedderOptions opts);

  std::vector<Vector> embed_batch(std::span<const std::string> texts) override;
  std::string fingerprint() const override;

 private:
  std::vector<Vector> post_batch(std::span<const std::string> texts);

  HttpEmbedderOptions opts_;
  std::size_t dim_ = 0;
};

struct ScoredId {
  std::string id;
  double score = 0.0;
  friend bool operator==(const ScoredId&, const ScoredId&) = default;
};

class DocIndex {
 public:
  struct Entry {
    std::string id;
    Vector vec;
  };

  DocIndex(std::size_t dim, std::string fingerprint);

  void add(std::string id, Vector vec);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t dim() const { return dim_; }
  const std::string& fingerprint() const { return fingerprint_; }
  std::span<const Entry> entries() const { return entries_; }
  const Vector* find(std::string_view id) const;

  // Sorted by score descending, ties by ascending id; length min(k, size()).
  std::vector<ScoredId> top_k(const Vector& query, std::size_t k) const;

  void save(const std::filesystem::path& path) const;
  static DocIndex load(const std::filesystem::path& path);

  friend bool operator==(const DocIndex& a, const DocIndex& b);

 private:
  void check_query(const Vector& query) const;

  std::size_t dim_;
  std::string fingerprint_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// One entry per entity carrying a document, in entity id order.
DocIndex build_index(const Skb& skb, EmbeddingProvider& provider, std::size_t batch_size = 64);

}  // namespace skbqa
