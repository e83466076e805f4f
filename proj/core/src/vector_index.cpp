#include "skbqa/vector_index.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <future>

#include <nlohmann/json.hpp>

#include "http_util.hpp"
#include "skbqa/error.hpp"
#include "skbqa/skb.hpp"

namespace skbqa {

using nlohmann::json;

bool Vector::is_zero() const {
  return std::all_of(components.begin(), components.end(), [](double x) { return x == 0.0; });
}

double Vector::norm() const {
  double s = 0.0;
  for (double x : components) s += x * x;
  return std::sqrt(s);
}

double cosine(const Vector& u, const Vector& v) {
  if (u.dim() != v.dim()) {
    throw InvalidArgument("cosine: dimension mismatch (" + std::to_string(u.dim()) + " vs " +
                          std::to_string(v.dim()) + ")");
  }
  double dot = 0.0;
  double nu = 0.0;
  double nv = 0.0;
  for (std::size_t i = 0; i < u.dim(); ++i) {
    dot += u.components[i] * v.components[i];
    nu += u.components[i] * u.components[i];
    nv += v.components[i] * v.components[i];
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

Vector EmbeddingProvider::embed(std::string_view text) {
  std::string owned(text);
  auto out = embed_batch(std::span<const std::string>(&owned, 1));
  return std::move(out.at(0));
}

// ---------------------------------------------------------------------------

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

HashEmbedder::HashEmbedder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw InvalidArgument("HashEmbedder: dim must be positive");
}

std::string HashEmbedder::fingerprint() const {
  return "hash-bow-fnv1a:dim=" + std::to_string(dim_);
}

Vector HashEmbedder::embed_one(std::string_view text) const {
  Vector v;
  v.components.assign(dim_, 0.0);
  v.origin = fingerprint();
  for (const auto& tok : tokenize(text)) v.components[fnv1a(tok) % dim_] += 1.0;
  double n = v.norm();
  if (n > 0.0) {
    for (double& x : v.components) x /= n;
  }
  return v;
}

std::vector<Vector> HashEmbedder::embed_batch(std::span<const std::string> texts) {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

// ---------------------------------------------------------------------------

HttpEmbedderOptions HttpEmbedderOptions::from_env() {
  HttpEmbedderOptions o;
  const char* ep = std::getenv("EMB_ENDPOINT");
  if (ep == nullptr || *ep == '\0') throw ConfigError("EMB_ENDPOINT is not set");
  o.endpoint = ep;
  if (const char* key = std::getenv("EMB_API_KEY")) o.api_key = key;
  return o;
}

HttpEmbedder::HttpEmbedder(HttpEmbedderOptions opts) : opts_(std::move(opts)) {
  if (opts_.batch_size == 0) opts_.batch_size = 1;
  if (opts_.parallelism == 0) opts_.parallelism = 1;
}

std::string HttpEmbedder::fingerprint() const { return "http:" + opts_.endpoint; }

std::vector<Vector> HttpEmbedder::post_batch(std::span<const std::string> texts) {
  json body = {{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
  detail::HttpRequest req{opts_.endpoint, opts_.api_key, body.dump(), opts_.max_retries,
                          opts_.backoff, opts_.timeout};
  json resp;
  try {
    resp = json::parse(detail::post_with_retry(req));
  } catch (const json::parse_error& e) {
    throw TransportError(std::string("embedder returned malformed JSON: ") + e.what());
  }
  if (!resp.contains("vectors") || !resp["vectors"].is_array() ||
      resp["vectors"].size() != texts.size()) {
    throw TransportError("embedder response lacks one vector per input text");
  }
  std::vector<Vector> out;
  for (const auto& row : resp["vectors"]) {
    Vector v;
    v.origin = fingerprint();
    for (const auto& x : row) {
      double d = x.get<double>();
      if (!std::isfinite(d)) throw TransportError("embedder returned a non-finite component");
      v.components.push_back(d);
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<Vector> HttpEmbedder::embed_batch(std::span<const std::string> texts) {
  std::vector<std::span<const std::string>> batches;
  for (std::size_t i = 0; i < texts.size(); i += opts_.batch_size) {
    batches.push_back(texts.subspan(i, std::min(opts_.batch_size, texts.size() - i)));
  }
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < batches.size(); start += opts_.parallelism) {
    std::vector<std::future<std::vector<Vector>>> inflight;
    for (std::size_t b = start; b < std::min(batches.size(), start + opts_.parallelism); ++b) {
      inflight.push_back(
          std::async(std::launch::async, [this, batch = batches[b]] { return post_batch(batch); }));
    }
    for (auto& f : inflight) {
      for (auto& v : f.get()) out.push_back(std::move(v));
    }
  }
  for (const auto& v : out) {
    if (dim_ == 0) dim_ = v.dim();
    if (v.dim() != dim_) {
      throw InvalidArgument("embedder dimension changed from " + std::to_string(dim_) + " to " +
                            std::to_string(v.dim()));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

DocIndex::DocIndex(std::size_t dim, std::string fingerprint)
    : dim_(dim), fingerprint_(std::move(fingerprint)) {}

void DocIndex::add(std::string id, Vector vec) {
  if (vec.dim() != dim_) {
    throw InvalidArgument("index dimension is " + std::to_string(dim_) + ", vector for \"" + id +
                          "\" has " + std::to_string(vec.dim()));
  }
  for (double x : vec.components) {
    if (!std::isfinite(x)) throw InvalidArgument("non-finite component for \"" + id + "\"");
  }
  if (by_id_.contains(id)) throw InvalidArgument("duplicate index id \"" + id + "\"");
  vec.origin = fingerprint_;
  by_id_.emplace(id, entries_.size());
  entries_.push_back({std::move(id), std::move(vec)});
}

const Vector* DocIndex::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &entries_[it->second].vec;
}

void DocIndex::check_query(const Vector& query) const {
  if (query.dim() != dim_) {
    throw InvalidArgument("query dimension " + std::to_string(query.dim()) +
                          " does not match index dimension " + std::to_string(dim_));
  }
  if (!query.origin.empty() && query.origin != fingerprint_) {
    throw InvalidArgument("query embedded by \"" + query.origin + "\" but index was built by \"" +
                          fingerprint_ + "\"");
  }
}

std::vector<ScoredId> DocIndex::top_k(const Vector& query, std::size_t k) const {
  if (k == 0) throw InvalidArgument("top_k: k must be at least 1");
  check_query(query);
  std::vector<ScoredId> all;
  all.reserve(entries_.size());
  for (const auto& e : entries_) all.push_back({e.id, cosine(query, e.vec)});
  auto before = [](const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  };
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), before);
  all.resize(k);
  return all;
}

void DocIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LookupError("cannot write " + path.string());
  out << json{{"dim", dim_}, {"fingerprint", fingerprint_}}.dump() << '\n';
  for (const auto& e : entries_) {
    out << json{{"id", e.id}, {"vec", e.vec.components}}.dump() << '\n';
  }
}

DocIndex DocIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot open " + path.string());
  const auto src = path.string();
  std::string line;
  if (!std::getline(in, line)) throw ParseError(src, 1, "missing header line");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(src, 1, std::string("malformed header: ") + e.what());
  }
  if (!header.contains("dim") || !header.contains("fingerprint")) {
    throw ParseError(src, 1, "header must carry \"dim\" and \"fingerprint\"");
  }
  DocIndex idx(header["dim"].get<std::size_t>(), header["fingerprint"].get<std::string>());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = json::parse(line);
      Vector v;
      v.components = j.at("vec").get<std::vector<double>>();
      idx.add(j.at("id").get<std::string>(), std::move(v));
    } catch (const json::exception& e) {
      throw ParseError(src, line_no, e.what());
    } catch (const InvalidArgument& e) {
      throw ParseError(src, line_no, e.what());
    }
  }
  return idx;
}

bool operator==(const DocIndex& a, const DocIndex& b) {
  if (a.dim_ != b.dim_ || a.fingerprint_ != b.fingerprint_ || a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.entries_[i].id != b.entries_[i].id ||
        a.entries_[i].vec.components != b.entries_[i].vec.components) {
      return false;
    }
  }
  return true;
}

DocIndex build_index(const Skb& skb, EmbeddingProvider& provider, std::size_t batch_size) {
  std::vector<std::string> ids;
  std::vector<std::string> docs;
  for (const auto& e : skb.entities()) {
    if (!e.doc) continue;
    ids.push_back(e.id);
    docs.push_back(*e.doc);
  }
  if (docs.empty()) throw InvalidArgument("build_index: no entity carries a document");
  if (batch_size == 0) batch_size = docs.size();

  std::vector<Vector> vecs;
  for (std::size_t i = 0; i < docs.size(); i += batch_size) {
    auto n = std::min(batch_size, docs.size() - i);
    for (auto& v : provider.embed_batch(std::span<const std::string>(docs).subspan(i, n))) {
      vecs.push_back(std::move(v));
    }
  }
  DocIndex idx(vecs.front().dim(), provider.fingerprint());
  for (std::size_t i = 0; i < ids.size(); ++i) idx.add(std::move(ids[i]), std::move(vecs[i]));
  return idx;
}

}  // namespace skbqa
