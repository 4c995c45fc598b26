#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include <json.hpp>

#include "mqlkit/errors.hpp"

namespace mqlkit {

/// Text embedding provider. Every returned vector is L2-normalized (or all
/// zero for empty input text), so cosine similarity is a plain dot product.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<std::vector<double>> embed(
      const std::vector<std::string>& texts) = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::string provider_tag() const = 0;
};

inline void l2_normalize(std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  if (sum == 0.0) return;
  double norm = std::sqrt(sum);
  for (double& x : v) x /= norm;
}

/// Deterministic offline embedder: signed feature hashing of character
/// n-grams (n = 1..3) with a seeded FNV-1a hash. Two processes with the
/// same seed and dimension produce bit-identical vectors.
class LocalHashEmbedder : public Embedder {
 public:
  explicit LocalHashEmbedder(std::uint64_t seed = 0, std::size_t dimension = 256)
      : seed_(seed), dimension_(dimension) {}

  std::vector<std::vector<double>> embed(
      const std::vector<std::string>& texts) override {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const std::string& t : texts) out.push_back(embed_one(t));
    return out;
  }

  std::size_t dimension() const override { return dimension_; }

  std::string provider_tag() const override {
    return "local-hash-v1:seed=" + std::to_string(seed_) +
           ":d=" + std::to_string(dimension_);
  }

 private:
  std::uint64_t hash_ngram(const char* data, std::size_t len) const {
    std::uint64_t h = 14695981039346656037ULL;
    for (int i = 0; i < 8; ++i) {
      h ^= (seed_ >> (8 * i)) & 0xFF;
      h *= 1099511628211ULL;
    }
    for (std::size_t i = 0; i < len; ++i) {
      h ^= static_cast<unsigned char>(data[i]);
      h *= 1099511628211ULL;
    }
    return h;
  }

  std::vector<double> embed_one(const std::string& text) const {
    std::vector<double> v(dimension_, 0.0);
    for (std::size_t n = 1; n <= 3; ++n) {
      if (text.size() < n) break;
      for (std::size_t i = 0; i + n <= text.size(); ++i) {
        std::uint64_t h = hash_ngram(text.data() + i, n);
        double sign = (h & 1) ? 1.0 : -1.0;
        v[(h >> 1) % dimension_] += sign;
      }
    }
    l2_normalize(v);
    return v;
  }

  std::uint64_t seed_;
  std::size_t dimension_;
};

/// Parse an embedding-API response body of the form
/// {"data": [{"embedding": [...]}, ...]}. Validates the vector count and a
/// uniform dimension (matching expected_dimension when nonzero).
inline std::vector<std::vector<double>> parse_embedding_response(
    const std::string& body, std::size_t expected_count,
    std::size_t expected_dimension) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.contains("data") || !j["data"].is_array())
    throw ProviderError(0, "embedding response is not a data array");
  const auto& data = j["data"];
  if (data.size() != expected_count)
    throw ProviderError(0, "embedding response has " +
                               std::to_string(data.size()) + " vectors for " +
                               std::to_string(expected_count) + " inputs");
  std::vector<std::vector<double>> out;
  out.reserve(data.size());
  for (const auto& item : data) {
    if (!item.is_object() || !item.contains("embedding") ||
        !item["embedding"].is_array())
      throw ProviderError(0, "embedding response item lacks an embedding array");
    std::vector<double> v;
    v.reserve(item["embedding"].size());
    for (const auto& x : item["embedding"]) {
      if (!x.is_number()) throw ProviderError(0, "non-numeric embedding entry");
      v.push_back(x.get<double>());
    }
    std::size_t want = expected_dimension ? expected_dimension
                                          : (out.empty() ? v.size() : out[0].size());
    if (v.size() != want)
      throw DimensionMismatch("embedding dimension " + std::to_string(v.size()) +
                              ", expected " + std::to_string(want));
    l2_normalize(v);
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace mqlkit
