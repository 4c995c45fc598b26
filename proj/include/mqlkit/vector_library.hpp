#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mqlkit/document_db.hpp"
#include "mqlkit/embedding.hpp"
#include "mqlkit/errors.hpp"

namespace mqlkit {

/// One training example held by the retrieval library. The field lists are
/// comma-joined strings so they embed as plain text.
struct ExampleRecord {
  std::string id;
  std::string nlq;
  std::string nosql;
  std::string db_fields;
  std::string result_fields;
  std::string db_id;
};

inline constexpr std::size_t kChannelCount = 4;
inline constexpr std::array<const char*, kChannelCount> kChannelNames = {
    "nlq", "nosql", "db_fields", "result_fields"};

struct RetrievalWeights {
  double w_nlq = 1.0;
  double w_other = 0.3;
};

/// Immutable embedding library: one unit vector per record per channel.
struct VectorLibrary {
  std::vector<ExampleRecord> records;
  std::vector<std::array<std::vector<double>, kChannelCount>> vectors;
  std::string provider_tag;
  std::size_t dimension = 0;
};

/// Channel texts for a retrieval query. Absent channels contribute zero to
/// the similarity.
struct QueryChannels {
  std::optional<std::string> nlq;
  std::optional<std::string> nosql;
  std::optional<std::string> db_fields;
  std::optional<std::string> result_fields;
};

struct EmbeddedQuery {
  std::array<std::optional<std::vector<double>>, kChannelCount> channels;
};

inline VectorLibrary build_vector_library(
    const std::vector<ExampleRecord>& training, Embedder& provider) {
  VectorLibrary lib;
  lib.provider_tag = provider.provider_tag();
  lib.dimension = provider.dimension();
  lib.records = training;
  if (training.empty()) return lib;

  std::vector<std::string> texts;
  texts.reserve(training.size() * kChannelCount);
  for (const ExampleRecord& r : training) {
    texts.push_back(r.nlq);
    texts.push_back(r.nosql);
    texts.push_back(r.db_fields);
    texts.push_back(r.result_fields);
  }
  std::vector<std::vector<double>> vecs = provider.embed(texts);
  if (vecs.size() != texts.size())
    throw ProviderError(0, "embedder returned " + std::to_string(vecs.size()) +
                               " vectors for " + std::to_string(texts.size()) +
                               " texts");
  lib.dimension = provider.dimension();
  if (lib.dimension == 0 && !vecs.empty()) lib.dimension = vecs.front().size();
  for (const std::vector<double>& v : vecs)
    if (v.size() != lib.dimension)
      throw DimensionMismatch("library vector dimension " +
                              std::to_string(v.size()) + ", expected " +
                              std::to_string(lib.dimension));
  lib.vectors.resize(training.size());
  for (std::size_t i = 0; i < training.size(); ++i)
    for (std::size_t c = 0; c < kChannelCount; ++c)
      lib.vectors[i][c] = std::move(vecs[i * kChannelCount + c]);
  return lib;
}

inline EmbeddedQuery embed_query(Embedder& provider, const QueryChannels& q) {
  std::array<const std::optional<std::string>*, kChannelCount> texts = {
      &q.nlq, &q.nosql, &q.db_fields, &q.result_fields};
  std::vector<std::string> present;
  for (const auto* t : texts)
    if (t->has_value()) present.push_back(**t);
  std::vector<std::vector<double>> vecs = provider.embed(present);
  EmbeddedQuery out;
  std::size_t next = 0;
  for (std::size_t c = 0; c < kChannelCount; ++c)
    if (texts[c]->has_value()) out.channels[c] = std::move(vecs[next++]);
  return out;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

/// Weighted similarity of one library record against an embedded query:
/// w_nlq on the nlq channel, w_other on each of the remaining channels.
inline double similarity(const EmbeddedQuery& query, const VectorLibrary& lib,
                         std::size_t record_index,
                         const RetrievalWeights& weights) {
  const auto& rec = lib.vectors[record_index];
  double sim = 0.0;
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    if (!query.channels[c]) continue;
    double w = (c == 0) ? weights.w_nlq : weights.w_other;
    sim += w * dot(*query.channels[c], rec[c]);
  }
  return sim;
}

inline std::vector<ExampleRecord> retrieve_top_k(const VectorLibrary& lib,
                                                 const EmbeddedQuery& query,
                                                 const RetrievalWeights& weights,
                                                 std::size_t k) {
  if (weights.w_nlq <= 0.0 || weights.w_other <= 0.0)
    throw Error("retrieval weights must be strictly positive");
  if (k == 0) return {};
  if (lib.records.empty()) throw EmptyLibrary();

  std::vector<std::size_t> order(lib.records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> sims(lib.records.size());
  for (std::size_t i = 0; i < sims.size(); ++i)
    sims[i] = similarity(query, lib, i, weights);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (sims[a] != sims[b]) return sims[a] > sims[b];
    return lib.records[a].id < lib.records[b].id;
  });

  std::size_t n = std::min(k, order.size());
  std::vector<ExampleRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(lib.records[order[i]]);
  return out;
}

/// Convenience wrapper: embed the query channels, then retrieve.
inline std::vector<ExampleRecord> retrieve_top_k(const VectorLibrary& lib,
                                                 Embedder& provider,
                                                 const QueryChannels& channels,
                                                 const RetrievalWeights& weights,
                                                 std::size_t k) {
  return retrieve_top_k(lib, embed_query(provider, channels), weights, k);
}

inline std::string library_to_json(const VectorLibrary& lib) {
  nlohmann::ordered_json root;
  root["format_version"] = 1;
  root["provider_tag"] = lib.provider_tag;
  root["dimension"] = lib.dimension;
  nlohmann::ordered_json channels = nlohmann::ordered_json::array();
  for (const char* name : kChannelNames) channels.push_back(name);
  root["channels"] = std::move(channels);
  nlohmann::ordered_json records = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < lib.records.size(); ++i) {
    const ExampleRecord& r = lib.records[i];
    nlohmann::ordered_json row;
    row["id"] = r.id;
    row["nlq"] = r.nlq;
    row["nosql"] = r.nosql;
    row["db_fields"] = r.db_fields;
    row["result_fields"] = r.result_fields;
    row["db_id"] = r.db_id;
    nlohmann::ordered_json vecs = nlohmann::ordered_json::array();
    for (const auto& v : lib.vectors[i]) vecs.push_back(v);
    row["vectors"] = std::move(vecs);
    records.push_back(std::move(row));
  }
  root["records"] = std::move(records);
  return root.dump() + "\n";
}

inline void save_vector_library(const VectorLibrary& lib,
                                const std::string& path) {
  write_text_file(path, library_to_json(lib));
}

inline VectorLibrary load_vector_library(const std::string& path) {
  auto j = nlohmann::ordered_json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("records") ||
      !j["records"].is_array())
    throw SchemaError("malformed vector library file: " + path);
  VectorLibrary lib;
  lib.provider_tag = j.value("provider_tag", std::string());
  if (j.contains("dimension") && j["dimension"].is_number_unsigned())
    lib.dimension = j["dimension"].get<std::size_t>();
  for (const auto& row : j["records"]) {
    if (!row.is_object())
      throw SchemaError("vector library record is not an object");
    ExampleRecord r;
    r.id = row.value("id", std::string());
    r.nlq = row.value("nlq", std::string());
    r.nosql = row.value("nosql", std::string());
    r.db_fields = row.value("db_fields", std::string());
    r.result_fields = row.value("result_fields", std::string());
    r.db_id = row.value("db_id", std::string());
    if (!row.contains("vectors") || !row["vectors"].is_array() ||
        row["vectors"].size() != kChannelCount)
      throw SchemaError("vector library record lacks " +
                        std::to_string(kChannelCount) + " channel vectors");
    std::array<std::vector<double>, kChannelCount> vecs;
    for (std::size_t c = 0; c < kChannelCount; ++c) {
      for (const auto& x : row["vectors"][c]) {
        if (!x.is_number()) throw SchemaError("non-numeric library vector entry");
        vecs[c].push_back(x.get<double>());
      }
      if (vecs[c].size() != lib.dimension)
        throw DimensionMismatch("library vector dimension " +
                                std::to_string(vecs[c].size()) + ", expected " +
                                std::to_string(lib.dimension));
    }
    lib.records.push_back(std::move(r));
    lib.vectors.push_back(std::move(vecs));
  }
  return lib;
}

}  // namespace mqlkit
