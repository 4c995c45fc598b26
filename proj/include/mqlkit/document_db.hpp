#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mqlkit/doc_value.hpp"
#include "mqlkit/errors.hpp"
#include "mqlkit/json_io.hpp"

namespace mqlkit {

/// Named collections of documents. Immutable after load; queries never
/// mutate it, so one database may serve many concurrent executions.
struct DocumentDatabase {
  std::string name;
  std::map<std::string, std::vector<DocValue>> collections;

  bool has_collection(const std::string& c) const {
    return collections.count(c) != 0;
  }
  const std::vector<DocValue>& collection(const std::string& c) const {
    auto it = collections.find(c);
    if (it == collections.end()) throw UnknownCollection(c);
    return it->second;
  }
};

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

namespace detail {

inline std::vector<DocValue> docs_from_json(const DocValue& v,
                                            const std::string& where) {
  if (!v.is_array())
    throw SchemaError(where + ": collection content must be a JSON array");
  std::vector<DocValue> docs;
  docs.reserve(v.size());
  for (const DocValue& d : v.elements()) {
    if (!d.is_obj())
      throw SchemaError(where + ": collection elements must be objects");
    docs.push_back(d);
  }
  return docs;
}

}  // namespace detail

/// Load a database bundle: either a directory holding one `<collection>.json`
/// array file per collection, or a single JSON object file
/// {"collection": [docs...]}. Directory entries load in name order.
inline DocumentDatabase load_database(const std::filesystem::path& path) {
  DocumentDatabase db;
  if (std::filesystem::is_directory(path)) {
    db.name = path.filename().string();
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path))
      if (entry.is_regular_file() && entry.path().extension() == ".json")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      DocValue v;
      try {
        v = parse_strict_json(read_text_file(f));
      } catch (const SchemaError& e) {
        throw SchemaError(f.string() + ": " + e.what());
      }
      db.collections[f.stem().string()] =
          detail::docs_from_json(v, f.string());
    }
    return db;
  }
  if (!std::filesystem::exists(path))
    throw IoError("no such database bundle: " + path.string());
  db.name = path.stem().string();
  DocValue v;
  try {
    v = parse_strict_json(read_text_file(path));
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  if (!v.is_obj())
    throw SchemaError(path.string() + ": bundle must be a JSON object");
  for (std::size_t i = 0; i < v.size(); ++i)
    db.collections[v.key_at(i)] =
        detail::docs_from_json(v.value_at(i), path.string());
  return db;
}

/// Write a database as a single-file bundle {collection: [docs...]}.
inline void save_database(const DocumentDatabase& db,
                          const std::filesystem::path& path) {
  DocValue bundle = DocValue::object();
  for (const auto& [name, docs] : db.collections)
    bundle.set(name, DocValue::array(docs));
  write_text_file(path, bundle.to_json() + "\n");
}

}  // namespace mqlkit
