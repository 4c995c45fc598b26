#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mqlkit {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A fragment handed to the tolerant JSON decoder could not be repaired.
/// Carries the byte offset where decoding gave up.
class MalformedFragment : public Error {
 public:
  MalformedFragment(std::size_t position, const std::string& msg)
      : Error(msg + " (at offset " + std::to_string(position) + ")"),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Query text does not fit the shell-call grammar. Offset points at the
/// first byte the parser could not consume.
class ParseError : public Error {
 public:
  ParseError(std::size_t position, const std::string& msg)
      : Error(msg + " (at offset " + std::to_string(position) + ")"),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// The call on the collection is neither find nor aggregate.
class UnknownMethod : public ParseError {
 public:
  UnknownMethod(std::size_t position, const std::string& method)
      : ParseError(position, "unknown collection method '" + method + "'") {}
};

/// A stage, predicate, or expression uses syntax outside the supported
/// dialect. The engine throws this instead of guessing at semantics.
class UnsupportedOperator : public Error {
 public:
  explicit UnsupportedOperator(const std::string& what_failed)
      : Error("unsupported operator or form: " + what_failed) {}
};

/// The query (or a $lookup inside it) targets a collection the database
/// does not contain.
class UnknownCollection : public Error {
 public:
  explicit UnknownCollection(const std::string& name)
      : Error("unknown collection '" + name + "'"), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

/// Two accumulators in one $group stage would be renamed to the same
/// output name.
class NormalizationConflict : public Error {
 public:
  explicit NormalizationConflict(const std::string& msg) : Error(msg) {}
};

/// The foreign-key graph of a relational dump contains at least one cycle,
/// so no nesting order exists. Carries every elementary cycle found, each
/// rendered as "a -> b -> a".
class CycleError : public Error {
 public:
  explicit CycleError(std::vector<std::string> cycles)
      : Error(describe(cycles)), cycles_(std::move(cycles)) {}
  const std::vector<std::string>& cycles() const { return cycles_; }

 private:
  static std::string describe(const std::vector<std::string>& cycles) {
    std::string s = "foreign-key cycle(s) detected:";
    for (const auto& c : cycles) s += " [" + c + "]";
    return s;
  }
  std::vector<std::string> cycles_;
};

/// A connected table cluster has no sink table to serve as its collection
/// root (every table references another member).
class NoMainTable : public Error {
 public:
  explicit NoMainTable(const std::string& cluster)
      : Error("no main table in cluster {" + cluster + "}") {}
};

/// Filesystem trouble: missing file, unreadable file, failed write.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

/// A relational dump or database bundle violates its declared schema
/// (bad type tag, row width mismatch, uncoercible cell, ...).
class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& msg) : Error(msg) {}
};

/// An embedding or chat provider failed (HTTP error, bad payload, missing
/// scripted reply). status is the HTTP code when one exists, else 0.
class ProviderError : public Error {
 public:
  ProviderError(int status, const std::string& msg)
      : Error(msg + (status ? " (status " + std::to_string(status) + ")" : "")),
        status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

/// An embedding provider returned a vector whose length disagrees with the
/// library's dimension.
class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

/// retrieve_top_k was asked for k > 0 neighbours of an empty library.
class EmptyLibrary : public Error {
 public:
  EmptyLibrary() : Error("vector library is empty") {}
};

/// No query could be extracted from a model reply.
class NoQueryFound : public Error {
 public:
  explicit NoQueryFound(const std::string& msg) : Error(msg) {}
};

/// An evaluation pair references a database id the bundle set lacks.
class MissingDatabase : public Error {
 public:
  explicit MissingDatabase(const std::string& db_id)
      : Error("no database loaded for id '" + db_id + "'"), db_id_(db_id) {}
  const std::string& db_id() const { return db_id_; }

 private:
  std::string db_id_;
};

}  // namespace mqlkit
