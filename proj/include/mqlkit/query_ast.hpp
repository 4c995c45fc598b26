#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mqlkit/doc_value.hpp"

namespace mqlkit {

enum class QueryMethod { Find, Aggregate };

enum class StageOp {
  Match,
  Group,
  Project,
  Unwind,
  Sort,
  Limit,
  Skip,
  Lookup,
  Count,
  Other,
};

/// One aggregation stage: a single $-keyed object. op_name keeps the
/// operator exactly as written (meaningful when op == Other).
struct Stage {
  StageOp op = StageOp::Other;
  std::string op_name;
  DocValue body;
};

inline StageOp stage_op_from_name(const std::string& name) {
  if (name == "$match") return StageOp::Match;
  if (name == "$group") return StageOp::Group;
  if (name == "$project") return StageOp::Project;
  if (name == "$unwind") return StageOp::Unwind;
  if (name == "$sort") return StageOp::Sort;
  if (name == "$limit") return StageOp::Limit;
  if (name == "$skip") return StageOp::Skip;
  if (name == "$lookup") return StageOp::Lookup;
  if (name == "$count") return StageOp::Count;
  return StageOp::Other;
}

/// Arguments of a find-style call plus its chained modifiers.
struct FindClauses {
  DocValue filter = DocValue::object();
  std::optional<DocValue> projection;
  std::optional<DocValue> sort;
  std::optional<std::int64_t> limit;
};

/// Parsed shell call. For Find, find_clauses is engaged and pipeline is
/// empty; for Aggregate it is the other way round.
struct QueryAst {
  std::string collection;
  QueryMethod method = QueryMethod::Find;
  std::optional<FindClauses> find_clauses;
  std::vector<Stage> pipeline;
};

/// Canonical single-line rendering: double-quoted keys, compact JSON, the
/// original clause/stage order, one trailing semicolon. Reparsing the output
/// yields an equal AST.
inline std::string serialize_canonical(const QueryAst& ast) {
  std::string out = "db." + ast.collection + ".";
  if (ast.method == QueryMethod::Find) {
    const FindClauses& fc = *ast.find_clauses;
    out += "find(" + fc.filter.to_json();
    if (fc.projection) out += "," + fc.projection->to_json();
    out += ")";
    if (fc.sort) out += ".sort(" + fc.sort->to_json() + ")";
    if (fc.limit) out += ".limit(" + std::to_string(*fc.limit) + ")";
  } else {
    out += "aggregate([";
    for (std::size_t i = 0; i < ast.pipeline.size(); ++i) {
      if (i) out += ',';
      DocValue stage = DocValue::object();
      stage.set(ast.pipeline[i].op_name, ast.pipeline[i].body);
      out += stage.to_json();
    }
    out += "])";
  }
  out += ";";
  return out;
}

}  // namespace mqlkit
