#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mqlkit/document_db.hpp"
#include "mqlkit/engine.hpp"
#include "mqlkit/errors.hpp"
#include "mqlkit/normalize.hpp"
#include "mqlkit/query_analysis.hpp"
#include "mqlkit/query_ast.hpp"
#include "mqlkit/query_parser.hpp"
#include "mqlkit/result_compare.hpp"

namespace mqlkit {

namespace detail {

/// Structural equality with object keys order-insensitive and arrays (and
/// stage order) significant, applied to whole ASTs.
inline bool ast_equal(const QueryAst& a, const QueryAst& b) {
  if (a.collection != b.collection || a.method != b.method) return false;
  if (a.method == QueryMethod::Find) {
    const FindClauses& fa = *a.find_clauses;
    const FindClauses& fb = *b.find_clauses;
    if (!DocValue::equals_unordered(fa.filter, fb.filter)) return false;
    if (fa.projection.has_value() != fb.projection.has_value()) return false;
    if (fa.projection &&
        !DocValue::equals_unordered(*fa.projection, *fb.projection))
      return false;
    if (fa.sort.has_value() != fb.sort.has_value()) return false;
    if (fa.sort && !DocValue::equals_unordered(*fa.sort, *fb.sort)) return false;
    return fa.limit == fb.limit;
  }
  if (a.pipeline.size() != b.pipeline.size()) return false;
  for (std::size_t i = 0; i < a.pipeline.size(); ++i) {
    if (a.pipeline[i].op_name != b.pipeline[i].op_name) return false;
    if (!DocValue::equals_unordered(a.pipeline[i].body, b.pipeline[i].body))
      return false;
  }
  return true;
}

}  // namespace detail

/// EM: structural equality after canonicalization. Stage order and array
/// order are significant; object keys are compared order-insensitively;
/// quoting and whitespace vanished at parse time.
inline bool exact_match(const QueryAst& pred, const QueryAst& gold) {
  return detail::ast_equal(pred, gold);
}

/// QSM: identical stage-keyword sequences.
inline bool query_stages_match(const QueryAst& pred, const QueryAst& gold) {
  return extract_stage_keywords(pred) == extract_stage_keywords(gold);
}

/// QFC: the prediction covers every field the gold query uses; database
/// fields and defined fields are each superset-compared.
inline bool query_fields_coverage(const QueryAst& pred, const QueryAst& gold) {
  FieldProfile p = extract_field_profile(pred);
  FieldProfile g = extract_field_profile(gold);
  for (const std::string& f : g.database_fields)
    if (!p.database_fields.count(f)) return false;
  for (const std::string& f : g.defined_fields)
    if (!p.defined_fields.count(f)) return false;
  return true;
}

struct ExecutionMetrics {
  bool ex = false;
  bool efm = false;
  bool evm = false;
  std::optional<std::string> error;
};

/// EX/EFM/EVM: execute both queries and compare result sets. Any parse or
/// execution failure (of either side) yields all-false with the error
/// recorded.
inline ExecutionMetrics execution_metrics(const QueryAst& pred,
                                          const QueryAst& gold,
                                          const DocumentDatabase& db) {
  ExecutionMetrics m;
  ResultSet gold_rs, pred_rs;
  try {
    gold_rs = execute_query(db, gold);
  } catch (const Error& e) {
    m.error = std::string("gold: ") + e.what();
    return m;
  }
  try {
    pred_rs = execute_query(db, pred);
  } catch (const Error& e) {
    m.error = e.what();
    return m;
  }
  ResultComparison cmp = compare_results(pred_rs, gold_rs);
  m.ex = cmp.equal;
  m.efm = cmp.fields_match;
  m.evm = cmp.values_match;
  return m;
}

struct ExampleScore {
  std::string id;
  bool em = false, qsm = false, qfc = false;
  bool ex = false, efm = false, evm = false;
  std::optional<std::string> error;
};

struct CorpusRatios {
  double em = 0, qsm = 0, qfc = 0, ex = 0, efm = 0, evm = 0;
  std::size_t n = 0;
};

struct EvalReport {
  std::vector<ExampleScore> per_example;
  CorpusRatios corpus;
};

struct EvalPair {
  std::string id;
  std::string db_id;
  std::string nlq;
  std::string gold;
  std::string pred;
};

struct EvalOptions {
  bool normalize = true;  // apply normalize_renames to both sides for EM/QFC
};

/// Score one pair. Query-side metrics run on rename-normalized copies when
/// options.normalize is set (the corpus convention); execution runs the
/// queries as written.
inline ExampleScore score_pair(const EvalPair& pair, const DocumentDatabase& db,
                               const EvalOptions& options = {}) {
  ExampleScore s;
  s.id = pair.id;
  QueryAst gold, pred;
  try {
    gold = parse_query(pair.gold);
  } catch (const Error& e) {
    s.error = std::string("gold: ") + e.what();
    return s;
  }
  try {
    pred = parse_query(pair.pred);
  } catch (const Error& e) {
    s.error = e.what();
    return s;
  }

  QueryAst gold_q = gold, pred_q = pred;
  if (options.normalize) {
    try {
      gold_q = normalize_renames(gold);
    } catch (const NormalizationConflict&) {
      gold_q = gold;
    }
    try {
      pred_q = normalize_renames(pred);
    } catch (const NormalizationConflict&) {
      pred_q = pred;
    }
  }
  s.em = exact_match(pred_q, gold_q);
  s.qsm = query_stages_match(pred, gold);
  s.qfc = query_fields_coverage(pred_q, gold_q);

  ExecutionMetrics em = execution_metrics(pred, gold, db);
  s.ex = em.ex;
  s.efm = em.efm;
  s.evm = em.evm;
  if (em.error) s.error = em.error;

  // The metric definitions make these implications structural; violating
  // them means a scoring bug, not bad data.
  if (s.em && !(s.qsm && s.qfc)) throw Error("metric invariant: EM without QSM/QFC");
  if (s.ex && !(s.efm && s.evm)) throw Error("metric invariant: EX without EFM/EVM");
  return s;
}

/// Score a corpus. Throws MissingDatabase when a pair names a database id
/// absent from dbs.
inline EvalReport evaluate_corpus(const std::vector<EvalPair>& pairs,
                                  const std::map<std::string, DocumentDatabase>& dbs,
                                  const EvalOptions& options = {}) {
  EvalReport report;
  std::size_t em = 0, qsm = 0, qfc = 0, ex = 0, efm = 0, evm = 0;
  for (const EvalPair& pair : pairs) {
    auto it = dbs.find(pair.db_id);
    if (it == dbs.end()) throw MissingDatabase(pair.db_id);
    ExampleScore s = score_pair(pair, it->second, options);
    em += s.em;
    qsm += s.qsm;
    qfc += s.qfc;
    ex += s.ex;
    efm += s.efm;
    evm += s.evm;
    report.per_example.push_back(std::move(s));
  }
  std::size_t n = pairs.size();
  report.corpus.n = n;
  if (n > 0) {
    auto ratio = [n](std::size_t c) {
      return static_cast<double>(c) / static_cast<double>(n);
    };
    report.corpus.em = ratio(em);
    report.corpus.qsm = ratio(qsm);
    report.corpus.qfc = ratio(qfc);
    report.corpus.ex = ratio(ex);
    report.corpus.efm = ratio(efm);
    report.corpus.evm = ratio(evm);
  }
  return report;
}

inline std::string report_to_json(const EvalReport& report) {
  DocValue per = DocValue::array();
  for (const ExampleScore& s : report.per_example) {
    DocValue row = DocValue::object();
    row.set("id", DocValue::str(s.id));
    row.set("em", DocValue::boolean(s.em));
    row.set("qsm", DocValue::boolean(s.qsm));
    row.set("qfc", DocValue::boolean(s.qfc));
    row.set("ex", DocValue::boolean(s.ex));
    row.set("efm", DocValue::boolean(s.efm));
    row.set("evm", DocValue::boolean(s.evm));
    if (s.error) row.set("error", DocValue::str(*s.error));
    per.push_back(std::move(row));
  }
  DocValue corpus = DocValue::object();
  corpus.set("EM", DocValue::number(report.corpus.em));
  corpus.set("QSM", DocValue::number(report.corpus.qsm));
  corpus.set("QFC", DocValue::number(report.corpus.qfc));
  corpus.set("EX", DocValue::number(report.corpus.ex));
  corpus.set("EFM", DocValue::number(report.corpus.efm));
  corpus.set("EVM", DocValue::number(report.corpus.evm));
  corpus.set("N", DocValue::integer(static_cast<std::int64_t>(report.corpus.n)));
  DocValue root = DocValue::object();
  root.set("per_example", std::move(per));
  root.set("corpus", std::move(corpus));
  return root.to_json();
}

inline std::string report_to_csv(const EvalReport& report) {
  std::string out = "id,em,qsm,qfc,ex,efm,evm\n";
  auto b = [](bool v) { return v ? "1" : "0"; };
  for (const ExampleScore& s : report.per_example) {
    out += s.id;
    out += ',';
    out += b(s.em);
    out += ',';
    out += b(s.qsm);
    out += ',';
    out += b(s.qfc);
    out += ',';
    out += b(s.ex);
    out += ',';
    out += b(s.efm);
    out += ',';
    out += b(s.evm);
    out += '\n';
  }
  return out;
}

}  // namespace mqlkit
