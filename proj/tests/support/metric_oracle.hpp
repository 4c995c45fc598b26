#pragma once

// Independent recomputation of the six evaluation metrics for the
// perturbation suite. Shares only the parsed query shapes, the value type,
// and the naive engine with the code under test; every comparison and
// extraction below is written from the metric definitions directly.

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "mqlkit/doc_value.hpp"
#include "mqlkit/document_db.hpp"
#include "mqlkit/query_ast.hpp"
#include "mqlkit/query_parser.hpp"
#include "naive_engine.hpp"

namespace moracle {

using mqlkit::DocValue;
using mqlkit::DocumentDatabase;
using mqlkit::FindClauses;
using mqlkit::QueryAst;
using mqlkit::QueryMethod;
using mqlkit::Stage;

// Canonical text with object keys sorted at every level and numbers unified
// (integral floats render as integers), so string equality coincides with
// key-order-insensitive, numerically-unified structural equality.
inline void canon(const DocValue& v, std::string& out) {
  switch (v.kind()) {
    case DocValue::Kind::Obj: {
      std::vector<std::pair<std::string, const DocValue*>> entries;
      for (std::size_t i = 0; i < v.size(); ++i)
        entries.emplace_back(v.key_at(i), &v.value_at(i));
      std::sort(entries.begin(), entries.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      out += '{';
      bool first = true;
      for (const auto& [k, val] : entries) {
        if (!first) out += ',';
        first = false;
        DocValue::write_json_string(out, k);
        out += ':';
        canon(*val, out);
      }
      out += '}';
      return;
    }
    case DocValue::Kind::Array: {
      out += '[';
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        canon(v.elements()[i], out);
      }
      out += ']';
      return;
    }
    case DocValue::Kind::Int:
      out += std::to_string(v.as_int());
      return;
    case DocValue::Kind::Float: {
      double d = v.as_float();
      if (d == static_cast<double>(static_cast<std::int64_t>(d)) &&
          d >= -9007199254740992.0 && d <= 9007199254740992.0)
        out += std::to_string(static_cast<std::int64_t>(d));
      else
        out += DocValue::format_double(d);
      return;
    }
    default:
      out += v.to_json();
      return;
  }
}

inline std::string canon_str(const DocValue& v) {
  std::string out;
  canon(v, out);
  return out;
}

inline std::string query_canon(const QueryAst& q) {
  std::string out = q.collection;
  if (q.method == QueryMethod::Find) {
    const FindClauses& fc = *q.find_clauses;
    out += "|find|" + canon_str(fc.filter);
    out += "|proj:" + (fc.projection ? canon_str(*fc.projection) : "-");
    out += "|sort:" + (fc.sort ? canon_str(*fc.sort) : "-");
    out += "|limit:" + (fc.limit ? std::to_string(*fc.limit) : "-");
    return out;
  }
  out += "|agg";
  for (const Stage& s : q.pipeline)
    out += "|" + s.op_name + ":" + canon_str(s.body);
  return out;
}

inline bool oracle_em(const QueryAst& pred, const QueryAst& gold) {
  return query_canon(pred) == query_canon(gold);
}

inline std::vector<std::string> oracle_keywords(const QueryAst& q) {
  std::vector<std::string> out;
  if (q.method == QueryMethod::Aggregate) {
    for (const Stage& s : q.pipeline) out.push_back(s.op_name);
  } else {
    out.push_back("filter");
    if (q.find_clauses->projection) out.push_back("projection");
    if (q.find_clauses->sort) out.push_back("sort");
    if (q.find_clauses->limit) out.push_back("limit");
  }
  return out;
}

inline bool oracle_qsm(const QueryAst& pred, const QueryAst& gold) {
  return oracle_keywords(pred) == oracle_keywords(gold);
}

struct OracleProfile {
  std::set<std::string> db;
  std::set<std::string> defined;
};

inline void oracle_expr_refs(const DocValue& v, std::set<std::string>& db) {
  if (v.is_str()) {
    const std::string& s = v.as_str();
    if (s.size() >= 2 && s[0] == '$' && s[1] == '$') return;
    if (!s.empty() && s[0] == '$') db.insert(s.substr(1));
    return;
  }
  if (v.is_array()) {
    for (const DocValue& e : v.elements()) oracle_expr_refs(e, db);
  } else if (v.is_obj()) {
    for (std::size_t i = 0; i < v.size(); ++i)
      oracle_expr_refs(v.value_at(i), db);
  }
}

inline void oracle_filter_fields(const DocValue& f, OracleProfile& p) {
  if (!f.is_obj()) return;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const std::string& k = f.key_at(i);
    if (k == "$and" || k == "$or") {
      if (f.value_at(i).is_array())
        for (const DocValue& sub : f.value_at(i).elements())
          oracle_filter_fields(sub, p);
    } else if (k == "$expr") {
      oracle_expr_refs(f.value_at(i), p.db);
    } else if (k.empty() || k[0] != '$') {
      p.db.insert(k);
    }
  }
}

inline void oracle_projection_fields(const DocValue& proj, OracleProfile& p) {
  if (!proj.is_obj()) return;
  for (std::size_t i = 0; i < proj.size(); ++i) {
    p.db.insert(proj.key_at(i));
    const DocValue& v = proj.value_at(i);
    if (!v.is_number() && !v.is_bool()) {
      p.defined.insert(proj.key_at(i));
      oracle_expr_refs(v, p.db);
    }
  }
}

inline void oracle_stage_fields(const std::string& op, const DocValue& body,
                                OracleProfile& p) {
  if (op == "$match") {
    oracle_filter_fields(body, p);
  } else if (op == "$project") {
    oracle_projection_fields(body, p);
  } else if (op == "$sort") {
    if (body.is_obj())
      for (std::size_t i = 0; i < body.size(); ++i) p.db.insert(body.key_at(i));
  } else if (op == "$unwind") {
    std::string path;
    if (body.is_str()) path = body.as_str();
    else if (body.is_obj())
      if (const DocValue* pp = body.find("path"); pp && pp->is_str())
        path = pp->as_str();
    if (path.size() >= 2 && path[0] == '$' && path[1] != '$')
      p.db.insert(path.substr(1));
    else if (!path.empty() && path[0] != '$')
      p.db.insert(path);
  } else if (op == "$group") {
    if (!body.is_obj()) return;
    for (std::size_t i = 0; i < body.size(); ++i) {
      const std::string& k = body.key_at(i);
      const DocValue& v = body.value_at(i);
      if (k == "_id") {
        if (v.is_obj()) {
          for (std::size_t j = 0; j < v.size(); ++j) {
            p.defined.insert(v.key_at(j));
            oracle_expr_refs(v.value_at(j), p.db);
          }
        } else {
          oracle_expr_refs(v, p.db);
        }
      } else {
        p.defined.insert(k);
        if (v.is_obj())
          for (std::size_t j = 0; j < v.size(); ++j)
            oracle_expr_refs(v.value_at(j), p.db);
      }
    }
  } else if (op == "$lookup") {
    if (!body.is_obj()) return;
    if (const DocValue* v = body.find("localField"); v && v->is_str())
      p.db.insert(v->as_str());
    if (const DocValue* v = body.find("foreignField"); v && v->is_str())
      p.db.insert(v->as_str());
    if (const DocValue* v = body.find("as"); v && v->is_str())
      p.defined.insert(v->as_str());
    if (const DocValue* v = body.find("let"); v && v->is_obj())
      for (std::size_t j = 0; j < v->size(); ++j)
        oracle_expr_refs(v->value_at(j), p.db);
    if (const DocValue* v = body.find("pipeline"); v && v->is_array())
      for (const DocValue& st : v->elements())
        if (st.is_obj() && st.size() == 1)
          oracle_stage_fields(st.key_at(0), st.value_at(0), p);
  }
}

inline OracleProfile oracle_profile(const QueryAst& q) {
  OracleProfile p;
  if (q.method == QueryMethod::Aggregate) {
    for (const Stage& s : q.pipeline) oracle_stage_fields(s.op_name, s.body, p);
  } else {
    const FindClauses& fc = *q.find_clauses;
    oracle_filter_fields(fc.filter, p);
    if (fc.projection) oracle_projection_fields(*fc.projection, p);
    if (fc.sort)
      for (std::size_t i = 0; i < fc.sort->size(); ++i)
        p.db.insert(fc.sort->key_at(i));
  }
  return p;
}

inline bool oracle_qfc(const QueryAst& pred, const QueryAst& gold) {
  OracleProfile pp = oracle_profile(pred);
  OracleProfile gp = oracle_profile(gold);
  return std::includes(pp.db.begin(), pp.db.end(), gp.db.begin(), gp.db.end()) &&
         std::includes(pp.defined.begin(), pp.defined.end(), gp.defined.begin(),
                       gp.defined.end());
}

inline void oracle_paths(const DocValue& v, const std::string& prefix,
                         std::vector<std::string>& out) {
  if (v.is_obj()) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::string path = prefix.empty() ? v.key_at(i) : prefix + "." + v.key_at(i);
      out.push_back(path);
      oracle_paths(v.value_at(i), path, out);
    }
  } else if (v.is_array()) {
    for (const DocValue& e : v.elements()) oracle_paths(e, prefix, out);
  }
}

inline void oracle_leaves(const DocValue& v, std::vector<std::string>& out) {
  if (v.is_obj()) {
    for (std::size_t i = 0; i < v.size(); ++i) oracle_leaves(v.value_at(i), out);
  } else if (v.is_array()) {
    for (const DocValue& e : v.elements()) oracle_leaves(e, out);
  } else {
    out.push_back(canon_str(v));
  }
}

struct OracleExec {
  bool ex = false;
  bool efm = false;
  bool evm = false;
};

inline OracleExec oracle_exec(const QueryAst& pred, const QueryAst& gold,
                              const DocumentDatabase& db) {
  OracleExec bits;
  naive::Result pr, gr;
  try {
    gr = naive::oracle_execute(db, gold);
    pr = naive::oracle_execute(db, pred);
  } catch (const std::exception&) {
    return bits;
  }

  if (pr.ordered && gr.ordered) {
    bits.ex = pr.docs.size() == gr.docs.size();
    if (bits.ex)
      for (std::size_t i = 0; i < pr.docs.size(); ++i)
        if (canon_str(pr.docs[i]) != canon_str(gr.docs[i])) {
          bits.ex = false;
          break;
        }
  } else {
    std::vector<std::string> a, b;
    for (const DocValue& d : pr.docs) a.push_back(canon_str(d));
    for (const DocValue& d : gr.docs) b.push_back(canon_str(d));
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    bits.ex = a == b;
  }

  std::vector<std::vector<std::string>> fa, fb;
  for (const DocValue& d : pr.docs) {
    std::vector<std::string> paths;
    oracle_paths(d, "", paths);
    std::sort(paths.begin(), paths.end());
    fa.push_back(std::move(paths));
  }
  for (const DocValue& d : gr.docs) {
    std::vector<std::string> paths;
    oracle_paths(d, "", paths);
    std::sort(paths.begin(), paths.end());
    fb.push_back(std::move(paths));
  }
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  bits.efm = fa == fb;

  std::vector<std::string> va, vb;
  for (const DocValue& d : pr.docs) oracle_leaves(d, va);
  for (const DocValue& d : gr.docs) oracle_leaves(d, vb);
  std::sort(va.begin(), va.end());
  std::sort(vb.begin(), vb.end());
  bits.evm = va == vb;
  return bits;
}

struct SixBits {
  bool em = false, qsm = false, qfc = false;
  bool ex = false, efm = false, evm = false;
};

/// Full oracle scoring of one (pred, gold) text pair without rename
/// normalization. Parse failure of either side leaves every bit false,
/// matching the production convention of counting broken predictions as
/// failures.
inline SixBits oracle_score(const std::string& pred_text,
                            const std::string& gold_text,
                            const DocumentDatabase& db) {
  SixBits s;
  QueryAst pred, gold;
  try {
    gold = mqlkit::parse_query(gold_text);
    pred = mqlkit::parse_query(pred_text);
  } catch (const std::exception&) {
    return s;
  }
  s.em = oracle_em(pred, gold);
  s.qsm = oracle_qsm(pred, gold);
  s.qfc = oracle_qfc(pred, gold);
  OracleExec e = oracle_exec(pred, gold, db);
  s.ex = e.ex;
  s.efm = e.efm;
  s.evm = e.evm;
  return s;
}

}  // namespace moracle
