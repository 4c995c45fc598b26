#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "mqlkit/doc_value.hpp"
#include "mqlkit/document_db.hpp"
#include "mqlkit/errors.hpp"
#include "mqlkit/query_ast.hpp"

namespace mqlkit {

/// Query output. ordered=true only when the query itself imposed an order
/// (top-level $sort or a find .sort); comparisons treat unordered results
/// as multisets.
struct ResultSet {
  std::vector<DocValue> docs;
  bool ordered = false;
};

namespace detail {

using VarScope = std::map<std::string, DocValue>;

inline std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    std::size_t dot = path.find('.', start);
    if (dot == std::string_view::npos) {
      parts.emplace_back(path.substr(start));
      break;
    }
    parts.emplace_back(path.substr(start, dot - start));
    start = dot + 1;
  }
  return parts;
}

// ---------------------------------------------------------------------------
// Path resolution, filter-predicate style: descending a dotted path fans out
// through arrays (each element is tried against the remaining path), so
// {Course: [{CName: "X"}]} matches the path "Course.CName".
// ---------------------------------------------------------------------------

struct PathCandidates {
  bool exists = false;            // some value was reached at the full path
  std::vector<DocValue> leaves;   // values at the path, arrays unexpanded
  std::vector<DocValue> expanded; // leaves plus one level of array elements
};

inline void collect_candidates(const DocValue& v,
                               const std::vector<std::string>& parts,
                               std::size_t idx, PathCandidates& out) {
  if (idx == parts.size()) {
    out.exists = true;
    out.leaves.push_back(v);
    out.expanded.push_back(v);
    if (v.is_array())
      for (const DocValue& e : v.elements()) out.expanded.push_back(e);
    return;
  }
  if (v.is_obj()) {
    if (const DocValue* child = v.find(parts[idx]))
      collect_candidates(*child, parts, idx + 1, out);
    return;
  }
  if (v.is_array())
    for (const DocValue& e : v.elements())
      collect_candidates(e, parts, idx, out);
}

inline PathCandidates resolve_candidates(const DocValue& doc,
                                         const std::string& path) {
  PathCandidates out;
  collect_candidates(doc, split_path(path), 0, out);
  return out;
}

// ---------------------------------------------------------------------------
// Path resolution, expression style: strict object descent; an array in the
// middle maps the remaining path over its object elements, producing an
// array of their values (non-objects and misses are skipped). Returns
// nullopt for a missing path.
// ---------------------------------------------------------------------------

inline std::optional<DocValue> resolve_expr_path(const DocValue& v,
                                                 const std::vector<std::string>& parts,
                                                 std::size_t idx) {
  if (idx == parts.size()) return v;
  if (v.is_obj()) {
    if (const DocValue* child = v.find(parts[idx]))
      return resolve_expr_path(*child, parts, idx + 1);
    return std::nullopt;
  }
  if (v.is_array()) {
    DocValue mapped = DocValue::array();
    for (const DocValue& e : v.elements()) {
      if (!e.is_obj()) continue;
      if (auto r = resolve_expr_path(e, parts, idx)) mapped.push_back(*r);
    }
    return mapped;
  }
  return std::nullopt;
}

inline std::optional<DocValue> resolve_expr_path(const DocValue& doc,
                                                 const std::string& path) {
  return resolve_expr_path(doc, split_path(path), 0);
}

// ---------------------------------------------------------------------------
// Expressions: "$path" field references, "$$var" bindings, literal scalars,
// and {$eq/$ne/$gt/$gte/$lt/$lte: [a, b]} comparisons.
// ---------------------------------------------------------------------------

inline bool is_comparison_op(const std::string& op) {
  return op == "$eq" || op == "$ne" || op == "$gt" || op == "$gte" ||
         op == "$lt" || op == "$lte";
}

inline bool apply_comparison(const std::string& op, const DocValue& a,
                             const DocValue& b) {
  if (op == "$eq") return a == b;
  if (op == "$ne") return !(a == b);
  int c = DocValue::compare(a, b);
  if (op == "$gt") return c > 0;
  if (op == "$gte") return c >= 0;
  if (op == "$lt") return c < 0;
  return c <= 0;  // $lte
}

inline DocValue eval_expr(const DocValue& expr, const DocValue& doc,
                          const VarScope* vars) {
  if (expr.is_str()) {
    const std::string& s = expr.as_str();
    if (s.size() >= 2 && s[0] == '$' && s[1] == '$') {
      std::vector<std::string> parts = split_path(s.substr(2));
      if (parts.empty() || !vars)
        throw UnsupportedOperator("variable reference " + s);
      auto it = vars->find(parts[0]);
      if (it == vars->end())
        throw UnsupportedOperator("undefined variable " + s);
      if (parts.size() == 1) return it->second;
      auto rest =
          resolve_expr_path(it->second,
                            std::vector<std::string>(parts.begin() + 1, parts.end()), 0);
      return rest ? *rest : DocValue::null();
    }
    if (!s.empty() && s[0] == '$') {
      auto r = resolve_expr_path(doc, s.substr(1));
      return r ? *r : DocValue::null();
    }
    return expr;
  }
  if (expr.is_obj()) {
    if (expr.size() == 1 && !expr.key_at(0).empty() && expr.key_at(0)[0] == '$') {
      const std::string& op = expr.key_at(0);
      if (!is_comparison_op(op)) throw UnsupportedOperator(op + " in expression");
      const DocValue& args = expr.value_at(0);
      if (!args.is_array() || args.size() != 2)
        throw UnsupportedOperator(op + " needs a two-element argument array");
      DocValue a = eval_expr(args.elements()[0], doc, vars);
      DocValue b = eval_expr(args.elements()[1], doc, vars);
      return DocValue::boolean(apply_comparison(op, a, b));
    }
    DocValue out = DocValue::object();
    for (std::size_t i = 0; i < expr.size(); ++i)
      out.set(expr.key_at(i), eval_expr(expr.value_at(i), doc, vars));
    return out;
  }
  if (expr.is_array()) {
    DocValue out = DocValue::array();
    for (const DocValue& e : expr.elements())
      out.push_back(eval_expr(e, doc, vars));
    return out;
  }
  return expr;
}

inline bool truthy(const DocValue& v) {
  switch (v.kind()) {
    case DocValue::Kind::Null:
      return false;
    case DocValue::Kind::Bool:
      return v.as_bool();
    case DocValue::Kind::Int:
      return v.as_int() != 0;
    case DocValue::Kind::Float:
      return v.as_float() != 0.0;
    default:
      return true;
  }
}

// ---------------------------------------------------------------------------
// Filters.
// ---------------------------------------------------------------------------

inline bool match_filter(const DocValue& doc, const DocValue& filter,
                         const VarScope* vars);

inline bool eq_match(const DocValue& doc, const std::string& path,
                     const DocValue& literal) {
  PathCandidates c = resolve_candidates(doc, path);
  if (literal.is_null()) {
    if (!c.exists) return true;
    for (const DocValue& v : c.expanded)
      if (v.is_null()) return true;
    return false;
  }
  for (const DocValue& v : c.expanded)
    if (v == literal) return true;
  return false;
}

inline std::regex compile_regex(const DocValue& pattern, const DocValue* options) {
  if (!pattern.is_str()) throw UnsupportedOperator("$regex pattern must be a string");
  auto flags = std::regex::ECMAScript;
  if (options) {
    if (!options->is_str()) throw UnsupportedOperator("$options must be a string");
    for (char c : options->as_str()) {
      if (c == 'i')
        flags |= std::regex::icase;
      else
        throw UnsupportedOperator(std::string("$options flag '") + c + "'");
    }
  }
  try {
    return std::regex(pattern.as_str(), flags);
  } catch (const std::regex_error&) {
    throw UnsupportedOperator("invalid $regex pattern: " + pattern.as_str());
  }
}

inline bool match_operator_object(const DocValue& doc, const std::string& path,
                                  const DocValue& ops);

inline bool match_one_operator(const DocValue& doc, const std::string& path,
                               const std::string& op, const DocValue& arg,
                               const DocValue& all_ops) {
  PathCandidates c = resolve_candidates(doc, path);
  if (op == "$eq") return eq_match(doc, path, arg);
  if (op == "$ne") return !eq_match(doc, path, arg);
  if (op == "$gt" || op == "$gte" || op == "$lt" || op == "$lte") {
    for (const DocValue& v : c.expanded)
      if (apply_comparison(op, v, arg)) return true;
    return false;
  }
  if (op == "$in" || op == "$nin") {
    if (!arg.is_array()) throw UnsupportedOperator(op + " needs an array");
    bool hit = false;
    for (const DocValue& lit : arg.elements()) {
      if (eq_match(doc, path, lit)) {
        hit = true;
        break;
      }
    }
    return op == "$in" ? hit : !hit;
  }
  if (op == "$regex") {
    std::regex re = compile_regex(arg, all_ops.find("$options"));
    for (const DocValue& v : c.expanded)
      if (v.is_str() && std::regex_search(v.as_str(), re)) return true;
    return false;
  }
  if (op == "$options") return true;  // consumed with $regex
  if (op == "$size") {
    if (!arg.is_int()) throw UnsupportedOperator("$size needs an integer");
    for (const DocValue& v : c.leaves)
      if (v.is_array() &&
          static_cast<std::int64_t>(v.size()) == arg.as_int())
        return true;
    return false;
  }
  if (op == "$exists") {
    bool want;
    if (arg.is_bool())
      want = arg.as_bool();
    else if (arg.is_number())
      want = arg.number_value() != 0.0;
    else
      throw UnsupportedOperator("$exists needs a boolean");
    return c.exists == want;
  }
  if (op == "$not") {
    if (!arg.is_obj() || arg.empty())
      throw UnsupportedOperator("$not needs an operator object");
    return !match_operator_object(doc, path, arg);
  }
  throw UnsupportedOperator(op);
}

inline bool is_operator_object(const DocValue& v) {
  if (!v.is_obj() || v.empty()) return false;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v.key_at(i).empty() || v.key_at(i)[0] != '$') return false;
  return true;
}

inline bool match_operator_object(const DocValue& doc, const std::string& path,
                                  const DocValue& ops) {
  if (ops.find("$options") && !ops.find("$regex"))
    throw UnsupportedOperator("$options without $regex");
  for (std::size_t i = 0; i < ops.size(); ++i)
    if (!match_one_operator(doc, path, ops.key_at(i), ops.value_at(i), ops))
      return false;
  return true;
}

inline bool match_filter(const DocValue& doc, const DocValue& filter,
                         const VarScope* vars) {
  if (!filter.is_obj()) throw UnsupportedOperator("filter must be an object");
  for (std::size_t i = 0; i < filter.size(); ++i) {
    const std::string& key = filter.key_at(i);
    const DocValue& val = filter.value_at(i);
    if (key == "$and" || key == "$or") {
      if (!val.is_array()) throw UnsupportedOperator(key + " needs an array");
      bool is_and = key == "$and";
      bool acc = is_and;
      for (const DocValue& sub : val.elements()) {
        bool m = match_filter(doc, sub, vars);
        acc = is_and ? (acc && m) : (acc || m);
      }
      if (!acc) return false;
      continue;
    }
    if (key == "$expr") {
      if (!truthy(eval_expr(val, doc, vars))) return false;
      continue;
    }
    if (!key.empty() && key[0] == '$')
      throw UnsupportedOperator("top-level " + key);
    bool m = is_operator_object(val) ? match_operator_object(doc, key, val)
                                     : eq_match(doc, key, val);
    if (!m) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Projection.
// ---------------------------------------------------------------------------

struct ProjNode {
  bool include_leaf = false;
  std::optional<DocValue> computed;  // "$path" expression to evaluate
  std::vector<std::pair<std::string, ProjNode>> children;  // first-mention order

  ProjNode* child(const std::string& name) {
    for (auto& [k, n] : children)
      if (k == name) return &n;
    return nullptr;
  }
  ProjNode& ensure_child(const std::string& name) {
    if (ProjNode* n = child(name)) return *n;
    children.emplace_back(name, ProjNode{});
    return children.back().second;
  }
};

class Projector {
 public:
  /// Build from a projection spec; throws UnsupportedOperator on values and
  /// shapes outside the dialect (inclusion 0/1/true/false, computed "$path",
  /// mixing inclusion with exclusion, path collisions).
  explicit Projector(const DocValue& spec) {
    if (!spec.is_obj()) throw UnsupportedOperator("projection must be an object");
    bool saw_include = false, saw_exclude = false;
    for (std::size_t i = 0; i < spec.size(); ++i) {
      const std::string& key = spec.key_at(i);
      const DocValue& val = spec.value_at(i);
      bool flag_like = val.is_bool() || val.is_number();
      bool flag_on = flag_like && truthy(val);
      if (key == "_id" && flag_like) {
        include_id_ = flag_on;
        id_explicit_ = true;
        continue;
      }
      if (flag_like) {
        (flag_on ? saw_include : saw_exclude) = true;
        insert_path(key, flag_on ? PathMode::Include : PathMode::Exclude, {});
      } else if (val.is_str() && val.as_str().size() >= 2 &&
                 val.as_str()[0] == '$' && val.as_str()[1] != '$') {
        saw_include = true;
        insert_path(key, PathMode::Computed, val);
      } else {
        throw UnsupportedOperator("projection value for '" + key + "'");
      }
    }
    if (saw_include && saw_exclude)
      throw UnsupportedOperator("projection mixes inclusion and exclusion");
    inclusion_ = saw_include || (!saw_exclude && id_explicit_ && include_id_);
    if (!saw_include && !saw_exclude && !id_explicit_) inclusion_ = false;
  }

  DocValue apply(const DocValue& doc) const {
    if (inclusion_) {
      DocValue out = DocValue::object();
      if (include_id_ || !id_explicit_) {
        if (const DocValue* id = doc.find("_id")) out.set("_id", *id);
      }
      apply_inclusion(doc, doc, root_, out);
      return out;
    }
    DocValue out = apply_exclusion(doc, &root_);
    if (id_explicit_ && !include_id_) out.erase("_id");
    return out;
  }

 private:
  enum class PathMode { Include, Exclude, Computed };

  void insert_path(const std::string& path, PathMode mode, const DocValue& expr) {
    std::vector<std::string> parts = split_path(path);
    ProjNode* node = &root_;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (node->include_leaf || node->computed)
        throw UnsupportedOperator("projection path collision at '" + path + "'");
      node = &node->ensure_child(parts[i]);
    }
    if (node->include_leaf || node->computed || !node->children.empty())
      throw UnsupportedOperator("projection path collision at '" + path + "'");
    if (mode == PathMode::Computed)
      node->computed = expr;
    else
      node->include_leaf = true;  // Exclude leaves share the same tree
  }

  /// Inclusion walk in spec first-mention order at every level. Computed
  /// values resolve against the document root, as references do.
  void apply_inclusion(const DocValue& root, const DocValue& doc,
                       const ProjNode& node, DocValue& out) const {
    for (const auto& [name, child] : node.children) {
      if (child.computed) {
        const std::string& ref = child.computed->as_str();
        auto val = resolve_expr_path(root, ref.substr(1));
        if (val) out.set(name, *val);
        continue;
      }
      const DocValue* v = doc.is_obj() ? doc.find(name) : nullptr;
      if (!v) continue;
      if (child.include_leaf) {
        out.set(name, *v);
        continue;
      }
      if (v->is_obj()) {
        DocValue sub = DocValue::object();
        apply_inclusion(root, *v, child, sub);
        out.set(name, std::move(sub));
      } else if (v->is_array()) {
        DocValue arr = DocValue::array();
        for (const DocValue& e : v->elements()) {
          if (!e.is_obj()) continue;
          DocValue sub = DocValue::object();
          apply_inclusion(root, e, child, sub);
          arr.push_back(std::move(sub));
        }
        out.set(name, std::move(arr));
      }
      // scalar under a deeper inclusion path: omitted
    }
  }

  DocValue apply_exclusion(const DocValue& doc, const ProjNode* node) const {
    DocValue out = DocValue::object();
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const std::string& key = doc.key_at(i);
      const DocValue& val = doc.value_at(i);
      const ProjNode* child =
          node ? const_cast<ProjNode*>(node)->child(key) : nullptr;
      if (!child) {
        out.set(key, val);
        continue;
      }
      if (child->include_leaf) continue;  // excluded leaf
      if (val.is_obj()) {
        out.set(key, apply_exclusion(val, child));
      } else if (val.is_array()) {
        DocValue arr = DocValue::array();
        for (const DocValue& e : val.elements()) {
          if (e.is_obj())
            arr.push_back(apply_exclusion(e, child));
          else
            arr.push_back(e);
        }
        out.set(key, std::move(arr));
      } else {
        out.set(key, val);  // deeper exclusion on a scalar leaves it alone
      }
    }
    return out;
  }

  ProjNode root_;
  bool inclusion_ = false;
  bool include_id_ = true;
  bool id_explicit_ = false;
};

// ---------------------------------------------------------------------------
// Stages.
// ---------------------------------------------------------------------------

inline std::optional<DocValue> eval_acc_expr(const DocValue& expr,
                                             const DocValue& doc) {
  if (expr.is_str()) {
    const std::string& s = expr.as_str();
    if (s.size() >= 2 && s[0] == '$' && s[1] == '$')
      throw UnsupportedOperator("variables in accumulators");
    if (!s.empty() && s[0] == '$') {
      auto r = resolve_expr_path(doc, s.substr(1));
      if (!r) return std::nullopt;
      return *r;
    }
    return expr;
  }
  if (expr.is_obj() || expr.is_array())
    throw UnsupportedOperator("composite accumulator expressions");
  return expr;
}

class PipelineExecutor {
 public:
  explicit PipelineExecutor(const DocumentDatabase& db) : db_(db) {}

  ResultSet run(const QueryAst& ast) {
    ResultSet rs;
    if (ast.method == QueryMethod::Find) {
      const FindClauses& fc = *ast.find_clauses;
      std::vector<DocValue> docs;
      for (const DocValue& d : db_.collection(ast.collection))
        if (match_filter(d, fc.filter, nullptr)) docs.push_back(d);
      if (fc.sort) {
        docs = apply_sort(std::move(docs), *fc.sort);
        rs.ordered = true;
      }
      if (fc.limit) docs = apply_limit(std::move(docs), *fc.limit);
      if (fc.projection) {
        Projector p(*fc.projection);
        for (DocValue& d : docs) d = p.apply(d);
      }
      rs.docs = std::move(docs);
      return rs;
    }
    std::vector<DocValue> docs = db_.collection(ast.collection);
    rs.docs = run_stages(std::move(docs), ast.pipeline, nullptr, &rs.ordered);
    return rs;
  }

  std::vector<DocValue> run_stages(std::vector<DocValue> docs,
                                   const std::vector<Stage>& stages,
                                   const VarScope* vars, bool* ordered) {
    for (const Stage& st : stages) docs = run_stage(std::move(docs), st, vars, ordered);
    return docs;
  }

 private:
  std::vector<DocValue> run_stage(std::vector<DocValue> docs, const Stage& st,
                                  const VarScope* vars, bool* ordered) {
    switch (st.op) {
      case StageOp::Match: {
        std::vector<DocValue> out;
        for (DocValue& d : docs)
          if (match_filter(d, st.body, vars)) out.push_back(std::move(d));
        return out;
      }
      case StageOp::Project: {
        Projector p(st.body);
        for (DocValue& d : docs) d = p.apply(d);
        return docs;
      }
      case StageOp::Unwind:
        return apply_unwind(std::move(docs), st.body);
      case StageOp::Group:
        return apply_group(std::move(docs), st.body);
      case StageOp::Sort: {
        if (ordered) *ordered = true;
        return apply_sort(std::move(docs), st.body);
      }
      case StageOp::Limit: {
        if (!st.body.is_int() || st.body.as_int() < 0)
          throw UnsupportedOperator("$limit needs a nonnegative integer");
        return apply_limit(std::move(docs), st.body.as_int());
      }
      case StageOp::Skip: {
        if (!st.body.is_int() || st.body.as_int() < 0)
          throw UnsupportedOperator("$skip needs a nonnegative integer");
        std::size_t n = static_cast<std::size_t>(st.body.as_int());
        if (n >= docs.size()) return {};
        docs.erase(docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(n));
        return docs;
      }
      case StageOp::Count: {
        if (!st.body.is_str() || st.body.as_str().empty())
          throw UnsupportedOperator("$count needs a nonempty field name");
        DocValue d = DocValue::object();
        d.set(st.body.as_str(),
              DocValue::integer(static_cast<std::int64_t>(docs.size())));
        return {std::move(d)};
      }
      case StageOp::Lookup:
        return apply_lookup(std::move(docs), st.body);
      default:
        throw UnsupportedOperator(st.op_name);
    }
  }

  static std::vector<DocValue> apply_limit(std::vector<DocValue> docs,
                                           std::int64_t n) {
    if (n < 0) throw UnsupportedOperator("negative limit");
    if (static_cast<std::size_t>(n) < docs.size())
      docs.resize(static_cast<std::size_t>(n));
    return docs;
  }

  static std::vector<DocValue> apply_sort(std::vector<DocValue> docs,
                                          const DocValue& spec) {
    if (!spec.is_obj() || spec.empty())
      throw UnsupportedOperator("sort spec must be a nonempty object");
    struct Key {
      std::string path;
      int dir;
    };
    std::vector<Key> keys;
    for (std::size_t i = 0; i < spec.size(); ++i) {
      const DocValue& d = spec.value_at(i);
      if (!d.is_number() ||
          (d.number_value() != 1.0 && d.number_value() != -1.0))
        throw UnsupportedOperator("sort direction for '" + spec.key_at(i) + "'");
      keys.push_back({spec.key_at(i), d.number_value() > 0 ? 1 : -1});
    }
    std::stable_sort(docs.begin(), docs.end(),
                     [&keys](const DocValue& a, const DocValue& b) {
                       for (const Key& k : keys) {
                         auto va = resolve_expr_path(a, k.path);
                         auto vb = resolve_expr_path(b, k.path);
                         DocValue xa = va ? *va : DocValue::null();
                         DocValue xb = vb ? *vb : DocValue::null();
                         int c = DocValue::compare(xa, xb);
                         if (c != 0) return k.dir > 0 ? c < 0 : c > 0;
                       }
                       return false;
                     });
    return docs;
  }

  static void set_path_value(DocValue& doc, const std::vector<std::string>& parts,
                             std::size_t idx, const DocValue& value) {
    if (idx + 1 == parts.size()) {
      doc.set(parts[idx], value);
      return;
    }
    DocValue* child = doc.find(parts[idx]);
    set_path_value(*child, parts, idx + 1, value);  // caller verified the walk
  }

  static std::vector<DocValue> apply_unwind(std::vector<DocValue> docs,
                                            const DocValue& body) {
    std::string path;
    bool preserve = false;
    if (body.is_str()) {
      path = body.as_str();
    } else if (body.is_obj()) {
      const DocValue* p = body.find("path");
      if (!p || !p->is_str()) throw UnsupportedOperator("$unwind path");
      path = p->as_str();
      if (const DocValue* pres = body.find("preserveNullAndEmptyArrays")) {
        if (!pres->is_bool())
          throw UnsupportedOperator("preserveNullAndEmptyArrays must be a boolean");
        preserve = pres->as_bool();
      }
      for (std::size_t i = 0; i < body.size(); ++i) {
        const std::string& k = body.key_at(i);
        if (k != "path" && k != "preserveNullAndEmptyArrays")
          throw UnsupportedOperator("$unwind option " + k);
      }
    } else {
      throw UnsupportedOperator("$unwind body");
    }
    if (path.size() < 2 || path[0] != '$' || path[1] == '$')
      throw UnsupportedOperator("$unwind path must be a \"$field\" string");
    std::vector<std::string> parts = split_path(path.substr(1));

    std::vector<DocValue> out;
    for (DocValue& d : docs) {
      // Strict object walk; the unwind target must sit under plain objects.
      const DocValue* v = &d;
      bool missing = false;
      for (const std::string& part : parts) {
        if (!v->is_obj()) {
          missing = true;
          break;
        }
        const DocValue* child = v->find(part);
        if (!child) {
          missing = true;
          break;
        }
        v = child;
      }
      if (missing) {
        if (preserve) out.push_back(std::move(d));
        continue;
      }
      if (v->is_null()) {
        if (preserve) out.push_back(std::move(d));
        continue;
      }
      if (!v->is_array()) {
        out.push_back(std::move(d));  // single element unwinds to itself
        continue;
      }
      if (v->elements().empty()) {
        if (preserve) {
          DocValue copy = d;
          erase_path(copy, parts, 0);
          out.push_back(std::move(copy));
        }
        continue;
      }
      for (const DocValue& elem : v->elements()) {
        DocValue copy = d;
        set_path_value(copy, parts, 0, elem);
        out.push_back(std::move(copy));
      }
    }
    return out;
  }

  static void erase_path(DocValue& doc, const std::vector<std::string>& parts,
                         std::size_t idx) {
    if (idx + 1 == parts.size()) {
      doc.erase(parts[idx]);
      return;
    }
    DocValue* child = doc.find(parts[idx]);
    if (child && child->is_obj()) erase_path(*child, parts, idx + 1);
  }

  std::vector<DocValue> apply_group(std::vector<DocValue> docs,
                                    const DocValue& body) {
    if (!body.is_obj()) throw UnsupportedOperator("$group body");
    const DocValue* id_spec = body.find("_id");
    if (!id_spec) throw UnsupportedOperator("$group requires _id");

    struct Acc {
      std::string name;
      std::string op;
      DocValue expr;
    };
    std::vector<Acc> accs;
    for (std::size_t i = 0; i < body.size(); ++i) {
      const std::string& key = body.key_at(i);
      if (key == "_id") continue;
      const DocValue& spec = body.value_at(i);
      if (!spec.is_obj() || spec.size() != 1 || spec.key_at(0).empty() ||
          spec.key_at(0)[0] != '$')
        throw UnsupportedOperator("accumulator for '" + key + "'");
      accs.push_back({key, spec.key_at(0), spec.value_at(0)});
    }
    for (const Acc& a : accs) {
      if (a.op != "$sum" && a.op != "$avg" && a.op != "$min" && a.op != "$max" &&
          a.op != "$push" && a.op != "$addToSet" && a.op != "$first" &&
          a.op != "$last")
        throw UnsupportedOperator(a.op);
    }

    struct GroupState {
      DocValue key;
      std::vector<std::vector<std::optional<DocValue>>> values;  // per acc
    };
    std::vector<GroupState> groups;

    for (const DocValue& d : docs) {
      DocValue key = group_key(*id_spec, d);
      GroupState* g = nullptr;
      for (GroupState& cand : groups)
        if (cand.key == key) {
          g = &cand;
          break;
        }
      if (!g) {
        groups.push_back(GroupState{std::move(key), {}});
        g = &groups.back();
        g->values.resize(accs.size());
      }
      for (std::size_t i = 0; i < accs.size(); ++i)
        g->values[i].push_back(eval_acc_expr(accs[i].expr, d));
    }

    std::vector<DocValue> out;
    out.reserve(groups.size());
    for (GroupState& g : groups) {
      DocValue doc = DocValue::object();
      doc.set("_id", g.key);
      for (std::size_t i = 0; i < accs.size(); ++i) {
        auto result = fold_accumulator(accs[i].op, g.values[i]);
        if (result) doc.set(accs[i].name, std::move(*result));
      }
      out.push_back(std::move(doc));
    }
    return out;
  }

  static DocValue group_key(const DocValue& id_spec, const DocValue& doc) {
    if (id_spec.is_null()) return DocValue::null();
    if (id_spec.is_str()) {
      const std::string& s = id_spec.as_str();
      if (s.size() < 2 || s[0] != '$' || s[1] == '$')
        throw UnsupportedOperator("$group _id must be null, \"$path\", or an object");
      auto r = resolve_expr_path(doc, s.substr(1));
      return r ? *r : DocValue::null();
    }
    if (id_spec.is_obj()) {
      DocValue key = DocValue::object();
      for (std::size_t i = 0; i < id_spec.size(); ++i) {
        const DocValue& v = id_spec.value_at(i);
        if (!v.is_str() || v.as_str().size() < 2 || v.as_str()[0] != '$' ||
            v.as_str()[1] == '$')
          throw UnsupportedOperator("$group _id object values must be \"$path\" refs");
        auto r = resolve_expr_path(doc, v.as_str().substr(1));
        key.set(id_spec.key_at(i), r ? *r : DocValue::null());
      }
      return key;
    }
    throw UnsupportedOperator("$group _id form");
  }

  /// Returns nullopt when the accumulator produces no field ($first/$last of
  /// an always-missing expression).
  static std::optional<DocValue> fold_accumulator(
      const std::string& op, const std::vector<std::optional<DocValue>>& vals) {
    if (op == "$sum") {
      std::int64_t isum = 0;
      double fsum = 0.0;
      bool is_float = false;
      for (const auto& v : vals) {
        if (!v || !v->is_number()) continue;
        if (v->is_int() && !is_float) {
          isum += v->as_int();
        } else {
          if (!is_float) {
            fsum = static_cast<double>(isum);
            is_float = true;
          }
          fsum += v->number_value();
        }
      }
      return is_float ? DocValue::number(fsum) : DocValue::integer(isum);
    }
    if (op == "$avg") {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& v : vals) {
        if (!v || !v->is_number()) continue;
        sum += v->number_value();
        ++n;
      }
      if (n == 0) return DocValue::null();
      return DocValue::number(sum / static_cast<double>(n));
    }
    if (op == "$min" || op == "$max") {
      const DocValue* best = nullptr;
      for (const auto& v : vals) {
        if (!v || v->is_null()) continue;
        if (!best) {
          best = &*v;
          continue;
        }
        int c = DocValue::compare(*v, *best);
        if ((op == "$min" && c < 0) || (op == "$max" && c > 0)) best = &*v;
      }
      return best ? *best : DocValue::null();
    }
    if (op == "$push") {
      DocValue arr = DocValue::array();
      for (const auto& v : vals)
        if (v) arr.push_back(*v);
      return arr;
    }
    if (op == "$addToSet") {
      DocValue arr = DocValue::array();
      for (const auto& v : vals) {
        if (!v) continue;
        bool seen = false;
        for (const DocValue& e : arr.elements())
          if (e == *v) {
            seen = true;
            break;
          }
        if (!seen) arr.push_back(*v);
      }
      return arr;
    }
    if (op == "$first") {
      if (vals.empty() || !vals.front()) return std::nullopt;
      return *vals.front();
    }
    // $last
    if (vals.empty() || !vals.back()) return std::nullopt;
    return *vals.back();
  }

  std::vector<DocValue> apply_lookup(std::vector<DocValue> docs,
                                     const DocValue& body) {
    if (!body.is_obj()) throw UnsupportedOperator("$lookup body");
    const DocValue* from = body.find("from");
    const DocValue* as = body.find("as");
    if (!from || !from->is_str() || !as || !as->is_str())
      throw UnsupportedOperator("$lookup requires string 'from' and 'as'");
    const DocValue* local = body.find("localField");
    const DocValue* foreign = body.find("foreignField");
    const DocValue* pipeline = body.find("pipeline");
    const DocValue* let = body.find("let");

    for (std::size_t i = 0; i < body.size(); ++i) {
      const std::string& k = body.key_at(i);
      if (k != "from" && k != "as" && k != "localField" && k != "foreignField" &&
          k != "pipeline" && k != "let")
        throw UnsupportedOperator("$lookup option " + k);
    }

    const std::vector<DocValue>& foreign_docs = db_.collection(from->as_str());

    if (pipeline) {
      if (local || foreign)
        throw UnsupportedOperator("$lookup mixes equality and pipeline forms");
      if (!pipeline->is_array()) throw UnsupportedOperator("$lookup pipeline");
      std::vector<Stage> stages;
      for (const DocValue& elem : pipeline->elements()) {
        if (!elem.is_obj() || elem.size() != 1)
          throw UnsupportedOperator("$lookup pipeline stage shape");
        Stage st;
        st.op_name = elem.key_at(0);
        st.op = stage_op_from_name(st.op_name);
        st.body = elem.value_at(0);
        stages.push_back(std::move(st));
      }
      for (DocValue& d : docs) {
        VarScope vars;
        if (let) {
          if (!let->is_obj()) throw UnsupportedOperator("$lookup let");
          for (std::size_t i = 0; i < let->size(); ++i)
            vars[let->key_at(i)] = eval_expr(let->value_at(i), d, nullptr);
        }
        std::vector<DocValue> joined =
            run_stages(foreign_docs, stages, &vars, nullptr);
        d.set(as->as_str(), DocValue::array(std::move(joined)));
      }
      return docs;
    }

    if (!local || !local->is_str() || !foreign || !foreign->is_str() || let)
      throw UnsupportedOperator("$lookup requires localField/foreignField or pipeline");

    // Precompute foreign candidate sets once; missing paths behave as null.
    std::vector<std::vector<DocValue>> foreign_vals;
    foreign_vals.reserve(foreign_docs.size());
    for (const DocValue& fd : foreign_docs) {
      PathCandidates c = resolve_candidates(fd, foreign->as_str());
      if (!c.exists) c.expanded.push_back(DocValue::null());
      foreign_vals.push_back(std::move(c.expanded));
    }

    for (DocValue& d : docs) {
      PathCandidates lc = resolve_candidates(d, local->as_str());
      if (!lc.exists) lc.expanded.push_back(DocValue::null());
      DocValue joined = DocValue::array();
      for (std::size_t fi = 0; fi < foreign_docs.size(); ++fi) {
        bool hit = false;
        for (const DocValue& fv : foreign_vals[fi]) {
          for (const DocValue& lv : lc.expanded)
            if (lv == fv) {
              hit = true;
              break;
            }
          if (hit) break;
        }
        if (hit) joined.push_back(foreign_docs[fi]);
      }
      d.set(as->as_str(), std::move(joined));
    }
    return docs;
  }

  const DocumentDatabase& db_;
};

}  // namespace detail

/// Execute a parsed query against a database. Find applies filter, sort,
/// limit, projection in that order; aggregates fold documents through the
/// stages. Throws UnknownCollection and UnsupportedOperator.
inline ResultSet execute_query(const DocumentDatabase& db, const QueryAst& ast) {
  if (!db.has_collection(ast.collection)) throw UnknownCollection(ast.collection);
  detail::PipelineExecutor ex(db);
  return ex.run(ast);
}

}  // namespace mqlkit
