#pragma once

// Independent differential oracle: the most direct nested-loop reading of the
// engine dialect, sharing only DocValue and the query AST input types with
// the production engine. Used by tests only.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <utility>
#include <vector>

#include "mqlkit/doc_value.hpp"
#include "mqlkit/document_db.hpp"
#include "mqlkit/errors.hpp"
#include "mqlkit/query_ast.hpp"

namespace naive {

using mqlkit::DocValue;
using mqlkit::DocumentDatabase;
using mqlkit::FindClauses;
using mqlkit::QueryAst;
using mqlkit::QueryMethod;
using mqlkit::Stage;
using mqlkit::StageOp;
using mqlkit::UnsupportedOperator;

struct Result {
  std::vector<DocValue> docs;
  bool ordered = false;
};

using Vars = std::map<std::string, DocValue>;

inline std::vector<std::string> path_parts(const std::string& path) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : path) {
    if (c == '.') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

// Filter-style path gathering: arrays fan out at every level, and at the end
// of the path array values additionally contribute their elements.
struct Gathered {
  bool found = false;
  std::vector<DocValue> leaves;
  std::vector<DocValue> expanded;
};

inline Gathered gather(const DocValue& doc, const std::string& path) {
  Gathered g;
  std::vector<std::pair<const DocValue*, std::size_t>> work;
  std::vector<std::string> parts = path_parts(path);
  work.push_back({&doc, 0});
  while (!work.empty()) {
    auto [v, idx] = work.back();
    work.pop_back();
    if (idx == parts.size()) {
      g.found = true;
      g.leaves.push_back(*v);
      g.expanded.push_back(*v);
      if (v->is_array())
        for (const DocValue& e : v->elements()) g.expanded.push_back(e);
      continue;
    }
    if (v->is_obj()) {
      if (const DocValue* child = v->find(parts[idx])) work.push_back({child, idx + 1});
    } else if (v->is_array()) {
      for (const DocValue& e : v->elements()) work.push_back({&e, idx});
    }
  }
  return g;
}

// Expression-style resolution: strict object descent; an array met before the
// path is consumed maps the rest of the path over its object elements and
// always yields an array (misses and non-objects skipped).
inline std::optional<DocValue> resolve(const DocValue& v,
                                       const std::vector<std::string>& parts,
                                       std::size_t idx) {
  if (idx == parts.size()) return v;
  if (v.is_array()) {
    DocValue out = DocValue::array();
    for (const DocValue& e : v.elements()) {
      if (!e.is_obj()) continue;
      auto r = resolve(e, parts, idx);
      if (r) out.push_back(*r);
    }
    return out;
  }
  if (!v.is_obj()) return std::nullopt;
  const DocValue* child = v.find(parts[idx]);
  if (!child) return std::nullopt;
  return resolve(*child, parts, idx + 1);
}

inline std::optional<DocValue> resolve(const DocValue& doc, const std::string& path) {
  return resolve(doc, path_parts(path), 0);
}

inline bool is_truthy(const DocValue& v) {
  if (v.is_null()) return false;
  if (v.is_bool()) return v.as_bool();
  if (v.is_number()) return v.number_value() != 0.0;
  return true;
}

inline bool cmp_op(const std::string& op, const DocValue& a, const DocValue& b) {
  if (op == "$eq") return a == b;
  if (op == "$ne") return !(a == b);
  int c = DocValue::compare(a, b);
  if (op == "$gt") return c > 0;
  if (op == "$gte") return c >= 0;
  if (op == "$lt") return c < 0;
  if (op == "$lte") return c <= 0;
  throw UnsupportedOperator(op);
}

inline DocValue expr_eval(const DocValue& expr, const DocValue& doc, const Vars* vars) {
  if (expr.is_str()) {
    const std::string& s = expr.as_str();
    if (s.rfind("$$", 0) == 0) {
      std::vector<std::string> parts = path_parts(s.substr(2));
      if (parts.empty() || parts[0].empty() || !vars)
        throw UnsupportedOperator("variable reference " + s);
      auto it = vars->find(parts[0]);
      if (it == vars->end()) throw UnsupportedOperator("undefined variable " + s);
      if (parts.size() == 1) return it->second;
      std::vector<std::string> rest(parts.begin() + 1, parts.end());
      auto r = resolve(it->second, rest, 0);
      return r ? *r : DocValue::null();
    }
    if (!s.empty() && s[0] == '$') {
      auto r = resolve(doc, s.substr(1));
      return r ? *r : DocValue::null();
    }
    return expr;
  }
  if (expr.is_array()) {
    DocValue out = DocValue::array();
    for (const DocValue& e : expr.elements()) out.push_back(expr_eval(e, doc, vars));
    return out;
  }
  if (expr.is_obj()) {
    if (expr.size() == 1 && !expr.key_at(0).empty() && expr.key_at(0)[0] == '$') {
      const std::string& op = expr.key_at(0);
      const DocValue& args = expr.value_at(0);
      if (op != "$eq" && op != "$ne" && op != "$gt" && op != "$gte" &&
          op != "$lt" && op != "$lte")
        throw UnsupportedOperator(op + " in expression");
      if (!args.is_array() || args.size() != 2)
        throw UnsupportedOperator(op + " needs a two-element argument array");
      DocValue lhs = expr_eval(args.elements()[0], doc, vars);
      DocValue rhs = expr_eval(args.elements()[1], doc, vars);
      return DocValue::boolean(cmp_op(op, lhs, rhs));
    }
    DocValue out = DocValue::object();
    for (std::size_t i = 0; i < expr.size(); ++i)
      out.set(expr.key_at(i), expr_eval(expr.value_at(i), doc, vars));
    return out;
  }
  return expr;
}

inline bool value_matches(const DocValue& doc, const std::string& path,
                          const DocValue& literal) {
  Gathered g = gather(doc, path);
  if (literal.is_null()) {
    if (!g.found) return true;
    for (const DocValue& c : g.expanded)
      if (c.is_null()) return true;
    return false;
  }
  for (const DocValue& c : g.expanded)
    if (c == literal) return true;
  return false;
}

inline std::regex build_regex(const DocValue& pattern, const DocValue* options) {
  if (!pattern.is_str()) throw UnsupportedOperator("$regex pattern must be a string");
  auto flags = std::regex::ECMAScript;
  if (options) {
    if (!options->is_str()) throw UnsupportedOperator("$options must be a string");
    for (char c : options->as_str()) {
      if (c != 'i') throw UnsupportedOperator(std::string("$options flag '") + c + "'");
      flags |= std::regex::icase;
    }
  }
  try {
    return std::regex(pattern.as_str(), flags);
  } catch (const std::regex_error&) {
    throw UnsupportedOperator("invalid $regex pattern: " + pattern.as_str());
  }
}

inline bool operator_clause(const DocValue& doc, const std::string& path,
                            const DocValue& ops);

inline bool one_operator(const DocValue& doc, const std::string& path,
                         const std::string& op, const DocValue& arg,
                         const DocValue& clause) {
  if (op == "$eq") return value_matches(doc, path, arg);
  if (op == "$ne") return !value_matches(doc, path, arg);
  if (op == "$gt" || op == "$gte" || op == "$lt" || op == "$lte") {
    for (const DocValue& c : gather(doc, path).expanded)
      if (cmp_op(op, c, arg)) return true;
    return false;
  }
  if (op == "$in" || op == "$nin") {
    if (!arg.is_array()) throw UnsupportedOperator(op + " needs an array");
    bool any = false;
    for (const DocValue& lit : arg.elements())
      if (value_matches(doc, path, lit)) any = true;
    return op == "$in" ? any : !any;
  }
  if (op == "$regex") {
    std::regex re = build_regex(arg, clause.find("$options"));
    for (const DocValue& c : gather(doc, path).expanded)
      if (c.is_str() && std::regex_search(c.as_str(), re)) return true;
    return false;
  }
  if (op == "$options") return true;
  if (op == "$size") {
    if (!arg.is_int()) throw UnsupportedOperator("$size needs an integer");
    for (const DocValue& c : gather(doc, path).leaves)
      if (c.is_array() && static_cast<std::int64_t>(c.size()) == arg.as_int())
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
    return gather(doc, path).found == want;
  }
  if (op == "$not") {
    if (!arg.is_obj() || arg.empty())
      throw UnsupportedOperator("$not needs an operator object");
    return !operator_clause(doc, path, arg);
  }
  throw UnsupportedOperator(op);
}

inline bool operator_clause(const DocValue& doc, const std::string& path,
                            const DocValue& ops) {
  if (ops.find("$options") && !ops.find("$regex"))
    throw UnsupportedOperator("$options without $regex");
  for (std::size_t i = 0; i < ops.size(); ++i)
    if (!one_operator(doc, path, ops.key_at(i), ops.value_at(i), ops)) return false;
  return true;
}

inline bool all_dollar_keys(const DocValue& v) {
  if (!v.is_obj() || v.empty()) return false;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v.key_at(i).empty() || v.key_at(i)[0] != '$') return false;
  return true;
}

inline bool filter_matches(const DocValue& doc, const DocValue& filter,
                           const Vars* vars) {
  if (!filter.is_obj()) throw UnsupportedOperator("filter must be an object");
  for (std::size_t i = 0; i < filter.size(); ++i) {
    const std::string& key = filter.key_at(i);
    const DocValue& val = filter.value_at(i);
    if (key == "$and") {
      if (!val.is_array()) throw UnsupportedOperator("$and needs an array");
      for (const DocValue& sub : val.elements())
        if (!filter_matches(doc, sub, vars)) return false;
      continue;
    }
    if (key == "$or") {
      if (!val.is_array()) throw UnsupportedOperator("$or needs an array");
      bool any = false;
      for (const DocValue& sub : val.elements())
        if (filter_matches(doc, sub, vars)) any = true;
      if (!any) return false;
      continue;
    }
    if (key == "$expr") {
      if (!is_truthy(expr_eval(val, doc, vars))) return false;
      continue;
    }
    if (!key.empty() && key[0] == '$') throw UnsupportedOperator("top-level " + key);
    bool ok = all_dollar_keys(val) ? operator_clause(doc, key, val)
                                   : value_matches(doc, key, val);
    if (!ok) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Projection: per-path extraction pieces merged into one output document.
// ---------------------------------------------------------------------------

struct ProjSpec {
  bool inclusion = false;
  bool include_id = true;
  bool id_explicit = false;
  // inclusion paths and computed paths in spec order; exclusion paths likewise
  std::vector<std::pair<std::vector<std::string>, std::optional<DocValue>>> entries;
};

inline ProjSpec parse_projection(const DocValue& spec) {
  if (!spec.is_obj()) throw UnsupportedOperator("projection must be an object");
  ProjSpec ps;
  bool saw_include = false, saw_exclude = false;
  std::vector<std::vector<std::string>> paths;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const std::string& key = spec.key_at(i);
    const DocValue& val = spec.value_at(i);
    bool flag_like = val.is_bool() || val.is_number();
    if (key == "_id" && flag_like) {
      ps.include_id = is_truthy(val);
      ps.id_explicit = true;
      continue;
    }
    std::vector<std::string> parts = path_parts(key);
    for (const auto& prev : paths) {
      std::size_t n = std::min(prev.size(), parts.size());
      bool prefix = true;
      for (std::size_t j = 0; j < n; ++j)
        if (prev[j] != parts[j]) prefix = false;
      if (prefix)
        throw UnsupportedOperator("projection path collision at '" + key + "'");
    }
    paths.push_back(parts);
    if (flag_like) {
      (is_truthy(val) ? saw_include : saw_exclude) = true;
      ps.entries.push_back({parts, std::nullopt});
    } else if (val.is_str() && val.as_str().size() >= 2 && val.as_str()[0] == '$' &&
               val.as_str()[1] != '$') {
      saw_include = true;
      ps.entries.push_back({parts, val});
    } else {
      throw UnsupportedOperator("projection value for '" + key + "'");
    }
  }
  // A flag entry's polarity is recoverable from the projection body itself;
  // stash it by re-reading during apply. Mixing is rejected here.
  if (saw_include && saw_exclude)
    throw UnsupportedOperator("projection mixes inclusion and exclusion");
  ps.inclusion = saw_include || (!saw_exclude && ps.id_explicit && ps.include_id);
  return ps;
}

// Extract the sub-structure of `v` along `parts` for an inclusion flag.
inline DocValue include_piece(const DocValue& v, const std::vector<std::string>& parts,
                              std::size_t idx) {
  DocValue out = DocValue::object();
  if (!v.is_obj()) return out;
  const DocValue* child = v.find(parts[idx]);
  if (!child) return out;
  if (idx + 1 == parts.size()) {
    out.set(parts[idx], *child);
  } else if (child->is_obj()) {
    out.set(parts[idx], include_piece(*child, parts, idx + 1));
  } else if (child->is_array()) {
    DocValue arr = DocValue::array();
    for (const DocValue& e : child->elements())
      if (e.is_obj()) arr.push_back(include_piece(e, parts, idx + 1));
    out.set(parts[idx], std::move(arr));
  }
  return out;
}

// Extract the piece for a computed entry: structure follows the document,
// the leaf value comes from the root.
inline DocValue computed_piece(const DocValue& root, const DocValue& v,
                               const std::vector<std::string>& parts, std::size_t idx,
                               const std::string& ref) {
  DocValue out = DocValue::object();
  if (idx + 1 == parts.size()) {
    auto val = resolve(root, ref.substr(1));
    if (val) out.set(parts[idx], *val);
    return out;
  }
  if (!v.is_obj()) return out;
  const DocValue* child = v.find(parts[idx]);
  if (!child) return out;
  if (child->is_obj()) {
    out.set(parts[idx], computed_piece(root, *child, parts, idx + 1, ref));
  } else if (child->is_array()) {
    DocValue arr = DocValue::array();
    for (const DocValue& e : child->elements())
      if (e.is_obj()) arr.push_back(computed_piece(root, e, parts, idx + 1, ref));
    out.set(parts[idx], std::move(arr));
  }
  return out;
}

inline DocValue merge_pieces(const DocValue& a, const DocValue& b) {
  if (a.is_obj() && b.is_obj()) {
    DocValue out = a;
    for (std::size_t i = 0; i < b.size(); ++i) {
      const std::string& k = b.key_at(i);
      if (const DocValue* existing = out.find(k))
        out.set(k, merge_pieces(*existing, b.value_at(i)));
      else
        out.set(k, b.value_at(i));
    }
    return out;
  }
  if (a.is_array() && b.is_array() && a.size() == b.size()) {
    DocValue out = DocValue::array();
    for (std::size_t i = 0; i < a.size(); ++i)
      out.push_back(merge_pieces(a.elements()[i], b.elements()[i]));
    return out;
  }
  return b;
}

inline DocValue exclude_walk(const DocValue& v,
                             const std::vector<std::vector<std::string>>& paths,
                             std::size_t depth) {
  DocValue out = DocValue::object();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string& key = v.key_at(i);
    const DocValue& val = v.value_at(i);
    bool drop = false;
    std::vector<std::vector<std::string>> deeper;
    for (const auto& p : paths) {
      if (p[depth] != key) continue;
      if (p.size() == depth + 1)
        drop = true;
      else
        deeper.push_back(p);
    }
    if (drop) continue;
    if (deeper.empty()) {
      out.set(key, val);
    } else if (val.is_obj()) {
      out.set(key, exclude_walk(val, deeper, depth + 1));
    } else if (val.is_array()) {
      DocValue arr = DocValue::array();
      for (const DocValue& e : val.elements())
        arr.push_back(e.is_obj() ? exclude_walk(e, deeper, depth + 1) : e);
      out.set(key, std::move(arr));
    } else {
      out.set(key, val);
    }
  }
  return out;
}

inline DocValue project_doc(const DocValue& doc, const DocValue& spec) {
  ProjSpec ps = parse_projection(spec);
  if (ps.inclusion) {
    DocValue body = DocValue::object();
    for (const auto& [parts, computed] : ps.entries) {
      DocValue piece = computed
                           ? computed_piece(doc, doc, parts, 0, computed->as_str())
                           : include_piece(doc, parts, 0);
      body = merge_pieces(body, piece);
    }
    // The default _id passes through whole, but an explicit _id entry (for
    // example a projected "_id.x" path) replaces it outright.
    if ((ps.include_id || !ps.id_explicit) && !body.find("_id"))
      if (const DocValue* id = doc.find("_id")) body.set("_id", *id);
    return body;
  }
  std::vector<std::vector<std::string>> paths;
  for (const auto& [parts, computed] : ps.entries)
    if (!computed) paths.push_back(parts);
  DocValue out = paths.empty() ? doc : exclude_walk(doc, paths, 0);
  if (ps.id_explicit && !ps.include_id) out.erase("_id");
  return out;
}

// ---------------------------------------------------------------------------
// Stages.
// ---------------------------------------------------------------------------

inline std::vector<DocValue> sort_docs(std::vector<DocValue> docs, const DocValue& spec) {
  if (!spec.is_obj() || spec.empty())
    throw UnsupportedOperator("sort spec must be a nonempty object");
  std::vector<std::pair<std::string, bool>> keys;  // path, ascending
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const DocValue& d = spec.value_at(i);
    if (!d.is_number() || (d.number_value() != 1.0 && d.number_value() != -1.0))
      throw UnsupportedOperator("sort direction for '" + spec.key_at(i) + "'");
    keys.push_back({spec.key_at(i), d.number_value() > 0});
  }
  auto key_of = [](const DocValue& d, const std::string& path) {
    auto r = resolve(d, path);
    return r ? *r : DocValue::null();
  };
  std::stable_sort(docs.begin(), docs.end(),
                   [&](const DocValue& a, const DocValue& b) {
                     for (const auto& [path, asc] : keys) {
                       int c = DocValue::compare(key_of(a, path), key_of(b, path));
                       if (c != 0) return asc ? c < 0 : c > 0;
                     }
                     return false;
                   });
  return docs;
}

// Rebuild `doc` with the value at `parts` (known present under plain
// objects) replaced by `leaf`; with no leaf provided the key is removed.
inline DocValue rebuild_with(const DocValue& doc,
                             const std::vector<std::string>& parts, std::size_t idx,
                             const DocValue* leaf) {
  DocValue out = DocValue::object();
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string& key = doc.key_at(i);
    if (key != parts[idx]) {
      out.set(key, doc.value_at(i));
      continue;
    }
    if (idx + 1 == parts.size()) {
      if (leaf) out.set(key, *leaf);
    } else {
      out.set(key, rebuild_with(doc.value_at(i), parts, idx + 1, leaf));
    }
  }
  return out;
}

inline std::vector<DocValue> unwind_docs(const std::vector<DocValue>& docs,
                                         const DocValue& body) {
  std::string path;
  bool preserve = false;
  if (body.is_str()) {
    path = body.as_str();
  } else if (body.is_obj()) {
    for (std::size_t i = 0; i < body.size(); ++i) {
      const std::string& k = body.key_at(i);
      if (k != "path" && k != "preserveNullAndEmptyArrays")
        throw UnsupportedOperator("$unwind option " + k);
    }
    const DocValue* p = body.find("path");
    if (!p || !p->is_str()) throw UnsupportedOperator("$unwind path");
    path = p->as_str();
    if (const DocValue* pres = body.find("preserveNullAndEmptyArrays")) {
      if (!pres->is_bool())
        throw UnsupportedOperator("preserveNullAndEmptyArrays must be a boolean");
      preserve = pres->as_bool();
    }
  } else {
    throw UnsupportedOperator("$unwind body");
  }
  if (path.size() < 2 || path[0] != '$' || path[1] == '$')
    throw UnsupportedOperator("$unwind path must be a \"$field\" string");
  std::vector<std::string> parts = path_parts(path.substr(1));

  std::vector<DocValue> out;
  for (const DocValue& d : docs) {
    const DocValue* v = &d;
    bool found = true;
    for (const std::string& part : parts) {
      if (!v->is_obj() || !v->find(part)) {
        found = false;
        break;
      }
      v = v->find(part);
    }
    if (!found || v->is_null()) {
      if (preserve) out.push_back(d);
      continue;
    }
    if (!v->is_array()) {
      out.push_back(d);
      continue;
    }
    if (v->empty()) {
      if (preserve) out.push_back(rebuild_with(d, parts, 0, nullptr));
      continue;
    }
    for (const DocValue& e : v->elements())
      out.push_back(rebuild_with(d, parts, 0, &e));
  }
  return out;
}

inline std::optional<DocValue> acc_value(const DocValue& expr, const DocValue& doc) {
  if (expr.is_obj() || expr.is_array())
    throw UnsupportedOperator("composite accumulator expressions");
  if (expr.is_str()) {
    const std::string& s = expr.as_str();
    if (s.rfind("$$", 0) == 0) throw UnsupportedOperator("variables in accumulators");
    if (!s.empty() && s[0] == '$') return resolve(doc, s.substr(1));
    return expr;
  }
  return expr;
}

inline DocValue group_key_of(const DocValue& id_spec, const DocValue& doc) {
  auto ref_of = [](const DocValue& v) -> std::string {
    if (!v.is_str() || v.as_str().size() < 2 || v.as_str()[0] != '$' ||
        v.as_str()[1] == '$')
      return "";
    return v.as_str().substr(1);
  };
  if (id_spec.is_null()) return DocValue::null();
  if (id_spec.is_str()) {
    std::string ref = ref_of(id_spec);
    if (ref.empty())
      throw UnsupportedOperator("$group _id must be null, \"$path\", or an object");
    auto r = resolve(doc, ref);
    return r ? *r : DocValue::null();
  }
  if (id_spec.is_obj()) {
    DocValue key = DocValue::object();
    for (std::size_t i = 0; i < id_spec.size(); ++i) {
      std::string ref = ref_of(id_spec.value_at(i));
      if (ref.empty())
        throw UnsupportedOperator("$group _id object values must be \"$path\" refs");
      auto r = resolve(doc, ref);
      key.set(id_spec.key_at(i), r ? *r : DocValue::null());
    }
    return key;
  }
  throw UnsupportedOperator("$group _id form");
}

inline std::vector<DocValue> group_docs(const std::vector<DocValue>& docs,
                                        const DocValue& body) {
  if (!body.is_obj()) throw UnsupportedOperator("$group body");
  const DocValue* id_spec = body.find("_id");
  if (!id_spec) throw UnsupportedOperator("$group requires _id");

  std::vector<std::pair<std::string, DocValue>> accs;  // name, {$op: expr}
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body.key_at(i) == "_id") continue;
    const DocValue& spec = body.value_at(i);
    if (!spec.is_obj() || spec.size() != 1 || spec.key_at(0).empty() ||
        spec.key_at(0)[0] != '$')
      throw UnsupportedOperator("accumulator for '" + body.key_at(i) + "'");
    const std::string& op = spec.key_at(0);
    if (op != "$sum" && op != "$avg" && op != "$min" && op != "$max" &&
        op != "$push" && op != "$addToSet" && op != "$first" && op != "$last")
      throw UnsupportedOperator(op);
    accs.push_back({body.key_at(i), spec});
  }

  std::vector<DocValue> keys;
  std::vector<std::vector<const DocValue*>> members;
  for (const DocValue& d : docs) {
    DocValue key = group_key_of(*id_spec, d);
    std::size_t slot = keys.size();
    for (std::size_t i = 0; i < keys.size(); ++i)
      if (keys[i] == key) {
        slot = i;
        break;
      }
    if (slot == keys.size()) {
      keys.push_back(std::move(key));
      members.emplace_back();
    }
    members[slot].push_back(&d);
  }

  std::vector<DocValue> out;
  for (std::size_t gi = 0; gi < keys.size(); ++gi) {
    DocValue doc = DocValue::object();
    doc.set("_id", keys[gi]);
    for (const auto& [name, spec] : accs) {
      const std::string& op = spec.key_at(0);
      const DocValue& expr = spec.value_at(0);
      std::vector<std::optional<DocValue>> vals;
      for (const DocValue* m : members[gi]) vals.push_back(acc_value(expr, *m));

      if (op == "$sum") {
        std::int64_t isum = 0;
        double fsum = 0.0;
        bool promoted = false;
        for (const auto& v : vals) {
          if (!v || !v->is_number()) continue;
          if (!promoted && v->is_int()) {
            isum += v->as_int();
          } else {
            if (!promoted) {
              fsum = static_cast<double>(isum);
              promoted = true;
            }
            fsum += v->number_value();
          }
        }
        doc.set(name, promoted ? DocValue::number(fsum) : DocValue::integer(isum));
      } else if (op == "$avg") {
        double total = 0.0;
        std::size_t n = 0;
        for (const auto& v : vals)
          if (v && v->is_number()) {
            total += v->number_value();
            ++n;
          }
        doc.set(name, n ? DocValue::number(total / static_cast<double>(n))
                        : DocValue::null());
      } else if (op == "$min" || op == "$max") {
        std::optional<DocValue> best;
        for (const auto& v : vals) {
          if (!v || v->is_null()) continue;
          if (!best) {
            best = *v;
            continue;
          }
          int c = DocValue::compare(*v, *best);
          if ((op == "$min" && c < 0) || (op == "$max" && c > 0)) best = *v;
        }
        doc.set(name, best ? *best : DocValue::null());
      } else if (op == "$push") {
        DocValue arr = DocValue::array();
        for (const auto& v : vals)
          if (v) arr.push_back(*v);
        doc.set(name, std::move(arr));
      } else if (op == "$addToSet") {
        DocValue arr = DocValue::array();
        for (const auto& v : vals) {
          if (!v) continue;
          bool dup = false;
          for (const DocValue& e : arr.elements())
            if (e == *v) dup = true;
          if (!dup) arr.push_back(*v);
        }
        doc.set(name, std::move(arr));
      } else if (op == "$first") {
        if (!vals.empty() && vals.front()) doc.set(name, *vals.front());
      } else {  // $last
        if (!vals.empty() && vals.back()) doc.set(name, *vals.back());
      }
    }
    out.push_back(std::move(doc));
  }
  return out;
}

inline std::vector<DocValue> run_pipeline(const DocumentDatabase& db,
                                          std::vector<DocValue> docs,
                                          const std::vector<Stage>& stages,
                                          const Vars* vars, bool* ordered);

inline std::vector<DocValue> lookup_docs(const DocumentDatabase& db,
                                         std::vector<DocValue> docs,
                                         const DocValue& body) {
  if (!body.is_obj()) throw UnsupportedOperator("$lookup body");
  for (std::size_t i = 0; i < body.size(); ++i) {
    const std::string& k = body.key_at(i);
    if (k != "from" && k != "as" && k != "localField" && k != "foreignField" &&
        k != "pipeline" && k != "let")
      throw UnsupportedOperator("$lookup option " + k);
  }
  const DocValue* from = body.find("from");
  const DocValue* as = body.find("as");
  if (!from || !from->is_str() || !as || !as->is_str())
    throw UnsupportedOperator("$lookup requires string 'from' and 'as'");
  const std::vector<DocValue>& foreign = db.collection(from->as_str());

  if (const DocValue* pipeline = body.find("pipeline")) {
    if (body.find("localField") || body.find("foreignField"))
      throw UnsupportedOperator("$lookup mixes equality and pipeline forms");
    if (!pipeline->is_array()) throw UnsupportedOperator("$lookup pipeline");
    std::vector<Stage> stages;
    for (const DocValue& e : pipeline->elements()) {
      if (!e.is_obj() || e.size() != 1)
        throw UnsupportedOperator("$lookup pipeline stage shape");
      Stage st;
      st.op_name = e.key_at(0);
      st.op = mqlkit::stage_op_from_name(st.op_name);
      st.body = e.value_at(0);
      stages.push_back(std::move(st));
    }
    const DocValue* let = body.find("let");
    if (let && !let->is_obj()) throw UnsupportedOperator("$lookup let");
    for (DocValue& d : docs) {
      Vars vars;
      if (let)
        for (std::size_t i = 0; i < let->size(); ++i)
          vars[let->key_at(i)] = expr_eval(let->value_at(i), d, nullptr);
      std::vector<DocValue> joined = run_pipeline(db, foreign, stages, &vars, nullptr);
      d.set(as->as_str(), DocValue::array(std::move(joined)));
    }
    return docs;
  }

  const DocValue* local = body.find("localField");
  const DocValue* fkey = body.find("foreignField");
  if (!local || !local->is_str() || !fkey || !fkey->is_str() || body.find("let"))
    throw UnsupportedOperator("$lookup requires localField/foreignField or pipeline");

  auto side_values = [](const DocValue& d, const std::string& path) {
    Gathered g = gather(d, path);
    if (!g.found) g.expanded.push_back(DocValue::null());
    return g.expanded;
  };
  for (DocValue& d : docs) {
    std::vector<DocValue> lvals = side_values(d, local->as_str());
    DocValue joined = DocValue::array();
    for (const DocValue& f : foreign) {
      bool hit = false;
      for (const DocValue& fv : side_values(f, fkey->as_str()))
        for (const DocValue& lv : lvals)
          if (lv == fv) hit = true;
      if (hit) joined.push_back(f);
    }
    d.set(as->as_str(), std::move(joined));
  }
  return docs;
}

inline std::vector<DocValue> run_pipeline(const DocumentDatabase& db,
                                          std::vector<DocValue> docs,
                                          const std::vector<Stage>& stages,
                                          const Vars* vars, bool* ordered) {
  for (const Stage& st : stages) {
    switch (st.op) {
      case StageOp::Match: {
        std::vector<DocValue> kept;
        for (const DocValue& d : docs)
          if (filter_matches(d, st.body, vars)) kept.push_back(d);
        docs = std::move(kept);
        break;
      }
      case StageOp::Project: {
        std::vector<DocValue> mapped;
        for (const DocValue& d : docs) mapped.push_back(project_doc(d, st.body));
        docs = std::move(mapped);
        break;
      }
      case StageOp::Unwind:
        docs = unwind_docs(docs, st.body);
        break;
      case StageOp::Group:
        docs = group_docs(docs, st.body);
        break;
      case StageOp::Sort:
        if (ordered) *ordered = true;
        docs = sort_docs(std::move(docs), st.body);
        break;
      case StageOp::Limit: {
        if (!st.body.is_int() || st.body.as_int() < 0)
          throw UnsupportedOperator("$limit needs a nonnegative integer");
        auto n = static_cast<std::size_t>(st.body.as_int());
        if (docs.size() > n) docs.resize(n);
        break;
      }
      case StageOp::Skip: {
        if (!st.body.is_int() || st.body.as_int() < 0)
          throw UnsupportedOperator("$skip needs a nonnegative integer");
        auto n = static_cast<std::size_t>(st.body.as_int());
        std::vector<DocValue> rest;
        for (std::size_t i = n; i < docs.size(); ++i) rest.push_back(docs[i]);
        docs = std::move(rest);
        break;
      }
      case StageOp::Count: {
        if (!st.body.is_str() || st.body.as_str().empty())
          throw UnsupportedOperator("$count needs a nonempty field name");
        DocValue d = DocValue::object();
        d.set(st.body.as_str(), DocValue::integer(static_cast<std::int64_t>(docs.size())));
        docs = {std::move(d)};
        break;
      }
      case StageOp::Lookup:
        docs = lookup_docs(db, std::move(docs), st.body);
        break;
      default:
        throw UnsupportedOperator(st.op_name);
    }
  }
  return docs;
}

inline Result oracle_execute(const DocumentDatabase& db, const QueryAst& ast) {
  if (!db.has_collection(ast.collection))
    throw mqlkit::UnknownCollection(ast.collection);
  Result r;
  if (ast.method == QueryMethod::Find) {
    const FindClauses& fc = *ast.find_clauses;
    for (const DocValue& d : db.collection(ast.collection))
      if (filter_matches(d, fc.filter, nullptr)) r.docs.push_back(d);
    if (fc.sort) {
      r.docs = sort_docs(std::move(r.docs), *fc.sort);
      r.ordered = true;
    }
    if (fc.limit) {
      if (*fc.limit < 0) throw UnsupportedOperator("negative limit");
      auto n = static_cast<std::size_t>(*fc.limit);
      if (r.docs.size() > n) r.docs.resize(n);
    }
    if (fc.projection) {
      std::vector<DocValue> mapped;
      for (const DocValue& d : r.docs) mapped.push_back(project_doc(d, *fc.projection));
      r.docs = std::move(mapped);
    }
    return r;
  }
  r.docs = run_pipeline(db, db.collection(ast.collection), ast.pipeline, nullptr,
                        &r.ordered);
  return r;
}

}  // namespace naive
