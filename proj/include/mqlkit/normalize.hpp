#pragma once

#include <cctype>
#include <map>
#include <string>
#include <vector>

#include "mqlkit/errors.hpp"
#include "mqlkit/query_ast.hpp"

namespace mqlkit {

namespace detail {

inline std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::string last_path_segment(const std::string& path) {
  std::size_t dot = path.rfind('.');
  return dot == std::string::npos ? path : path.substr(dot + 1);
}

/// Rewrites the first segment of a dotted path when the rename map has an
/// entry for it.
inline std::string rename_path(const std::string& path,
                               const std::map<std::string, std::string>& renames) {
  if (renames.empty()) return path;
  std::size_t dot = path.find('.');
  std::string head = dot == std::string::npos ? path : path.substr(0, dot);
  auto it = renames.find(head);
  if (it == renames.end()) return path;
  return dot == std::string::npos ? it->second : it->second + path.substr(dot);
}

/// Rewrites "$path" string values only. Used in expression context, where
/// object literal keys define fresh names and must stay verbatim.
inline DocValue rename_expr_refs(const DocValue& v,
                                 const std::map<std::string, std::string>& renames) {
  if (v.is_str()) {
    const std::string& s = v.as_str();
    if (s.size() >= 2 && s[0] == '$' && s[1] != '$')
      return DocValue::str("$" + rename_path(s.substr(1), renames));
    return v;
  }
  if (v.is_array()) {
    DocValue out = DocValue::array();
    for (const DocValue& e : v.elements())
      out.push_back(rename_expr_refs(e, renames));
    return out;
  }
  if (v.is_obj()) {
    DocValue out = DocValue::object();
    for (std::size_t i = 0; i < v.size(); ++i)
      out.set(v.key_at(i), rename_expr_refs(v.value_at(i), renames));
    return out;
  }
  return v;
}

/// Generic rewrite of keys and "$path" string values. Lookup and group
/// stages are handled structure-aware by the caller; this walker is for
/// everything else, where any non-operator key and any $-reference is a
/// field path of the current document stream.
inline DocValue rename_refs(const DocValue& v,
                            const std::map<std::string, std::string>& renames) {
  if (v.is_str()) {
    const std::string& s = v.as_str();
    if (s.size() >= 2 && s[0] == '$' && s[1] != '$')
      return DocValue::str("$" + rename_path(s.substr(1), renames));
    return v;
  }
  if (v.is_array()) {
    DocValue out = DocValue::array();
    for (const DocValue& e : v.elements()) out.push_back(rename_refs(e, renames));
    return out;
  }
  if (v.is_obj()) {
    DocValue out = DocValue::object();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string& key = v.key_at(i);
      std::string new_key =
          (!key.empty() && key[0] == '$') ? key : rename_path(key, renames);
      out.set(std::move(new_key), rename_refs(v.value_at(i), renames));
    }
    return out;
  }
  return v;
}

class RenameNormalizer {
 public:
  std::vector<Stage> normalize_pipeline(const std::vector<Stage>& stages) {
    std::map<std::string, std::string> active;
    return normalize_scope(stages, active);
  }

 private:
  std::vector<Stage> normalize_scope(const std::vector<Stage>& stages,
                                     std::map<std::string, std::string>& active) {
    std::vector<Stage> out;
    out.reserve(stages.size());
    for (const Stage& s : stages) {
      Stage ns;
      ns.op = s.op;
      ns.op_name = s.op_name;
      if (s.op == StageOp::Lookup) {
        ns.body = normalize_lookup(s.body, active);
      } else if (s.op == StageOp::Group) {
        ns.body = normalize_group(s.body, active);
      } else {
        ns.body = rename_refs(s.body, active);
      }
      out.push_back(std::move(ns));
    }
    return out;
  }

  /// Accumulator output names and `_id` object keys are fresh definitions:
  /// upstream renames apply only to the "$path" references inside them.
  DocValue normalize_group(const DocValue& body,
                           std::map<std::string, std::string>& active) {
    if (!body.is_obj()) return rename_expr_refs(body, active);
    DocValue out = DocValue::object();
    std::map<std::string, std::string> stage_renames;
    std::map<std::string, std::string> claimed;  // new name -> old name
    for (std::size_t i = 0; i < body.size(); ++i) {
      const std::string& key = body.key_at(i);
      const DocValue& val = body.value_at(i);
      if (key == "_id") {
        if (val.is_obj()) {
          DocValue id = DocValue::object();
          for (std::size_t j = 0; j < val.size(); ++j)
            id.set(val.key_at(j), rename_expr_refs(val.value_at(j), active));
          out.set(key, std::move(id));
        } else {
          out.set(key, rename_expr_refs(val, active));
        }
        continue;
      }
      DocValue acc = rename_expr_refs(val, active);
      std::string new_name = standard_accumulator_name(key, acc);
      auto it = claimed.find(new_name);
      if (it != claimed.end() && it->second != key)
        throw NormalizationConflict("accumulators '" + it->second + "' and '" +
                                    key + "' both standardize to '" + new_name +
                                    "'");
      claimed[new_name] = key;
      out.set(new_name, std::move(acc));
      if (new_name != key) stage_renames[key] = new_name;
    }
    for (auto& [old_name, new_name] : stage_renames) active[old_name] = new_name;
    return out;
  }

  /// `[operation]_[object]` lowercased; `$sum` of a numeric literal means
  /// counting and becomes `count`. Accumulators whose body is not a single
  /// operator over a "$path" keep their original name (no object to derive).
  static std::string standard_accumulator_name(const std::string& key,
                                               const DocValue& val) {
    if (!val.is_obj() || val.size() != 1) return key;
    const std::string& op = val.key_at(0);
    if (op.empty() || op[0] != '$') return key;
    const DocValue& arg = val.value_at(0);
    if (op == "$sum" && arg.is_number()) return "count";
    if (arg.is_str() && arg.as_str().size() >= 2 && arg.as_str()[0] == '$' &&
        arg.as_str()[1] != '$')
      return lowercase(op.substr(1)) + "_" +
             lowercase(last_path_segment(arg.as_str().substr(1)));
    return key;
  }

  DocValue normalize_lookup(const DocValue& body,
                            std::map<std::string, std::string>& active) {
    if (!body.is_obj()) return body;
    // Pre-order numbering: this stage claims its number before any lookup
    // nested in its sub-pipeline.
    std::string new_as = "Docs" + std::to_string(++lookup_counter_);
    DocValue out = DocValue::object();
    std::string old_as;
    for (std::size_t i = 0; i < body.size(); ++i) {
      const std::string& key = body.key_at(i);
      const DocValue& val = body.value_at(i);
      if (key == "localField" && val.is_str()) {
        out.set(key, DocValue::str(rename_path(val.as_str(), active)));
      } else if (key == "let" && val.is_obj()) {
        DocValue lets = DocValue::object();
        for (std::size_t j = 0; j < val.size(); ++j)
          lets.set(val.key_at(j), rename_expr_refs(val.value_at(j), active));
        out.set(key, std::move(lets));
      } else if (key == "pipeline" && val.is_array()) {
        out.set(key, normalize_sub_pipeline(val));
      } else if (key == "as" && val.is_str()) {
        old_as = val.as_str();
        out.set(key, DocValue::str(new_as));
      } else {
        out.set(key, val);
      }
    }
    if (!out.find("as")) out.set("as", DocValue::str(new_as));
    if (!old_as.empty() && old_as != new_as) active[old_as] = new_as;
    return out;
  }

  /// The sub-pipeline runs over the foreign collection: fresh rename scope,
  /// shared lookup counter. Malformed stage elements pass through verbatim.
  DocValue normalize_sub_pipeline(const DocValue& val) {
    std::vector<Stage> sub;
    for (const DocValue& elem : val.elements()) {
      if (!elem.is_obj() || elem.size() != 1) return val;
      Stage st;
      st.op_name = elem.key_at(0);
      st.op = stage_op_from_name(st.op_name);
      st.body = elem.value_at(0);
      sub.push_back(std::move(st));
    }
    std::map<std::string, std::string> fresh;
    std::vector<Stage> normalized = normalize_scope(sub, fresh);
    DocValue arr = DocValue::array();
    for (const Stage& st : normalized) {
      DocValue wrapped = DocValue::object();
      wrapped.set(st.op_name, st.body);
      arr.push_back(std::move(wrapped));
    }
    return arr;
  }

  int lookup_counter_ = 0;
};

}  // namespace detail

/// Standardize author-chosen names: group accumulator outputs become
/// `<op>_<object>` (lowercased; `$sum` over a literal becomes `count`) and
/// lookup `as` targets become Docs1, Docs2, ... in stage order. Downstream
/// references to renamed keys are rewritten consistently. Find queries pass
/// through unchanged; the operation is idempotent.
inline QueryAst normalize_renames(const QueryAst& ast) {
  QueryAst out = ast;
  if (ast.method != QueryMethod::Aggregate) return out;
  detail::RenameNormalizer n;
  out.pipeline = n.normalize_pipeline(ast.pipeline);
  return out;
}

}  // namespace mqlkit
