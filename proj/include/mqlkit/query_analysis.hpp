#pragma once

#include <cctype>
#include <set>
#include <string>
#include <vector>

#include "mqlkit/query_ast.hpp"

namespace mqlkit {

/// Schema elements a query touches. database_fields are dotted paths read
/// from stored documents; defined_fields are names the query itself
/// introduces (group keys, accumulator outputs, computed projections,
/// lookup targets); collections are the target collection plus every
/// $lookup "from".
struct FieldProfile {
  std::set<std::string> database_fields;
  std::set<std::string> defined_fields;
  std::set<std::string> collections;
};

/// Stage-keyword sequence: operator names in order for aggregates, the
/// present find clauses (filter always, then projection/sort/limit) for
/// finds.
inline std::vector<std::string> extract_stage_keywords(const QueryAst& ast) {
  std::vector<std::string> out;
  if (ast.method == QueryMethod::Aggregate) {
    for (const Stage& s : ast.pipeline) out.push_back(s.op_name);
    return out;
  }
  const FindClauses& fc = *ast.find_clauses;
  out.push_back("filter");
  if (fc.projection) out.push_back("projection");
  if (fc.sort) out.push_back("sort");
  if (fc.limit) out.push_back("limit");
  return out;
}

namespace detail {

inline bool is_dollar_ref(const DocValue& v) {
  return v.is_str() && !v.as_str().empty() && v.as_str()[0] == '$';
}
inline bool is_var_ref(const DocValue& v) {
  return v.is_str() && v.as_str().size() >= 2 && v.as_str()[0] == '$' &&
         v.as_str()[1] == '$';
}

class ProfileWalker {
 public:
  explicit ProfileWalker(FieldProfile& out) : out_(out) {}

  void walk_pipeline(const std::vector<Stage>& stages) {
    for (const Stage& s : stages) walk_stage(s);
  }

  void walk_stage(const Stage& s) {
    switch (s.op) {
      case StageOp::Match:
        match_ctx(s.body);
        break;
      case StageOp::Project:
        projection_ctx(s.body);
        break;
      case StageOp::Sort:
        sort_ctx(s.body);
        break;
      case StageOp::Unwind:
        unwind_ctx(s.body);
        break;
      case StageOp::Group:
        group_ctx(s.body);
        break;
      case StageOp::Lookup:
        lookup_ctx(s.body);
        break;
      default:
        break;  // $limit/$skip/$count/Other carry no field references
    }
  }

  void match_ctx(const DocValue& filter) {
    if (!filter.is_obj()) return;
    for (std::size_t i = 0; i < filter.size(); ++i) {
      const std::string& key = filter.key_at(i);
      const DocValue& val = filter.value_at(i);
      if (key == "$and" || key == "$or") {
        if (val.is_array())
          for (const DocValue& sub : val.elements()) match_ctx(sub);
        continue;
      }
      if (key == "$expr") {
        expr_ctx(val);
        continue;
      }
      if (!key.empty() && key[0] == '$') continue;
      out_.database_fields.insert(key);
      // Operator-object values ({$gt: 3}) hold literals, not references;
      // nothing inside contributes fields.
    }
  }

  void projection_ctx(const DocValue& proj) {
    if (!proj.is_obj()) return;
    for (std::size_t i = 0; i < proj.size(); ++i) {
      const std::string& key = proj.key_at(i);
      const DocValue& val = proj.value_at(i);
      out_.database_fields.insert(key);
      if (val.is_number() || val.is_bool()) continue;  // plain include/exclude
      out_.defined_fields.insert(key);
      expr_ctx(val);
    }
  }

  void sort_ctx(const DocValue& sort) {
    if (!sort.is_obj()) return;
    for (std::size_t i = 0; i < sort.size(); ++i)
      out_.database_fields.insert(sort.key_at(i));
  }

  void unwind_ctx(const DocValue& body) {
    if (body.is_str()) {
      add_path_ref(body.as_str());
    } else if (body.is_obj()) {
      if (const DocValue* p = body.find("path"); p && p->is_str())
        add_path_ref(p->as_str());
    }
  }

  void group_ctx(const DocValue& body) {
    if (!body.is_obj()) return;
    for (std::size_t i = 0; i < body.size(); ++i) {
      const std::string& key = body.key_at(i);
      const DocValue& val = body.value_at(i);
      if (key == "_id") {
        if (val.is_obj()) {
          for (std::size_t j = 0; j < val.size(); ++j) {
            out_.defined_fields.insert(val.key_at(j));
            expr_ctx(val.value_at(j));
          }
        } else {
          expr_ctx(val);
        }
        continue;
      }
      out_.defined_fields.insert(key);
      if (val.is_obj())
        for (std::size_t j = 0; j < val.size(); ++j) expr_ctx(val.value_at(j));
    }
  }

  void lookup_ctx(const DocValue& body) {
    if (!body.is_obj()) return;
    if (const DocValue* v = body.find("from"); v && v->is_str())
      out_.collections.insert(v->as_str());
    if (const DocValue* v = body.find("localField"); v && v->is_str())
      out_.database_fields.insert(v->as_str());
    if (const DocValue* v = body.find("foreignField"); v && v->is_str())
      out_.database_fields.insert(v->as_str());
    if (const DocValue* v = body.find("as"); v && v->is_str())
      out_.defined_fields.insert(v->as_str());
    if (const DocValue* v = body.find("let"); v && v->is_obj())
      for (std::size_t j = 0; j < v->size(); ++j) expr_ctx(v->value_at(j));
    if (const DocValue* v = body.find("pipeline"); v && v->is_array()) {
      for (const DocValue& elem : v->elements()) {
        if (!elem.is_obj() || elem.size() != 1) continue;
        Stage st;
        st.op_name = elem.key_at(0);
        st.op = stage_op_from_name(st.op_name);
        st.body = elem.value_at(0);
        walk_stage(st);
      }
    }
  }

  void expr_ctx(const DocValue& v) {
    if (v.is_str()) {
      if (is_var_ref(v)) return;  // let-variables are not database fields
      if (is_dollar_ref(v)) out_.database_fields.insert(v.as_str().substr(1));
      return;
    }
    if (v.is_array()) {
      for (const DocValue& e : v.elements()) expr_ctx(e);
      return;
    }
    if (v.is_obj())
      for (std::size_t i = 0; i < v.size(); ++i) expr_ctx(v.value_at(i));
  }

 private:
  void add_path_ref(const std::string& s) {
    if (s.size() >= 2 && s[0] == '$' && s[1] != '$')
      out_.database_fields.insert(s.substr(1));
    else if (!s.empty() && s[0] != '$')
      out_.database_fields.insert(s);
  }

  FieldProfile& out_;
};

}  // namespace detail

inline FieldProfile extract_field_profile(const QueryAst& ast) {
  FieldProfile profile;
  profile.collections.insert(ast.collection);
  detail::ProfileWalker w(profile);
  if (ast.method == QueryMethod::Aggregate) {
    w.walk_pipeline(ast.pipeline);
  } else {
    const FindClauses& fc = *ast.find_clauses;
    w.match_ctx(fc.filter);
    if (fc.projection) w.projection_ctx(*fc.projection);
    if (fc.sort) w.sort_ctx(*fc.sort);
  }
  return profile;
}

namespace detail {

inline bool is_op_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

/// True when `token` occurs in `text` delimited by non-word characters, the
/// same notion of occurrence a token scan of the serialized query would use.
inline bool contains_op_token(const std::string& text, const std::string& token) {
  std::size_t pos = 0;
  while ((pos = text.find(token, pos)) != std::string::npos) {
    bool left_ok = pos == 0 || !is_op_word_char(text[pos - 1]);
    std::size_t end = pos + token.size();
    bool right_ok = end >= text.size() || !is_op_word_char(text[end]);
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

inline void scan_text_for_banned(const std::string& text,
                                 const std::set<std::string>& banned,
                                 std::set<std::string>& hits) {
  for (const std::string& b : banned)
    if (contains_op_token(text, b)) hits.insert(b);
}

inline void scan_banned(const DocValue& v, const std::set<std::string>& banned,
                        std::set<std::string>& hits) {
  if (v.is_obj()) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      scan_text_for_banned(v.key_at(i), banned, hits);
      scan_banned(v.value_at(i), banned, hits);
    }
  } else if (v.is_array()) {
    for (const DocValue& e : v.elements()) scan_banned(e, banned, hits);
  } else if (v.is_str()) {
    // A banned name in value position (operator quoted inside an expression
    // string) still disqualifies the example.
    scan_text_for_banned(v.as_str(), banned, hits);
  }
}

}  // namespace detail

inline std::set<std::string> default_banned_ops() {
  return {"$isArray", "$concatArrays", "$arrayElemAt"};
}

/// Report every banned operator name occurring anywhere in the query body.
inline std::set<std::string> detect_special_ops(
    const QueryAst& ast, const std::set<std::string>& banned = default_banned_ops()) {
  std::set<std::string> hits;
  if (ast.method == QueryMethod::Aggregate) {
    for (const Stage& s : ast.pipeline) {
      detail::scan_text_for_banned(s.op_name, banned, hits);
      detail::scan_banned(s.body, banned, hits);
    }
  } else {
    const FindClauses& fc = *ast.find_clauses;
    detail::scan_banned(fc.filter, banned, hits);
    if (fc.projection) detail::scan_banned(*fc.projection, banned, hits);
    if (fc.sort) detail::scan_banned(*fc.sort, banned, hits);
  }
  return hits;
}

}  // namespace mqlkit
