#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "mqlkit/doc_value.hpp"
#include "mqlkit/engine.hpp"

namespace mqlkit {

enum class ResultOutcome { Equal, FieldsDiffer, ValuesDiffer, BothDiffer };

namespace detail {

/// Canonical string with object keys sorted at every depth and numbers
/// unified (2 and 2.0 render identically), for multiset membership keys.
inline void write_unordered_canonical(const DocValue& v, std::string& out) {
  switch (v.kind()) {
    case DocValue::Kind::Obj: {
      std::vector<std::size_t> order(v.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&v](std::size_t a, std::size_t b) {
        return v.key_at(a) < v.key_at(b);
      });
      out += '{';
      for (std::size_t i = 0; i < order.size(); ++i) {
        if (i) out += ',';
        DocValue::write_json_string(out, v.key_at(order[i]));
        out += ':';
        write_unordered_canonical(v.value_at(order[i]), out);
      }
      out += '}';
      break;
    }
    case DocValue::Kind::Array: {
      out += '[';
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        write_unordered_canonical(v.elements()[i], out);
      }
      out += ']';
      break;
    }
    case DocValue::Kind::Int:
      out += std::to_string(v.as_int());
      break;
    case DocValue::Kind::Float: {
      double d = v.as_float();
      if (d == static_cast<double>(static_cast<std::int64_t>(d)) &&
          d >= -9007199254740992.0 && d <= 9007199254740992.0) {
        out += std::to_string(static_cast<std::int64_t>(d));
      } else {
        out += DocValue::format_double(d);
      }
      break;
    }
    default:
      out += v.to_json();
  }
}

inline std::string unordered_canonical(const DocValue& v) {
  std::string out;
  write_unordered_canonical(v, out);
  return out;
}

inline void collect_field_paths(const DocValue& v, const std::string& prefix,
                                std::vector<std::string>& out) {
  if (v.is_obj()) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::string path =
          prefix.empty() ? v.key_at(i) : prefix + "." + v.key_at(i);
      out.push_back(path);
      collect_field_paths(v.value_at(i), path, out);
    }
  } else if (v.is_array()) {
    for (const DocValue& e : v.elements()) collect_field_paths(e, prefix, out);
  }
}

inline void collect_leaf_values(const DocValue& v, std::vector<std::string>& out) {
  if (v.is_obj()) {
    for (std::size_t i = 0; i < v.size(); ++i)
      collect_leaf_values(v.value_at(i), out);
  } else if (v.is_array()) {
    for (const DocValue& e : v.elements()) collect_leaf_values(e, out);
  } else {
    out.push_back(unordered_canonical(v));
  }
}

}  // namespace detail

/// Dotted key paths of one document, interior and leaf keys alike; array
/// elements contribute under their parent path with no index component.
inline std::vector<std::string> document_field_paths(const DocValue& doc) {
  std::vector<std::string> out;
  detail::collect_field_paths(doc, "", out);
  std::sort(out.begin(), out.end());
  return out;
}

/// Canonicalized leaf scalars of one document (numbers unified).
inline std::vector<std::string> document_leaf_values(const DocValue& doc) {
  std::vector<std::string> out;
  detail::collect_leaf_values(doc, out);
  std::sort(out.begin(), out.end());
  return out;
}

struct ResultComparison {
  bool equal = false;         // result sets identical (EX)
  bool fields_match = false;  // per-document field-path multisets agree (EFM)
  bool values_match = false;  // leaf-value multisets agree (EVM)

  ResultOutcome outcome() const {
    if (equal) return ResultOutcome::Equal;
    if (!fields_match && !values_match) return ResultOutcome::BothDiffer;
    if (!fields_match) return ResultOutcome::FieldsDiffer;
    return ResultOutcome::ValuesDiffer;
  }

  /// Short label for logs and feedback prompts.
  std::string describe() const {
    switch (outcome()) {
      case ResultOutcome::Equal:
        return "results identical";
      case ResultOutcome::FieldsDiffer:
        return "field names differ";
      case ResultOutcome::BothDiffer:
        return "field names and values differ";
      case ResultOutcome::ValuesDiffer:
        return fields_match && values_match
                   ? "same fields and values, arrangement differs"
                   : "values differ";
    }
    return "";
  }
};

/// Compare two result sets. Documents compare with key order ignored and
/// Int/Float unified; the sets compare pairwise only when BOTH carry a
/// query-imposed order, as multisets otherwise.
inline ResultComparison compare_results(const ResultSet& a, const ResultSet& b) {
  ResultComparison cmp;

  if (a.ordered && b.ordered) {
    cmp.equal = a.docs.size() == b.docs.size();
    if (cmp.equal)
      for (std::size_t i = 0; i < a.docs.size(); ++i)
        if (!DocValue::equals_unordered(a.docs[i], b.docs[i])) {
          cmp.equal = false;
          break;
        }
  } else {
    std::vector<std::string> ka, kb;
    for (const DocValue& d : a.docs) ka.push_back(detail::unordered_canonical(d));
    for (const DocValue& d : b.docs) kb.push_back(detail::unordered_canonical(d));
    std::sort(ka.begin(), ka.end());
    std::sort(kb.begin(), kb.end());
    cmp.equal = ka == kb;
  }

  std::vector<std::vector<std::string>> fa, fb;
  for (const DocValue& d : a.docs) fa.push_back(document_field_paths(d));
  for (const DocValue& d : b.docs) fb.push_back(document_field_paths(d));
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  cmp.fields_match = fa == fb;

  std::vector<std::string> va, vb;
  for (const DocValue& d : a.docs) {
    auto leaves = document_leaf_values(d);
    va.insert(va.end(), leaves.begin(), leaves.end());
  }
  for (const DocValue& d : b.docs) {
    auto leaves = document_leaf_values(d);
    vb.insert(vb.end(), leaves.begin(), leaves.end());
  }
  std::sort(va.begin(), va.end());
  std::sort(vb.begin(), vb.end());
  cmp.values_match = va == vb;

  return cmp;
}

/// Render a result set as a JSON array (document key order as produced).
inline std::string result_to_json(const ResultSet& rs) {
  DocValue arr = DocValue::array(rs.docs);
  return arr.to_json();
}

}  // namespace mqlkit
