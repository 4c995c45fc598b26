#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "mqlkit/errors.hpp"

namespace mqlkit {

/// Ordered JSON-like document value. Objects remember insertion order and
/// reject duplicate keys via set() overwrite. Integers and doubles are kept
/// apart so that round-tripping preserves "1" vs "1.0", but the two compare
/// equal numerically.
class DocValue {
 public:
  enum class Kind { Null, Bool, Int, Float, Str, Array, Obj };

  DocValue() : kind_(Kind::Null) {}

  static DocValue null() { return DocValue(); }
  static DocValue boolean(bool b) {
    DocValue v;
    v.kind_ = Kind::Bool;
    v.bool_ = b;
    return v;
  }
  static DocValue integer(std::int64_t i) {
    DocValue v;
    v.kind_ = Kind::Int;
    v.int_ = i;
    return v;
  }
  static DocValue number(double d) {
    DocValue v;
    v.kind_ = Kind::Float;
    v.float_ = d;
    return v;
  }
  static DocValue str(std::string s) {
    DocValue v;
    v.kind_ = Kind::Str;
    v.str_ = std::move(s);
    return v;
  }
  static DocValue array(std::vector<DocValue> elems = {}) {
    DocValue v;
    v.kind_ = Kind::Array;
    v.elems_ = std::move(elems);
    return v;
  }
  static DocValue object() {
    DocValue v;
    v.kind_ = Kind::Obj;
    return v;
  }

  Kind kind() const { return kind_; }
  bool is_null() const { return kind_ == Kind::Null; }
  bool is_bool() const { return kind_ == Kind::Bool; }
  bool is_int() const { return kind_ == Kind::Int; }
  bool is_float() const { return kind_ == Kind::Float; }
  bool is_number() const { return kind_ == Kind::Int || kind_ == Kind::Float; }
  bool is_str() const { return kind_ == Kind::Str; }
  bool is_array() const { return kind_ == Kind::Array; }
  bool is_obj() const { return kind_ == Kind::Obj; }

  bool as_bool() const {
    require(Kind::Bool);
    return bool_;
  }
  std::int64_t as_int() const {
    require(Kind::Int);
    return int_;
  }
  double as_float() const {
    require(Kind::Float);
    return float_;
  }
  /// Numeric value of an Int or Float.
  double number_value() const {
    if (kind_ == Kind::Int) return static_cast<double>(int_);
    require(Kind::Float);
    return float_;
  }
  const std::string& as_str() const {
    require(Kind::Str);
    return str_;
  }

  const std::vector<DocValue>& elements() const {
    require(Kind::Array);
    return elems_;
  }
  std::vector<DocValue>& elements() {
    require(Kind::Array);
    return elems_;
  }
  void push_back(DocValue v) {
    require(Kind::Array);
    elems_.push_back(std::move(v));
  }

  std::size_t size() const {
    if (kind_ == Kind::Array) return elems_.size();
    require(Kind::Obj);
    return keys_.size();
  }
  bool empty() const { return size() == 0; }

  const std::string& key_at(std::size_t i) const {
    require(Kind::Obj);
    return keys_[i];
  }
  const DocValue& value_at(std::size_t i) const {
    require(Kind::Obj);
    return vals_[i];
  }
  DocValue& value_at(std::size_t i) {
    require(Kind::Obj);
    return vals_[i];
  }

  const DocValue* find(std::string_view key) const {
    require(Kind::Obj);
    for (std::size_t i = 0; i < keys_.size(); ++i)
      if (keys_[i] == key) return &vals_[i];
    return nullptr;
  }
  DocValue* find(std::string_view key) {
    require(Kind::Obj);
    for (std::size_t i = 0; i < keys_.size(); ++i)
      if (keys_[i] == key) return &vals_[i];
    return nullptr;
  }
  bool contains(std::string_view key) const { return find(key) != nullptr; }

  /// Insert or overwrite; insertion order is preserved for new keys.
  void set(std::string key, DocValue value) {
    require(Kind::Obj);
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      if (keys_[i] == key) {
        vals_[i] = std::move(value);
        return;
      }
    }
    keys_.push_back(std::move(key));
    vals_.push_back(std::move(value));
  }

  bool erase(std::string_view key) {
    require(Kind::Obj);
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      if (keys_[i] == key) {
        keys_.erase(keys_.begin() + static_cast<std::ptrdiff_t>(i));
        vals_.erase(vals_.begin() + static_cast<std::ptrdiff_t>(i));
        return true;
      }
    }
    return false;
  }

  /// Strict structural equality. Object key ORDER matters; Int and Float
  /// compare numerically (2 == 2.0).
  friend bool operator==(const DocValue& a, const DocValue& b) {
    if (a.is_number() && b.is_number()) {
      if (a.kind_ == Kind::Int && b.kind_ == Kind::Int) return a.int_ == b.int_;
      return a.number_value() == b.number_value();
    }
    if (a.kind_ != b.kind_) return false;
    switch (a.kind_) {
      case Kind::Null:
        return true;
      case Kind::Bool:
        return a.bool_ == b.bool_;
      case Kind::Str:
        return a.str_ == b.str_;
      case Kind::Array:
        return a.elems_ == b.elems_;
      case Kind::Obj:
        return a.keys_ == b.keys_ && a.vals_ == b.vals_;
      default:
        return false;  // numeric kinds handled above
    }
  }
  friend bool operator!=(const DocValue& a, const DocValue& b) {
    return !(a == b);
  }

  /// Like operator== but insensitive to object key order (at every depth).
  /// Array order still matters.
  static bool equals_unordered(const DocValue& a, const DocValue& b) {
    if (a.is_number() && b.is_number()) {
      if (a.kind_ == Kind::Int && b.kind_ == Kind::Int) return a.int_ == b.int_;
      return a.number_value() == b.number_value();
    }
    if (a.kind_ != b.kind_) return false;
    switch (a.kind_) {
      case Kind::Obj: {
        if (a.keys_.size() != b.keys_.size()) return false;
        for (std::size_t i = 0; i < a.keys_.size(); ++i) {
          const DocValue* bv = b.find(a.keys_[i]);
          if (!bv || !equals_unordered(a.vals_[i], *bv)) return false;
        }
        return true;
      }
      case Kind::Array: {
        if (a.elems_.size() != b.elems_.size()) return false;
        for (std::size_t i = 0; i < a.elems_.size(); ++i)
          if (!equals_unordered(a.elems_[i], b.elems_[i])) return false;
        return true;
      }
      default:
        return a == b;
    }
  }

  /// Total order used by sorting, range predicates and min/max. Values of
  /// different species are ranked Null < numbers < strings < objects <
  /// arrays < booleans; within a species the comparison is the natural one
  /// (objects entry-wise by key then value, arrays lexicographic).
  /// Returns <0, 0, >0.
  static int compare(const DocValue& a, const DocValue& b) {
    int ra = rank(a), rb = rank(b);
    if (ra != rb) return ra < rb ? -1 : 1;
    switch (a.kind_) {
      case Kind::Null:
        return 0;
      case Kind::Bool: {
        const DocValue& bb = b;
        if (a.bool_ == bb.bool_) return 0;
        return a.bool_ ? 1 : -1;
      }
      case Kind::Int:
      case Kind::Float: {
        if (a.kind_ == Kind::Int && b.kind_ == Kind::Int) {
          if (a.int_ == b.int_) return 0;
          return a.int_ < b.int_ ? -1 : 1;
        }
        double x = a.number_value(), y = b.number_value();
        if (x == y) return 0;
        return x < y ? -1 : 1;
      }
      case Kind::Str:
        return a.str_ == b.str_ ? 0 : (a.str_ < b.str_ ? -1 : 1);
      case Kind::Obj: {
        std::size_t n = std::min(a.keys_.size(), b.keys_.size());
        for (std::size_t i = 0; i < n; ++i) {
          if (a.keys_[i] != b.keys_[i])
            return a.keys_[i] < b.keys_[i] ? -1 : 1;
          int c = compare(a.vals_[i], b.vals_[i]);
          if (c != 0) return c;
        }
        if (a.keys_.size() == b.keys_.size()) return 0;
        return a.keys_.size() < b.keys_.size() ? -1 : 1;
      }
      case Kind::Array: {
        std::size_t n = std::min(a.elems_.size(), b.elems_.size());
        for (std::size_t i = 0; i < n; ++i) {
          int c = compare(a.elems_[i], b.elems_[i]);
          if (c != 0) return c;
        }
        if (a.elems_.size() == b.elems_.size()) return 0;
        return a.elems_.size() < b.elems_.size() ? -1 : 1;
      }
    }
    return 0;
  }

  /// Canonical compact JSON: double quotes, no whitespace, object keys in
  /// stored order, doubles via shortest round-trip form with a ".0" suffix
  /// when they would otherwise print as integers. Byte-stable across runs.
  std::string to_json() const {
    std::string out;
    write_json(out);
    return out;
  }

  /// Render a number for canonical output.
  static std::string format_double(double d) {
    if (std::isnan(d) || std::isinf(d)) return "null";
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, d);
    std::string s(buf, res.ptr);
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find('n') == std::string::npos && s.find('i') == std::string::npos)
      s += ".0";
    return s;
  }

  static void write_json_string(std::string& out, const std::string& s) {
    out += '"';
    for (unsigned char c : s) {
      switch (c) {
        case '"':
          out += "\\\"";
          break;
        case '\\':
          out += "\\\\";
          break;
        case '\b':
          out += "\\b";
          break;
        case '\f':
          out += "\\f";
          break;
        case '\n':
          out += "\\n";
          break;
        case '\r':
          out += "\\r";
          break;
        case '\t':
          out += "\\t";
          break;
        default:
          if (c < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", c);
            out += buf;
          } else {
            out += static_cast<char>(c);
          }
      }
    }
    out += '"';
  }

 private:
  static int rank(const DocValue& v) {
    switch (v.kind_) {
      case Kind::Null:
        return 0;
      case Kind::Int:
      case Kind::Float:
        return 1;
      case Kind::Str:
        return 2;
      case Kind::Obj:
        return 3;
      case Kind::Array:
        return 4;
      case Kind::Bool:
        return 5;
    }
    return 0;
  }

  void require(Kind k) const {
    if (kind_ != k) throw Error("DocValue kind mismatch");
  }

  void write_json(std::string& out) const {
    switch (kind_) {
      case Kind::Null:
        out += "null";
        break;
      case Kind::Bool:
        out += bool_ ? "true" : "false";
        break;
      case Kind::Int:
        out += std::to_string(int_);
        break;
      case Kind::Float:
        out += format_double(float_);
        break;
      case Kind::Str:
        write_json_string(out, str_);
        break;
      case Kind::Array: {
        out += '[';
        for (std::size_t i = 0; i < elems_.size(); ++i) {
          if (i) out += ',';
          elems_[i].write_json(out);
        }
        out += ']';
        break;
      }
      case Kind::Obj: {
        out += '{';
        for (std::size_t i = 0; i < keys_.size(); ++i) {
          if (i) out += ',';
          write_json_string(out, keys_[i]);
          out += ':';
          vals_[i].write_json(out);
        }
        out += '}';
        break;
      }
    }
  }

  Kind kind_;
  bool bool_ = false;
  std::int64_t int_ = 0;
  double float_ = 0.0;
  std::string str_;
  std::vector<DocValue> elems_;
  std::vector<std::string> keys_;
  std::vector<DocValue> vals_;
};

}  // namespace mqlkit
