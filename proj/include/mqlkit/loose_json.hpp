#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>

#include "mqlkit/doc_value.hpp"
#include "mqlkit/errors.hpp"

namespace mqlkit {

/// Tolerant JSON decoder for model-written fragments. On top of strict JSON
/// it accepts:
///   - unquoted keys, including $-prefixed and dotted ones ({$match: ...})
///   - single-quoted strings ('x') alongside double-quoted ones
///   - trailing commas in objects and arrays
///   - a missing colon when the value that follows is an object
///     ({$project {_id: 0}})
///   - bareword values, decoded as strings except true/false/null
/// It rejects everything else with MalformedFragment carrying the byte
/// offset where decoding stopped.
class LooseJsonReader {
 public:
  explicit LooseJsonReader(std::string_view text, std::size_t start = 0)
      : text_(text), pos_(start) {}

  std::size_t position() const { return pos_; }

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool at_end() {
    skip_ws();
    return pos_ >= text_.size();
  }

  char peek() {
    skip_ws();
    if (pos_ >= text_.size()) throw MalformedFragment(pos_, "unexpected end of input");
    return text_[pos_];
  }

  bool try_consume(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != c)
      throw MalformedFragment(pos_, std::string("expected '") + c + "'");
    ++pos_;
  }

  DocValue parse_value() {
    char c = peek();
    switch (c) {
      case '{':
        return parse_object();
      case '[':
        return parse_array();
      case '"':
      case '\'':
        return DocValue::str(parse_string());
      default:
        if (c == '-' || c == '+' || std::isdigit(static_cast<unsigned char>(c)))
          return parse_number();
        if (is_word_start(c)) return parse_bareword();
        throw MalformedFragment(pos_, "unexpected character");
    }
  }

  DocValue parse_object() {
    expect('{');
    DocValue obj = DocValue::object();
    if (try_consume('}')) return obj;
    while (true) {
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == '}') {  // after trailing comma
        ++pos_;
        return obj;
      }
      std::string key = parse_key();
      skip_ws();
      if (!try_consume(':')) {
        // Repairable only when the value is an object that starts right away.
        if (pos_ >= text_.size() || text_[pos_] != '{')
          throw MalformedFragment(pos_, "expected ':' after object key");
      }
      obj.set(std::move(key), parse_value());
      if (try_consume(',')) continue;
      expect('}');
      return obj;
    }
  }

  DocValue parse_array() {
    expect('[');
    DocValue arr = DocValue::array();
    if (try_consume(']')) return arr;
    while (true) {
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == ']') {  // after trailing comma
        ++pos_;
        return arr;
      }
      arr.push_back(parse_value());
      if (try_consume(',')) continue;
      expect(']');
      return arr;
    }
  }

  std::string parse_string() {
    skip_ws();
    if (pos_ >= text_.size() || (text_[pos_] != '"' && text_[pos_] != '\''))
      throw MalformedFragment(pos_, "expected string");
    char quote = text_[pos_++];
    std::string out;
    while (true) {
      if (pos_ >= text_.size())
        throw MalformedFragment(pos_, "unterminated string");
      char c = text_[pos_++];
      if (c == quote) return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (pos_ >= text_.size())
        throw MalformedFragment(pos_, "unterminated escape");
      char e = text_[pos_++];
      switch (e) {
        case '"':
        case '\'':
        case '\\':
        case '/':
          out += e;
          break;
        case 'b':
          out += '\b';
          break;
        case 'f':
          out += '\f';
          break;
        case 'n':
          out += '\n';
          break;
        case 'r':
          out += '\r';
          break;
        case 't':
          out += '\t';
          break;
        case 'u': {
          unsigned cp = parse_hex4();
          if (cp >= 0xD800 && cp <= 0xDBFF) {  // surrogate pair
            if (pos_ + 1 < text_.size() && text_[pos_] == '\\' &&
                text_[pos_ + 1] == 'u') {
              pos_ += 2;
              unsigned lo = parse_hex4();
              if (lo >= 0xDC00 && lo <= 0xDFFF)
                cp = 0x10000 + ((cp - 0xD800) << 10) + (lo - 0xDC00);
              else
                throw MalformedFragment(pos_, "invalid low surrogate");
            } else {
              throw MalformedFragment(pos_, "lone high surrogate");
            }
          }
          append_utf8(out, cp);
          break;
        }
        default:
          throw MalformedFragment(pos_ - 1, "invalid escape");
      }
    }
  }

 private:
  std::string parse_key() {
    skip_ws();
    if (pos_ >= text_.size())
      throw MalformedFragment(pos_, "expected object key");
    char c = text_[pos_];
    if (c == '"' || c == '\'') return parse_string();
    if (!is_word_start(c) && !std::isdigit(static_cast<unsigned char>(c)))
      throw MalformedFragment(pos_, "expected object key");
    std::size_t start = pos_;
    while (pos_ < text_.size() && is_key_char(text_[pos_])) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  DocValue parse_bareword() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && is_key_char(text_[pos_])) ++pos_;
    std::string_view w = text_.substr(start, pos_ - start);
    if (w == "true") return DocValue::boolean(true);
    if (w == "false") return DocValue::boolean(false);
    if (w == "null") return DocValue::null();
    return DocValue::str(std::string(w));
  }

  DocValue parse_number() {
    std::size_t start = pos_;
    if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) ++pos_;
    bool integral = true;
    while (pos_ < text_.size() &&
           std::isdigit(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      integral = false;
      ++pos_;
      while (pos_ < text_.size() &&
             std::isdigit(static_cast<unsigned char>(text_[pos_])))
        ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      integral = false;
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+'))
        ++pos_;
      while (pos_ < text_.size() &&
             std::isdigit(static_cast<unsigned char>(text_[pos_])))
        ++pos_;
    }
    std::string_view num = text_.substr(start, pos_ - start);
    std::string_view digits = num;
    if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
    if (digits.empty() || digits == "-")
      throw MalformedFragment(start, "malformed number");
    if (integral) {
      std::int64_t i = 0;
      auto res = std::from_chars(digits.data(), digits.data() + digits.size(), i);
      constexpr std::int64_t kSafe = 9007199254740992;  // 2^53
      if (res.ec == std::errc() && res.ptr == digits.data() + digits.size() &&
          i >= -kSafe && i <= kSafe)
        return DocValue::integer(i);
    }
    double d = 0.0;
    auto res = std::from_chars(digits.data(), digits.data() + digits.size(), d);
    if (res.ec != std::errc() || res.ptr != digits.data() + digits.size())
      throw MalformedFragment(start, "malformed number");
    return DocValue::number(d);
  }

  unsigned parse_hex4() {
    if (pos_ + 4 > text_.size())
      throw MalformedFragment(pos_, "truncated \\u escape");
    unsigned cp = 0;
    for (int i = 0; i < 4; ++i) {
      char h = text_[pos_++];
      cp <<= 4;
      if (h >= '0' && h <= '9')
        cp |= static_cast<unsigned>(h - '0');
      else if (h >= 'a' && h <= 'f')
        cp |= static_cast<unsigned>(h - 'a' + 10);
      else if (h >= 'A' && h <= 'F')
        cp |= static_cast<unsigned>(h - 'A' + 10);
      else
        throw MalformedFragment(pos_ - 1, "invalid hex digit");
    }
    return cp;
  }

  static void append_utf8(std::string& out, unsigned cp) {
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xC0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xE0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    }
  }

  static bool is_word_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
  }
  static bool is_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
           c == '$' || c == '.';
  }

  std::string_view text_;
  std::size_t pos_;
};

/// Decode one complete fragment; trailing non-space characters are an error.
inline DocValue loose_json_decode(std::string_view text) {
  LooseJsonReader r(text);
  DocValue v = r.parse_value();
  if (!r.at_end())
    throw MalformedFragment(r.position(), "trailing characters after value");
  return v;
}

}  // namespace mqlkit
