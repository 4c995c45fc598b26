#pragma once

#include <cctype>
#include <string>
#include <string_view>

#include "mqlkit/errors.hpp"
#include "mqlkit/loose_json.hpp"
#include "mqlkit/query_ast.hpp"

namespace mqlkit {

namespace detail {

class QueryTextParser {
 public:
  explicit QueryTextParser(std::string_view text) : text_(text) {}

  QueryAst parse() {
    skip_ws();
    expect_word("db");
    expect_char('.');
    std::string collection = parse_ident("collection name");
    expect_char('.');
    std::size_t method_pos = pos_;
    std::string method = parse_ident("method name");

    QueryAst ast;
    ast.collection = std::move(collection);
    if (method == "find") {
      ast.method = QueryMethod::Find;
      ast.find_clauses = parse_find_call();
    } else if (method == "aggregate") {
      ast.method = QueryMethod::Aggregate;
      ast.pipeline = parse_aggregate_call();
    } else {
      throw UnknownMethod(method_pos, method);
    }

    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == ';') ++pos_;
    skip_ws();
    if (pos_ < text_.size())
      throw ParseError(pos_, "unexpected trailing characters");
    return ast;
  }

 private:
  FindClauses parse_find_call() {
    FindClauses fc;
    expect_char('(');
    if (!lookahead_is(')')) {
      fc.filter = parse_loose_value();
      if (!fc.filter.is_obj())
        throw ParseError(pos_, "find filter must be an object");
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == ',') {
        ++pos_;
        DocValue proj = parse_loose_value();
        if (!proj.is_obj())
          throw ParseError(pos_, "find projection must be an object");
        fc.projection = std::move(proj);
      }
    }
    expect_char(')');
    // Chained modifiers. Anything but sort/limit is out of dialect.
    while (true) {
      skip_ws();
      if (pos_ >= text_.size() || text_[pos_] != '.') break;
      ++pos_;
      std::size_t name_pos = pos_;
      std::string name = parse_ident("chained method name");
      if (name == "sort") {
        expect_char('(');
        DocValue s = parse_loose_value();
        if (!s.is_obj()) throw ParseError(pos_, "sort argument must be an object");
        fc.sort = std::move(s);
        expect_char(')');
      } else if (name == "limit") {
        expect_char('(');
        DocValue n = parse_loose_value();
        if (!n.is_int()) throw ParseError(pos_, "limit argument must be an integer");
        fc.limit = n.as_int();
        expect_char(')');
      } else {
        throw ParseError(name_pos, "unsupported chained call '" + name + "'");
      }
    }
    return fc;
  }

  std::vector<Stage> parse_aggregate_call() {
    expect_char('(');
    DocValue arg = parse_loose_value();
    if (!arg.is_array())
      throw ParseError(pos_, "aggregate argument must be an array of stages");
    expect_char(')');
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '.')
      throw ParseError(pos_, "chained calls after aggregate are not supported");

    std::vector<Stage> pipeline;
    for (const DocValue& elem : arg.elements()) {
      if (!elem.is_obj() || elem.size() != 1)
        throw ParseError(pos_, "each stage must be an object with one operator key");
      const std::string& name = elem.key_at(0);
      if (name.empty() || name[0] != '$')
        throw ParseError(pos_, "stage operator must start with '$': '" + name + "'");
      Stage st;
      st.op = stage_op_from_name(name);
      st.op_name = name;
      st.body = elem.value_at(0);
      pipeline.push_back(std::move(st));
    }
    return pipeline;
  }

  DocValue parse_loose_value() {
    LooseJsonReader r(text_, pos_);
    DocValue v = r.parse_value();
    pos_ = r.position();
    return v;
  }

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool lookahead_is(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  void expect_char(char c) {
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != c)
      throw ParseError(pos_, std::string("expected '") + c + "'");
    ++pos_;
  }

  void expect_word(std::string_view w) {
    skip_ws();
    if (text_.substr(pos_, w.size()) != w)
      throw ParseError(pos_, "expected '" + std::string(w) + "'");
    pos_ += w.size();
  }

  std::string parse_ident(const std::string& what) {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(
                                       text_[pos_])) ||
                                   text_[pos_] == '_'))
      ++pos_;
    if (pos_ == start) throw ParseError(pos_, "expected " + what);
    return std::string(text_.substr(start, pos_ - start));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parse one shell-style call: db.<collection>.find(filter[, projection])
/// with optional chained .sort(...) / .limit(n), or
/// db.<collection>.aggregate([stage, ...]). A trailing semicolon is
/// optional. Arguments are decoded tolerantly (see LooseJsonReader).
/// Throws ParseError / UnknownMethod / MalformedFragment.
inline QueryAst parse_query(std::string_view text) {
  return detail::QueryTextParser(text).parse();
}

}  // namespace mqlkit
