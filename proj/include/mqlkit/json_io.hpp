#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "mqlkit/doc_value.hpp"
#include "mqlkit/errors.hpp"

namespace mqlkit {

/// Bridge from strictly parsed JSON (nlohmann, order-preserving) to DocValue.
inline DocValue from_ordered_json(const nlohmann::ordered_json& j) {
  using J = nlohmann::ordered_json;
  switch (j.type()) {
    case J::value_t::null:
      return DocValue::null();
    case J::value_t::boolean:
      return DocValue::boolean(j.get<bool>());
    case J::value_t::number_integer:
      return DocValue::integer(j.get<std::int64_t>());
    case J::value_t::number_unsigned: {
      auto u = j.get<std::uint64_t>();
      if (u <= static_cast<std::uint64_t>(INT64_MAX))
        return DocValue::integer(static_cast<std::int64_t>(u));
      return DocValue::number(static_cast<double>(u));
    }
    case J::value_t::number_float:
      return DocValue::number(j.get<double>());
    case J::value_t::string:
      return DocValue::str(j.get<std::string>());
    case J::value_t::array: {
      DocValue a = DocValue::array();
      for (const auto& e : j) a.push_back(from_ordered_json(e));
      return a;
    }
    case J::value_t::object: {
      DocValue o = DocValue::object();
      for (const auto& [k, v] : j.items()) o.set(k, from_ordered_json(v));
      return o;
    }
    default:
      throw SchemaError("unsupported JSON value type");
  }
}

inline nlohmann::ordered_json to_ordered_json(const DocValue& v) {
  using J = nlohmann::ordered_json;
  switch (v.kind()) {
    case DocValue::Kind::Null:
      return nullptr;
    case DocValue::Kind::Bool:
      return v.as_bool();
    case DocValue::Kind::Int:
      return v.as_int();
    case DocValue::Kind::Float:
      return v.as_float();
    case DocValue::Kind::Str:
      return v.as_str();
    case DocValue::Kind::Array: {
      J a = J::array();
      for (const auto& e : v.elements()) a.push_back(to_ordered_json(e));
      return a;
    }
    case DocValue::Kind::Obj: {
      J o = J::object();
      for (std::size_t i = 0; i < v.size(); ++i)
        o[v.key_at(i)] = to_ordered_json(v.value_at(i));
      return o;
    }
  }
  return nullptr;
}

/// Parse text that is expected to be well-formed JSON. Throws SchemaError
/// on malformed input (this path is for files the toolchain itself wrote,
/// not for model output; model output goes through the tolerant decoder).
inline DocValue parse_strict_json(std::string_view text) {
  auto j = nlohmann::ordered_json::parse(text, nullptr, false);
  if (j.is_discarded())
    throw SchemaError("malformed JSON: " +
                      std::string(text.substr(0, std::min<std::size_t>(text.size(), 80))));
  return from_ordered_json(j);
}

}  // namespace mqlkit
