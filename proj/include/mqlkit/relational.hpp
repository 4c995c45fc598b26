#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "mqlkit/doc_value.hpp"
#include "mqlkit/document_db.hpp"
#include "mqlkit/errors.hpp"
#include "mqlkit/json_io.hpp"

namespace mqlkit {

struct ForeignKey {
  std::string column;
  std::string ref_table;
  std::string ref_column;
};

struct Column {
  std::string name;
  std::string type;  // int | real | bool | text
};

struct Table {
  std::string name;
  std::vector<Column> columns;
  std::string primary_key;  // empty when none declared
  std::vector<std::vector<DocValue>> rows;
  std::vector<ForeignKey> foreign_keys;

  int column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i].name == name) return static_cast<int>(i);
    return -1;
  }
};

struct RelationalDump {
  std::string name;
  std::vector<Table> tables;

  int table_index(const std::string& name) const {
    for (std::size_t i = 0; i < tables.size(); ++i)
      if (tables[i].name == name) return static_cast<int>(i);
    return -1;
  }
};

namespace detail {

inline DocValue coerce_cell(const DocValue& v, const std::string& type,
                            const std::string& where) {
  if (v.is_null()) return DocValue::null();
  if (type == "int") {
    if (v.is_int()) return v;
    if (v.is_float()) {
      double d = v.as_float();
      if (d == std::floor(d) && std::abs(d) <= 9007199254740992.0)
        return DocValue::integer(static_cast<std::int64_t>(d));
    }
    throw SchemaError(where + ": expected int");
  }
  if (type == "real") {
    if (v.is_number()) return DocValue::number(v.number_value());
    throw SchemaError(where + ": expected real");
  }
  if (type == "bool") {
    if (v.is_bool()) return v;
    throw SchemaError(where + ": expected bool");
  }
  if (type == "text") {
    if (v.is_str()) return v;
    throw SchemaError(where + ": expected text");
  }
  throw SchemaError(where + ": unknown column type tag '" + type + "'");
}

}  // namespace detail

/// Validate structure and coerce every cell to its column type. Throws
/// SchemaError on any violation (unknown FK targets, row arity, bad cells).
inline void validate_dump(RelationalDump& dump) {
  for (Table& t : dump.tables) {
    if (t.name.empty()) throw SchemaError("table with empty name");
    if (!t.primary_key.empty() && t.column_index(t.primary_key) < 0)
      throw SchemaError(t.name + ": primary key '" + t.primary_key +
                        "' is not a column");
    for (const ForeignKey& fk : t.foreign_keys) {
      if (t.column_index(fk.column) < 0)
        throw SchemaError(t.name + ": foreign-key column '" + fk.column +
                          "' is not a column");
      int ri = dump.table_index(fk.ref_table);
      if (ri < 0)
        throw SchemaError(t.name + ": foreign key references unknown table '" +
                          fk.ref_table + "'");
      if (dump.tables[static_cast<std::size_t>(ri)].column_index(fk.ref_column) < 0)
        throw SchemaError(t.name + ": foreign key references unknown column '" +
                          fk.ref_table + "." + fk.ref_column + "'");
    }
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      if (t.rows[r].size() != t.columns.size())
        throw SchemaError(t.name + ": row " + std::to_string(r) +
                          " has wrong arity");
      for (std::size_t c = 0; c < t.columns.size(); ++c)
        t.rows[r][c] = detail::coerce_cell(
            t.rows[r][c], t.columns[c].type,
            t.name + "." + t.columns[c].name + " row " + std::to_string(r));
    }
  }
}

inline RelationalDump dump_from_json(const DocValue& v) {
  if (!v.is_obj()) throw SchemaError("relational dump must be a JSON object");
  RelationalDump dump;
  if (const DocValue* name = v.find("name"); name && name->is_str())
    dump.name = name->as_str();
  const DocValue* tables = v.find("tables");
  if (!tables || !tables->is_array())
    throw SchemaError("relational dump needs a 'tables' array");
  for (const DocValue& tv : tables->elements()) {
    if (!tv.is_obj()) throw SchemaError("table entries must be objects");
    Table t;
    if (const DocValue* n = tv.find("name"); n && n->is_str()) t.name = n->as_str();
    if (const DocValue* cols = tv.find("columns"); cols && cols->is_array()) {
      for (const DocValue& cv : cols->elements()) {
        if (!cv.is_obj()) throw SchemaError(t.name + ": column entries must be objects");
        Column c;
        if (const DocValue* n = cv.find("name"); n && n->is_str()) c.name = n->as_str();
        if (const DocValue* ty = cv.find("type"); ty && ty->is_str()) c.type = ty->as_str();
        if (c.name.empty()) throw SchemaError(t.name + ": column with empty name");
        t.columns.push_back(std::move(c));
      }
    }
    if (const DocValue* pk = tv.find("primary_key"); pk && pk->is_str())
      t.primary_key = pk->as_str();
    if (const DocValue* rows = tv.find("rows"); rows && rows->is_array()) {
      for (const DocValue& rv : rows->elements()) {
        if (!rv.is_array()) throw SchemaError(t.name + ": rows must be arrays");
        t.rows.push_back(rv.elements());
      }
    }
    if (const DocValue* fks = tv.find("foreign_keys"); fks && fks->is_array()) {
      for (const DocValue& fv : fks->elements()) {
        if (!fv.is_obj()) throw SchemaError(t.name + ": foreign_keys entries must be objects");
        ForeignKey fk;
        if (const DocValue* c = fv.find("column"); c && c->is_str()) fk.column = c->as_str();
        if (const DocValue* rt = fv.find("ref_table"); rt && rt->is_str())
          fk.ref_table = rt->as_str();
        if (const DocValue* rc = fv.find("ref_column"); rc && rc->is_str())
          fk.ref_column = rc->as_str();
        t.foreign_keys.push_back(std::move(fk));
      }
    }
    dump.tables.push_back(std::move(t));
  }
  validate_dump(dump);
  return dump;
}

inline RelationalDump load_relational_dump(const std::filesystem::path& path) {
  return dump_from_json(parse_strict_json(read_text_file(path)));
}

}  // namespace mqlkit
