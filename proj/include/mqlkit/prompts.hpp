#pragma once

#include <set>
#include <string>
#include <vector>

#include "mqlkit/document_db.hpp"
#include "mqlkit/result_compare.hpp"

namespace mqlkit::prompts {

inline constexpr const char* kStepByStep = "A: Let's think step by step!";

inline constexpr const char* kInterfaceSystemPrompt =
    "You are now the MongoDB natural language interface, responsible for "
    "converting user input natural language queries into MongoDB query "
    "statements based on the MongoDB Collection and their Fields, and parsing "
    "the features according to user requirements.";

inline constexpr const char* kGeneratorSystemPrompt =
    "You are now the MongoDB natural language interface, responsible for "
    "converting user input natural language queries into MongoDB query "
    "statements based on the MongoDB collections and their fields.";

/// One line per collection listing every dotted field path seen in its
/// documents, in a stable sorted order.
inline std::string render_db_schema(const DocumentDatabase& db) {
  std::string out;
  for (const auto& [name, docs] : db.collections) {
    std::set<std::string> fields;
    for (const DocValue& d : docs)
      for (const std::string& p : document_field_paths(d)) fields.insert(p);
    out += "- " + name + ": ";
    bool first = true;
    for (const std::string& f : fields) {
      if (!first) out += ", ";
      first = false;
      out += f;
    }
    out += "\n";
  }
  return out;
}

enum class SchemaKind { DatabaseFields, DefinedFields, ResultFields, Collections };

inline const char* schema_kind_name(SchemaKind kind) {
  switch (kind) {
    case SchemaKind::DatabaseFields: return "database_fields";
    case SchemaKind::DefinedFields: return "defined_fields";
    case SchemaKind::ResultFields: return "result_fields";
    case SchemaKind::Collections: return "collections";
  }
  return "";
}

inline const char* schema_instruction(SchemaKind kind) {
  switch (kind) {
    case SchemaKind::DatabaseFields:
      return "please predict the fields used in the query";
    case SchemaKind::DefinedFields:
      return "please predict the fields renamed in the query";
    case SchemaKind::ResultFields:
      return "please predict the fields shown in the final execution result "
             "documents";
    case SchemaKind::Collections:
      return "please predict the collections used in the query";
  }
  return "";
}

inline std::string schema_prediction_prompt(SchemaKind kind,
                                            const std::string& nlq,
                                            const std::string& schema_text) {
  std::string out = "# Given the natural language query, ";
  out += schema_instruction(kind);
  out += ".\n## Natural Language Query: `" + nlq + "`\n";
  out += "## MongoDB Collection and their Fields\n" + schema_text;
  return out;
}

inline std::string generation_prompt(const std::string& nlq,
                                     const std::string& schema_text) {
  std::string out =
      "# Given the MongoDB collections and their fields and natural language "
      "query, please generate final MongoDB query.\n";
  out += "## Natural Language Query: `" + nlq + "`\n";
  out += "## MongoDB Collection and their Fields\n" + schema_text;
  return out;
}

inline std::string render_predicted_schemas(
    const std::vector<std::string>& database_fields,
    const std::vector<std::string>& defined_fields,
    const std::vector<std::string>& result_fields,
    const std::vector<std::string>& collections) {
  auto join = [](const std::vector<std::string>& items) {
    std::string s;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i) s += ", ";
      s += items[i];
    }
    return s;
  };
  std::string out = "## Predicted Schemas\n";
  out += "   - Collections: `" + join(collections) + "`\n";
  out += "   - Database Fields: `" + join(database_fields) + "`\n";
  out += "   - Renamed Fields: `" + join(defined_fields) + "`\n";
  out += "   - Result Fields: `" + join(result_fields) + "`\n";
  return out;
}

inline std::string refine_prompt(const std::string& examples_text,
                                 const std::string& schema_text,
                                 const std::string& nlq,
                                 const std::string& original_query,
                                 const std::string& predicted_text) {
  std::string out = "## Query Transformation Reference Examples\n";
  out += examples_text;
  out += "## MongoDB collections and their fields\n" + schema_text;
  out += "## Natural Language Query\n   - `" + nlq + "`\n";
  out += "## Original MongoDB Query\n" + original_query + "\n";
  out += predicted_text;
  out +=
      "# Please check whether the original MongoDB query answers the natural "
      "language query given the database schemas, the predicted schemas, and "
      "the reference examples. If it is reasonable, keep it; otherwise adjust "
      "it. Give the final MongoDB query.\n";
  out += kStepByStep;
  return out;
}

inline std::string optimize_prompt(const std::string& examples_text,
                                   const std::string& schema_text,
                                   const std::string& nlq,
                                   const std::string& target_fields,
                                   const std::string& original_query,
                                   const std::string& exec_results) {
  std::string out = "## Reference Examples:\n";
  out += examples_text;
  out += "## MongoDB collections and their fields\n" + schema_text;
  out += "## Natural Language Query\n   - `" + nlq + "`\n";
  out += "## Fields Shown in the Execution Results\n   - `" + target_fields +
         "`\n";
  out += "## Original MongoDB Query\n" + original_query + "\n";
  out += "### Execution Results\n" + exec_results + "\n";
  out +=
      "# Please check the original MongoDB query against its execution "
      "results and the reference examples. Correct the query if the results "
      "do not answer the natural language query. Give the final MongoDB "
      "query.\n";
  out += kStepByStep;
  return out;
}

inline std::string cot_generation_prompt(const std::string& nlq,
                                         const std::string& schema_text,
                                         const std::string& target_schema) {
  std::string out =
      "# Given the MongoDB collections and their fields and the user "
      "question, please write the MongoDB query that answers it.\n";
  out += "## MongoDB Collection and their Fields\n" + schema_text;
  out += "## User Question\n   - `" + nlq + "`\n";
  out += "## Schemas of the Reference Execution Result\n   - `" +
         target_schema + "`\n";
  out += kStepByStep;
  return out;
}

inline std::string feedback_prompt(const std::string& nlq,
                                   const std::string& target_schema,
                                   const std::string& candidate,
                                   const std::string& candidate_result_json,
                                   const std::string& reference_result_json) {
  std::string out =
      "# The following NoSQL query was executed, and its result differs from "
      "the reference result.\n";
  out += "## User Question\n   - `" + nlq + "`\n";
  out += "## Required Schemas\n   - `" + target_schema + "`\n";
  out += "## NoSQL Query\n" + candidate + "\n";
  out += "## NoSQL Execution Result\n" + candidate_result_json + "\n";
  out += "## Reference Execution Result\n" + reference_result_json + "\n";
  out +=
      "# Please perform the following two steps: (i) Examine the differences "
      "between the data obtained from executing the NoSQL query and the "
      "reference data. (ii) Analyze where these differences may have "
      "originated from, with no solutions.\n";
  out += kStepByStep;
  return out;
}

inline std::string debug_prompt(const std::string& nlq,
                                const std::string& schema_text,
                                const std::string& target_schema,
                                const std::string& candidate,
                                const std::vector<std::string>& feedback_history) {
  std::string out =
      "# The following NoSQL query produces incorrect execution results. Use "
      "the feedback to correct it, then give the final MongoDB query.\n";
  out += "## User Question\n   - `" + nlq + "`\n";
  out += "## MongoDB Collection and their Fields\n" + schema_text;
  out += "## Schemas of the Reference Execution Result\n   - `" +
         target_schema + "`\n";
  out += "## Current NoSQL Query\n" + candidate + "\n";
  out += "## Execution Feedback\n";
  for (std::size_t i = 0; i < feedback_history.size(); ++i)
    out += std::to_string(i + 1) + ". " + feedback_history[i] + "\n";
  out += kStepByStep;
  return out;
}

inline std::string extension_prompt(const std::string& schema_text,
                                    const std::string& nosql,
                                    const std::vector<std::string>& reference_questions,
                                    const std::string& target_schema,
                                    std::size_t n) {
  std::string out =
      "# Given the MongoDB database schemas and the MongoDB query, please "
      "write " +
      std::to_string(n) +
      " new natural language questions that this query answers. Phrase each "
      "question differently from the reference questions and from each "
      "other. Output one question per line with no numbering.\n";
  out += "## MongoDB collections and their fields\n" + schema_text;
  out += "## MongoDB Query\n" + nosql + "\n";
  out += "## Reference Questions\n";
  for (const std::string& q : reference_questions) out += "   - `" + q + "`\n";
  out += "## Target Schemas\n   - `" + target_schema + "`\n";
  return out;
}

}  // namespace mqlkit::prompts
