#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mqlkit/chat.hpp"
#include "mqlkit/document_db.hpp"
#include "mqlkit/engine.hpp"
#include "mqlkit/errors.hpp"
#include "mqlkit/prompts.hpp"
#include "mqlkit/query_parser.hpp"
#include "mqlkit/result_compare.hpp"
#include "mqlkit/vector_library.hpp"

namespace mqlkit {

struct PredictedSchemas {
  std::vector<std::string> database_fields;
  std::vector<std::string> defined_fields;
  std::vector<std::string> result_fields;
  std::vector<std::string> collections;
};

struct TranscriptEntry {
  std::string stage;
  std::string prompt;
  std::string reply;
};

/// Full per-example record of a pipeline run. Stages fill it in order, so a
/// later field is never populated while an earlier one is still empty.
struct SmartTrace {
  std::string id;
  std::string nlq;
  std::string db_id;
  PredictedSchemas predicted;
  std::string initial_query;
  std::vector<std::string> refine_retrieved_ids;
  std::string refined_query;
  std::string execution_excerpt;
  std::vector<std::string> optimize_retrieved_ids;
  std::string final_query;
  std::vector<TranscriptEntry> transcript;
  std::vector<std::string> warnings;
  bool failed = false;
  std::string error;
};

struct TestExample {
  std::string id;
  std::string nlq;
  std::string db_id;
};

struct SmartClients {
  ChatClient* schema = nullptr;
  ChatClient* generator = nullptr;
  ChatClient* refiner = nullptr;
  ChatClient* optimizer = nullptr;
};

struct SmartOptions {
  RetrievalWeights weights;
  std::size_t k = 20;
  std::size_t excerpt_docs = 5;
};

namespace detail {

inline std::string trim_copy(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> lines;
  std::string current;
  for (char c : s) {
    if (c == '\n') {
      lines.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current += c;
    }
  }
  lines.push_back(current);
  return lines;
}

inline std::string join_comma(const std::vector<std::string>& items) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) s += ", ";
    s += items[i];
  }
  return s;
}

}  // namespace detail

/// Split a schema-prediction reply on commas and newlines, trim each piece
/// (whitespace and stray backticks), and deduplicate preserving first
/// occurrence. An empty reply yields an empty list.
inline std::vector<std::string> parse_field_list(const std::string& reply) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::string current;
  auto flush = [&] {
    std::string t = detail::trim_copy(current);
    while (!t.empty() && t.front() == '`') t.erase(t.begin());
    while (!t.empty() && t.back() == '`') t.pop_back();
    t = detail::trim_copy(t);
    if (!t.empty() && seen.insert(t).second) out.push_back(t);
    current.clear();
  };
  for (char c : reply) {
    if (c == ',' || c == '\n') {
      flush();
    } else {
      current += c;
    }
  }
  flush();
  return out;
}

/// Pull the query text out of a chat reply. Preference order: the last
/// complete code-fenced block, else the last line containing a
/// db.<collection>.find( or db.<collection>.aggregate( call (taken from the
/// "db." onward). The returned text always ends with a semicolon.
inline std::string extract_query(const std::string& reply) {
  auto ensure_semicolon = [](std::string q) {
    while (!q.empty() && std::isspace(static_cast<unsigned char>(q.back())))
      q.pop_back();
    if (!q.empty() && q.back() != ';') q += ';';
    return q;
  };

  const std::vector<std::string> lines = detail::split_lines(reply);

  std::optional<std::string> last_block;
  bool in_block = false;
  std::string block;
  for (const std::string& line : lines) {
    const std::string t = detail::trim_copy(line);
    if (t.rfind("```", 0) == 0) {
      if (!in_block) {
        in_block = true;
        block.clear();
      } else {
        in_block = false;
        last_block = block;
      }
      continue;
    }
    if (in_block) {
      block += line;
      block += '\n';
    }
  }
  if (last_block) {
    const std::string content = ensure_semicolon(detail::trim_copy(*last_block));
    if (!content.empty()) return content;
  }

  static const std::regex call_pattern(
      R"(db\.[A-Za-z_][A-Za-z0-9_]*\.(find|aggregate)\s*\()");
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    std::smatch m;
    if (std::regex_search(*it, m, call_pattern)) {
      const std::string tail = it->substr(static_cast<std::size_t>(m.position(0)));
      return ensure_semicolon(detail::trim_copy(tail));
    }
  }
  throw NoQueryFound("no query found in model reply");
}

inline PredictedSchemas predict_schema(ChatClient& client,
                                       const std::string& example_id,
                                       const std::string& nlq,
                                       const std::string& db_schema_text,
                                       std::vector<TranscriptEntry>* transcript = nullptr) {
  PredictedSchemas out;
  const prompts::SchemaKind kinds[] = {
      prompts::SchemaKind::DatabaseFields, prompts::SchemaKind::DefinedFields,
      prompts::SchemaKind::ResultFields, prompts::SchemaKind::Collections};
  for (prompts::SchemaKind kind : kinds) {
    const std::string prompt =
        prompts::schema_prediction_prompt(kind, nlq, db_schema_text);
    const std::string tag =
        example_id + "/schema_" + prompts::schema_kind_name(kind);
    const std::string reply = client.complete(
        {{"system", prompts::kInterfaceSystemPrompt}, {"user", prompt}}, tag);
    if (transcript) transcript->push_back({tag, prompt, reply});
    std::vector<std::string> fields = parse_field_list(reply);
    switch (kind) {
      case prompts::SchemaKind::DatabaseFields: out.database_fields = std::move(fields); break;
      case prompts::SchemaKind::DefinedFields: out.defined_fields = std::move(fields); break;
      case prompts::SchemaKind::ResultFields: out.result_fields = std::move(fields); break;
      case prompts::SchemaKind::Collections: out.collections = std::move(fields); break;
    }
  }
  return out;
}

/// Throws NoQueryFound when the reply holds no recognizable query; the
/// caller records that as a generation failure.
inline std::string generate_initial_query(ChatClient& client,
                                          const std::string& example_id,
                                          const std::string& nlq,
                                          const std::string& db_schema_text,
                                          std::vector<TranscriptEntry>* transcript = nullptr) {
  const std::string prompt = prompts::generation_prompt(nlq, db_schema_text);
  const std::string tag = example_id + "/generate";
  const std::string reply = client.complete(
      {{"system", prompts::kGeneratorSystemPrompt}, {"user", prompt}}, tag);
  if (transcript) transcript->push_back({tag, prompt, reply});
  return extract_query(reply);
}

/// Reference examples are rendered without code fences on purpose: query
/// extraction prefers fenced blocks, and a fenced example would shadow the
/// model's own answer when a reply quotes the prompt.
inline std::string render_reference_examples(const std::vector<ExampleRecord>& examples) {
  if (examples.empty()) return "(none)\n";
  std::string out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    out += "### Example " + std::to_string(i + 1) + "\n";
    out += "   - NLQ: `" + examples[i].nlq + "`\n";
    out += "   - MongoDB Query: " + examples[i].nosql + "\n";
  }
  return out;
}

/// Execute one query text and render the first excerpt_docs result documents
/// as a JSON array. Any parse or execution failure is rendered as text so
/// the optimizer prompt can show the model what went wrong.
inline std::string render_execution_excerpt(const DocumentDatabase& db,
                                            const std::string& query_text,
                                            std::size_t excerpt_docs) {
  try {
    const QueryAst ast = parse_query(query_text);
    const ResultSet rs = execute_query(db, ast);
    ResultSet head;
    head.ordered = rs.ordered;
    const std::size_t n = std::min(rs.docs.size(), excerpt_docs);
    head.docs.assign(rs.docs.begin(), rs.docs.begin() + static_cast<std::ptrdiff_t>(n));
    return result_to_json(head);
  } catch (const Error& e) {
    return std::string("(execution failed: ") + e.what() + ")";
  }
}

inline std::string render_examples_with_results(
    const std::vector<ExampleRecord>& examples,
    const std::map<std::string, DocumentDatabase>& dbs,
    std::size_t excerpt_docs) {
  if (examples.empty()) return "(none)\n";
  std::string out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    out += "### Example " + std::to_string(i + 1) + "\n";
    out += "   - NLQ: `" + examples[i].nlq + "`\n";
    out += "   - MongoDB Query: " + examples[i].nosql + "\n";
    std::string results = "(execution unavailable)";
    auto it = dbs.find(examples[i].db_id);
    if (it != dbs.end()) {
      const std::string rendered =
          render_execution_excerpt(it->second, examples[i].nosql, excerpt_docs);
      if (rendered.rfind("(execution failed", 0) != 0) results = rendered;
    }
    out += "   - Execution Results: " + results + "\n";
  }
  return out;
}

/// Falls back to initial_query (with a warning) when the reply contains no
/// query or the extracted text does not parse.
inline std::string refine_query(ChatClient& client,
                                const std::string& example_id,
                                const std::string& nlq,
                                const std::string& db_schema_text,
                                const PredictedSchemas& predicted,
                                const std::string& initial_query,
                                const std::vector<ExampleRecord>& examples,
                                std::vector<std::string>& warnings,
                                std::vector<TranscriptEntry>* transcript = nullptr) {
  const std::string predicted_text = prompts::render_predicted_schemas(
      predicted.database_fields, predicted.defined_fields,
      predicted.result_fields, predicted.collections);
  const std::string prompt = prompts::refine_prompt(
      render_reference_examples(examples), db_schema_text, nlq, initial_query,
      predicted_text);
  const std::string tag = example_id + "/refine";
  const std::string reply = client.complete(
      {{"system", prompts::kGeneratorSystemPrompt}, {"user", prompt}}, tag);
  if (transcript) transcript->push_back({tag, prompt, reply});
  try {
    const std::string refined = extract_query(reply);
    parse_query(refined);
    return refined;
  } catch (const Error& e) {
    warnings.push_back("refine output unusable, kept initial query: " +
                       std::string(e.what()));
    return initial_query;
  }
}

/// The execution excerpt is computed by the caller (render_execution_excerpt)
/// so the execute step can precede the optimizer's retrieval. Falls back to
/// refined_query when the reply is unusable.
inline std::string optimize_query(ChatClient& client,
                                  const std::string& example_id,
                                  const std::string& nlq,
                                  const std::string& db_schema_text,
                                  const std::string& refined_query,
                                  const std::string& execution_excerpt,
                                  const std::string& examples_with_results,
                                  const std::vector<std::string>& predicted_result_fields,
                                  std::vector<std::string>& warnings,
                                  std::vector<TranscriptEntry>* transcript = nullptr) {
  const std::string prompt = prompts::optimize_prompt(
      examples_with_results, db_schema_text, nlq,
      detail::join_comma(predicted_result_fields), refined_query,
      execution_excerpt);
  const std::string tag = example_id + "/optimize";
  const std::string reply = client.complete(
      {{"system", prompts::kGeneratorSystemPrompt}, {"user", prompt}}, tag);
  if (transcript) transcript->push_back({tag, prompt, reply});
  try {
    const std::string final_query = extract_query(reply);
    parse_query(final_query);
    return final_query;
  } catch (const Error& e) {
    warnings.push_back("optimize output unusable, kept refined query: " +
                       std::string(e.what()));
    return refined_query;
  }
}

inline nlohmann::ordered_json trace_to_json(const SmartTrace& t) {
  nlohmann::ordered_json j;
  j["id"] = t.id;
  j["nlq"] = t.nlq;
  j["db_id"] = t.db_id;
  j["predicted"] = {{"database_fields", t.predicted.database_fields},
                    {"defined_fields", t.predicted.defined_fields},
                    {"result_fields", t.predicted.result_fields},
                    {"collections", t.predicted.collections}};
  j["initial_query"] = t.initial_query;
  j["refine_retrieved_ids"] = t.refine_retrieved_ids;
  j["refined_query"] = t.refined_query;
  j["execution_excerpt"] = t.execution_excerpt;
  j["optimize_retrieved_ids"] = t.optimize_retrieved_ids;
  j["final_query"] = t.final_query;
  j["transcript"] = nlohmann::ordered_json::array();
  for (const TranscriptEntry& e : t.transcript)
    j["transcript"].push_back(
        {{"stage", e.stage}, {"prompt", e.prompt}, {"reply", e.reply}});
  j["warnings"] = t.warnings;
  j["failed"] = t.failed;
  j["error"] = t.error;
  return j;
}

inline SmartTrace trace_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object() || !j.contains("id") || !j["id"].is_string())
    throw SchemaError("trace record must be an object with a string id");
  SmartTrace t;
  auto str = [&](const char* key) {
    return j.contains(key) && j[key].is_string() ? j[key].get<std::string>()
                                                 : std::string();
  };
  auto strs = [&](const nlohmann::ordered_json& node) {
    std::vector<std::string> out;
    if (node.is_array())
      for (const auto& x : node)
        if (x.is_string()) out.push_back(x.get<std::string>());
    return out;
  };
  t.id = j["id"].get<std::string>();
  t.nlq = str("nlq");
  t.db_id = str("db_id");
  if (j.contains("predicted") && j["predicted"].is_object()) {
    const auto& p = j["predicted"];
    if (p.contains("database_fields")) t.predicted.database_fields = strs(p["database_fields"]);
    if (p.contains("defined_fields")) t.predicted.defined_fields = strs(p["defined_fields"]);
    if (p.contains("result_fields")) t.predicted.result_fields = strs(p["result_fields"]);
    if (p.contains("collections")) t.predicted.collections = strs(p["collections"]);
  }
  t.initial_query = str("initial_query");
  if (j.contains("refine_retrieved_ids")) t.refine_retrieved_ids = strs(j["refine_retrieved_ids"]);
  t.refined_query = str("refined_query");
  t.execution_excerpt = str("execution_excerpt");
  if (j.contains("optimize_retrieved_ids")) t.optimize_retrieved_ids = strs(j["optimize_retrieved_ids"]);
  t.final_query = str("final_query");
  if (j.contains("transcript") && j["transcript"].is_array())
    for (const auto& e : j["transcript"])
      if (e.is_object())
        t.transcript.push_back({e.value("stage", ""), e.value("prompt", ""),
                                e.value("reply", "")});
  t.warnings = j.contains("warnings") ? strs(j["warnings"]) : std::vector<std::string>{};
  t.failed = j.contains("failed") && j["failed"].is_boolean() && j["failed"].get<bool>();
  t.error = str("error");
  return t;
}

inline std::vector<SmartTrace> load_traces(const std::string& path) {
  std::vector<SmartTrace> out;
  if (!std::filesystem::exists(path)) return out;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace file " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim_copy(line).empty()) continue;
    auto j = nlohmann::ordered_json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw SchemaError("trace file " + path + " holds a malformed line");
    out.push_back(trace_from_json(j));
  }
  return out;
}

/// Run the full pipeline over a test set. When trace_path is nonempty the
/// file acts as both journal and resume point: example ids already present
/// are skipped, and each new trace is appended and flushed as soon as its
/// example finishes. Returns only the traces produced by this call.
inline std::vector<SmartTrace> run_smart(
    const std::vector<TestExample>& test_set,
    const std::map<std::string, DocumentDatabase>& dbs,
    const VectorLibrary& library, Embedder& embedder,
    const SmartClients& clients, const SmartOptions& options,
    const std::string& trace_path = "") {
  if (!clients.schema || !clients.generator || !clients.refiner || !clients.optimizer)
    throw Error("run_smart: all four stage clients are required");

  std::set<std::string> done;
  std::ofstream journal;
  if (!trace_path.empty()) {
    for (const SmartTrace& t : load_traces(trace_path)) done.insert(t.id);
    journal.open(trace_path, std::ios::app);
    if (!journal) throw IoError("cannot open trace file for append: " + trace_path);
  }

  const bool can_retrieve = options.k > 0 && !library.records.empty();

  std::vector<SmartTrace> out;
  for (const TestExample& ex : test_set) {
    if (done.count(ex.id)) continue;
    SmartTrace t;
    t.id = ex.id;
    t.nlq = ex.nlq;
    t.db_id = ex.db_id;
    try {
      auto db_it = dbs.find(ex.db_id);
      if (db_it == dbs.end()) throw MissingDatabase(ex.db_id);
      const DocumentDatabase& db = db_it->second;
      const std::string schema_text = prompts::render_db_schema(db);

      t.predicted = predict_schema(*clients.schema, ex.id, ex.nlq, schema_text,
                                   &t.transcript);

      try {
        t.initial_query = generate_initial_query(*clients.generator, ex.id,
                                                 ex.nlq, schema_text, &t.transcript);
      } catch (const NoQueryFound& e) {
        t.failed = true;
        t.error = "generation failed: " + std::string(e.what());
        if (journal.is_open()) journal << trace_to_json(t).dump() << "\n" << std::flush;
        out.push_back(std::move(t));
        continue;
      }

      if (options.k > 0 && library.records.empty())
        t.warnings.push_back("retrieval skipped: vector library is empty");

      std::vector<ExampleRecord> refine_examples;
      if (can_retrieve) {
        QueryChannels qc;
        qc.nlq = ex.nlq;
        qc.nosql = t.initial_query;
        qc.db_fields = detail::join_comma(t.predicted.database_fields);
        qc.result_fields = detail::join_comma(t.predicted.result_fields);
        refine_examples =
            retrieve_top_k(library, embedder, qc, options.weights, options.k);
        for (const ExampleRecord& r : refine_examples)
          t.refine_retrieved_ids.push_back(r.id);
      }

      t.refined_query = refine_query(*clients.refiner, ex.id, ex.nlq,
                                     schema_text, t.predicted, t.initial_query,
                                     refine_examples, t.warnings, &t.transcript);

      t.execution_excerpt =
          render_execution_excerpt(db, t.refined_query, options.excerpt_docs);

      std::vector<ExampleRecord> optimize_examples;
      if (can_retrieve) {
        QueryChannels qc;
        qc.nlq = ex.nlq;
        qc.nosql = t.refined_query;
        qc.db_fields = detail::join_comma(t.predicted.database_fields);
        qc.result_fields = detail::join_comma(t.predicted.result_fields);
        optimize_examples =
            retrieve_top_k(library, embedder, qc, options.weights, options.k);
        for (const ExampleRecord& r : optimize_examples)
          t.optimize_retrieved_ids.push_back(r.id);
      }

      t.final_query = optimize_query(
          *clients.optimizer, ex.id, ex.nlq, schema_text, t.refined_query,
          t.execution_excerpt,
          render_examples_with_results(optimize_examples, dbs, options.excerpt_docs),
          t.predicted.result_fields, t.warnings, &t.transcript);

      try {
        parse_query(t.final_query);
      } catch (const Error& e) {
        t.failed = true;
        t.error = "final query does not parse: " + std::string(e.what());
      }
    } catch (const std::exception& e) {
      t.failed = true;
      t.error = e.what();
    }
    if (journal.is_open()) journal << trace_to_json(t).dump() << "\n" << std::flush;
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace mqlkit
