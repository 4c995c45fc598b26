#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mqlkit/chat.hpp"
#include "mqlkit/document_db.hpp"
#include "mqlkit/engine.hpp"
#include "mqlkit/errors.hpp"
#include "mqlkit/json_io.hpp"
#include "mqlkit/normalize.hpp"
#include "mqlkit/prompts.hpp"
#include "mqlkit/query_analysis.hpp"
#include "mqlkit/query_parser.hpp"
#include "mqlkit/result_compare.hpp"
#include "mqlkit/smart.hpp"

namespace mqlkit {

/// A dataset seed: the natural-language question plus the reference result
/// its source query produced. The reference result is ingested, never
/// computed here; the builder has no SQL engine.
struct SeedExample {
  std::string id;
  std::string nlq;
  std::string db_id;
  std::vector<std::string> target_schema;
  ResultSet reference_result;
};

/// A demonstration dialogue turn shown to the generator before the real
/// prompt (advanced-model chain-of-thought supplied as a file).
struct CotDemo {
  std::string prompt;
  std::string reply;
};

enum class SeedStatus { Pending, Verified, Abandoned };

struct DebugState {
  std::string candidate_query;
  int attempts = 0;
  std::vector<std::string> feedback_history;
  bool escalated = false;
  SeedStatus status = SeedStatus::Pending;
};

struct VerifyResult {
  bool verified = false;
  std::string details;
};

struct ExtensionRecord {
  std::string nlq;
  std::string model;
};

inline std::vector<SeedExample> load_seed_bundle(const std::string& path) {
  std::vector<SeedExample> out;
  const std::string text = read_text_file(path);
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t stop = text.find('\n', start);
    if (stop == std::string::npos) stop = text.size();
    std::string line = text.substr(start, stop - start);
    start = stop + 1;
    if (detail::trim_copy(line).empty()) {
      if (start > text.size()) break;
      ++line_no;
      continue;
    }
    ++line_no;
    auto j = nlohmann::ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw SchemaError("seed bundle line " + std::to_string(line_no) +
                        " is not a JSON object");
    SeedExample seed;
    seed.id = j.contains("id") && j["id"].is_string()
                  ? j["id"].get<std::string>()
                  : "seed" + std::to_string(line_no);
    if (!j.contains("nlq") || !j["nlq"].is_string())
      throw SchemaError("seed '" + seed.id + "' lacks a string nlq");
    if (!j.contains("db_id") || !j["db_id"].is_string())
      throw SchemaError("seed '" + seed.id + "' lacks a string db_id");
    if (!j.contains("reference_result") || !j["reference_result"].is_array())
      throw SchemaError("seed '" + seed.id + "' lacks a reference_result array");
    seed.nlq = j["nlq"].get<std::string>();
    seed.db_id = j["db_id"].get<std::string>();
    if (j.contains("target_schema") && j["target_schema"].is_array())
      for (const auto& f : j["target_schema"])
        if (f.is_string()) seed.target_schema.push_back(f.get<std::string>());
    for (const auto& doc : j["reference_result"])
      seed.reference_result.docs.push_back(from_ordered_json(doc));
    out.push_back(std::move(seed));
  }
  return out;
}

/// Throws NoQueryFound when the reply holds no recognizable query. A missing
/// demonstration is tolerated but flagged, since the prompt is weaker
/// without its worked example.
inline std::string generate_candidate(ChatClient& client,
                                      const SeedExample& seed,
                                      const std::string& db_schema_text,
                                      const CotDemo* demo,
                                      std::vector<std::string>& warnings,
                                      std::vector<TranscriptEntry>* transcript = nullptr) {
  std::vector<ChatMessage> messages;
  messages.push_back({"system", prompts::kGeneratorSystemPrompt});
  if (demo) {
    messages.push_back({"user", demo->prompt});
    messages.push_back({"assistant", demo->reply});
  } else {
    warnings.push_back("seed '" + seed.id +
                       "': no demonstration dialogue, prompt degraded");
  }
  const std::string prompt = prompts::cot_generation_prompt(
      seed.nlq, db_schema_text, detail::join_comma(seed.target_schema));
  messages.push_back({"user", prompt});
  const std::string tag = seed.id + "/generate";
  const std::string reply = client.complete(messages, tag);
  if (transcript) transcript->push_back({tag, prompt, reply});
  return extract_query(reply);
}

/// Exactly compare_results over execute_query. Parse and execution errors
/// classify as mismatches carrying the error text.
inline VerifyResult verify_candidate(const std::string& candidate,
                                     const SeedExample& seed,
                                     const DocumentDatabase& db) {
  VerifyResult v;
  try {
    const QueryAst ast = parse_query(candidate);
    const ResultSet got = execute_query(db, ast);
    const ResultComparison cmp = compare_results(got, seed.reference_result);
    v.verified = cmp.equal;
    if (!cmp.equal) v.details = cmp.describe();
  } catch (const Error& e) {
    v.verified = false;
    v.details = e.what();
  }
  return v;
}

inline std::string generate_feedback(ChatClient& client,
                                     const SeedExample& seed,
                                     const std::string& candidate,
                                     const DocumentDatabase& db,
                                     std::vector<TranscriptEntry>* transcript = nullptr) {
  std::string candidate_result_json;
  try {
    const QueryAst ast = parse_query(candidate);
    candidate_result_json = result_to_json(execute_query(db, ast));
  } catch (const Error& e) {
    candidate_result_json = std::string("(execution failed: ") + e.what() + ")";
  }
  const std::string prompt = prompts::feedback_prompt(
      seed.nlq, detail::join_comma(seed.target_schema), candidate,
      candidate_result_json, result_to_json(seed.reference_result));
  const std::string tag = seed.id + "/feedback";
  const std::string reply =
      client.complete({{"system", prompts::kInterfaceSystemPrompt}, {"user", prompt}}, tag);
  if (transcript) transcript->push_back({tag, prompt, reply});
  return reply;
}

namespace detail {

inline std::string debug_once(ChatClient& client, const SeedExample& seed,
                              const std::string& db_schema_text,
                              const DebugState& state, const CotDemo* demo,
                              std::vector<TranscriptEntry>* transcript) {
  std::vector<ChatMessage> messages;
  messages.push_back({"system", prompts::kGeneratorSystemPrompt});
  if (demo) {
    messages.push_back({"user", demo->prompt});
    messages.push_back({"assistant", demo->reply});
  }
  const std::string prompt = prompts::debug_prompt(
      seed.nlq, db_schema_text, join_comma(seed.target_schema),
      state.candidate_query, state.feedback_history);
  messages.push_back({"user", prompt});
  const std::string tag = seed.id + "/debug";
  const std::string reply = client.complete(messages, tag);
  if (transcript) transcript->push_back({tag, prompt, reply});
  return reply;
}

}  // namespace detail

/// Feedback-driven repair. Each round sends the current candidate plus every
/// accumulated feedback note; the second-tier client handles the first two
/// rounds, and after two accumulated failures a single top-tier round runs.
/// If that escalated round also fails the seed is abandoned. attempts counts
/// failed verifications of debugged candidates. Feedback is regenerated by
/// the second-tier client after every failure, the abandoning one included.
inline DebugState debug_loop(ChatClient& second_tier, ChatClient& top_tier,
                             DebugState& state, const SeedExample& seed,
                             const DocumentDatabase& db,
                             const std::string& db_schema_text,
                             const CotDemo* demo = nullptr,
                             std::vector<TranscriptEntry>* transcript = nullptr) {
  while (state.status == SeedStatus::Pending) {
    const bool escalated_call = state.attempts >= 2;
    ChatClient& client = escalated_call ? top_tier : second_tier;
    if (escalated_call) state.escalated = true;
    const std::string reply =
        detail::debug_once(client, seed, db_schema_text, state, demo, transcript);
    VerifyResult v;
    try {
      state.candidate_query = extract_query(reply);
      v = verify_candidate(state.candidate_query, seed, db);
    } catch (const NoQueryFound&) {
      v.verified = false;
      v.details = "no query could be extracted from the debug reply";
    }
    if (v.verified) {
      state.status = SeedStatus::Verified;
      break;
    }
    state.attempts += 1;
    state.feedback_history.push_back(
        generate_feedback(second_tier, seed, state.candidate_query, db, transcript));
    if (escalated_call) {
      state.status = SeedStatus::Abandoned;
      break;
    }
  }
  return state;
}

inline std::string normalize_question(const std::string& q) {
  std::string out;
  bool pending_space = false;
  for (char c : q) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

/// Fan the extension prompt across every client, pool the replies, and keep
/// up to n questions that are new after case and whitespace normalization.
/// Questions matching a reference question are dropped; provider failures
/// shrink the pool instead of aborting it.
inline std::vector<ExtensionRecord> extend_questions(
    const std::vector<ChatClient*>& clients, const std::string& seed_id,
    const std::string& nosql, const std::string& db_schema_text,
    const std::vector<std::string>& reference_questions,
    const std::string& target_schema, std::size_t n,
    std::vector<std::string>* warnings = nullptr,
    std::vector<TranscriptEntry>* transcript = nullptr) {
  std::vector<ExtensionRecord> out;
  if (n == 0) return out;
  std::set<std::string> seen;
  for (const std::string& q : reference_questions)
    seen.insert(normalize_question(q));
  const std::string prompt = prompts::extension_prompt(
      db_schema_text, nosql, reference_questions, target_schema, n);
  const std::string tag = seed_id + "/extend";
  for (ChatClient* client : clients) {
    if (!client) continue;
    std::string reply;
    try {
      reply = client->complete(
          {{"system", prompts::kInterfaceSystemPrompt}, {"user", prompt}}, tag);
    } catch (const ProviderError& e) {
      if (warnings)
        warnings->push_back("extension client '" + client->model_name() +
                            "' failed: " + e.what());
      continue;
    }
    if (transcript) transcript->push_back({tag, prompt, reply});
    for (const std::string& raw : detail::split_lines(reply)) {
      const std::string line = detail::trim_copy(raw);
      if (line.empty()) continue;
      const std::string key = normalize_question(line);
      if (key.empty() || !seen.insert(key).second) continue;
      out.push_back({line, client->model_name()});
      if (out.size() >= n) return out;
    }
  }
  return out;
}

struct BuilderClients {
  ChatClient* second_tier = nullptr;
  ChatClient* top_tier = nullptr;
  std::vector<ChatClient*> extenders;
};

struct BuilderOptions {
  std::size_t extension_count = 5;
};

struct SeedOutcome {
  std::string seed_id;
  DebugState state;
  std::vector<ExtensionRecord> extensions;
  std::vector<std::string> warnings;
  std::vector<TranscriptEntry> transcript;
};

/// Drive one seed through generation, verification, feedback, debug, and,
/// once verified, question extension.
inline SeedOutcome process_seed(const BuilderClients& clients,
                                const SeedExample& seed,
                                const DocumentDatabase& db,
                                const CotDemo* demo = nullptr,
                                const BuilderOptions& options = {}) {
  if (!clients.second_tier || !clients.top_tier)
    throw Error("process_seed: second_tier and top_tier clients are required");
  SeedOutcome outcome;
  outcome.seed_id = seed.id;
  const std::string schema_text = prompts::render_db_schema(db);

  try {
    outcome.state.candidate_query =
        generate_candidate(*clients.second_tier, seed, schema_text, demo,
                           outcome.warnings, &outcome.transcript);
  } catch (const NoQueryFound& e) {
    outcome.state.candidate_query = "";
    outcome.warnings.push_back("seed '" + seed.id +
                               "': generation reply contained no query: " + e.what());
  }

  const VerifyResult first = verify_candidate(outcome.state.candidate_query, seed, db);
  if (first.verified) {
    outcome.state.status = SeedStatus::Verified;
  } else {
    outcome.state.feedback_history.push_back(
        generate_feedback(*clients.second_tier, seed,
                          outcome.state.candidate_query, db, &outcome.transcript));
    debug_loop(*clients.second_tier, *clients.top_tier, outcome.state, seed,
               db, schema_text, demo, &outcome.transcript);
  }

  if (outcome.state.status == SeedStatus::Verified)
    outcome.extensions = extend_questions(
        clients.extenders, seed.id, outcome.state.candidate_query, schema_text,
        {seed.nlq}, detail::join_comma(seed.target_schema),
        options.extension_count, &outcome.warnings, &outcome.transcript);
  return outcome;
}

struct DatasetRecord {
  std::string nlq;
  std::string nosql;
  std::string db_id;
};

struct DatasetRejection {
  DatasetRecord record;
  std::string reason;
};

struct FinalizedDataset {
  std::vector<DatasetRecord> accepted;
  std::vector<DatasetRejection> rejections;
};

/// Deterministic post-filters: every accepted record parses, contains none
/// of the banned operators, and carries the rename-normalized canonical
/// query text. Running the output through again changes nothing.
inline FinalizedDataset finalize_dataset(
    const std::vector<DatasetRecord>& records,
    const std::set<std::string>& banned = default_banned_ops()) {
  FinalizedDataset out;
  for (const DatasetRecord& r : records) {
    QueryAst ast;
    try {
      ast = parse_query(r.nosql);
    } catch (const Error& e) {
      out.rejections.push_back({r, std::string("parse error: ") + e.what()});
      continue;
    }
    const std::set<std::string> special = detect_special_ops(ast, banned);
    if (!special.empty()) {
      std::string reason = "special operator:";
      for (const std::string& op : special) reason += " " + op;
      out.rejections.push_back({r, reason});
      continue;
    }
    QueryAst normalized;
    try {
      normalized = normalize_renames(ast);
    } catch (const NormalizationConflict& e) {
      out.rejections.push_back({r, std::string("rename conflict: ") + e.what()});
      continue;
    }
    DatasetRecord accepted = r;
    accepted.nosql = serialize_canonical(normalized);
    out.accepted.push_back(std::move(accepted));
  }
  return out;
}

inline std::string dataset_to_jsonl(const FinalizedDataset& ds) {
  std::string out;
  for (const DatasetRecord& r : ds.accepted) {
    nlohmann::ordered_json j;
    j["nlq"] = r.nlq;
    j["nosql"] = r.nosql;
    j["db_id"] = r.db_id;
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline std::string rejections_to_jsonl(const FinalizedDataset& ds) {
  std::string out;
  for (const DatasetRejection& r : ds.rejections) {
    nlohmann::ordered_json j;
    j["nlq"] = r.record.nlq;
    j["nosql"] = r.record.nosql;
    j["db_id"] = r.record.db_id;
    j["reason"] = r.reason;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace mqlkit
