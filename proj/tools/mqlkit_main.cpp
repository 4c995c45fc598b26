#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mqlkit/chat.hpp"
#include "mqlkit/dataset_builder.hpp"
#include "mqlkit/db_transform.hpp"
#include "mqlkit/document_db.hpp"
#include "mqlkit/embedding.hpp"
#include "mqlkit/engine.hpp"
#include "mqlkit/errors.hpp"
#include "mqlkit/http_providers.hpp"
#include "mqlkit/metrics.hpp"
#include "mqlkit/query_parser.hpp"
#include "mqlkit/relational.hpp"
#include "mqlkit/result_compare.hpp"
#include "mqlkit/smart.hpp"
#include "mqlkit/vector_library.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

/// Everything a run can be configured with. Flags mirror these fields and a
/// resolved copy is written next to each run's outputs. Secrets stay in the
/// environment; only the variable names appear here.
struct RunConfig {
  std::string out_dir = "runs";
  std::string run_id = "run";

  double w_nlq = 1.0;
  double w_other = 0.3;
  std::size_t k = 20;
  std::size_t excerpt_docs = 5;
  double temperature = 0.0;
  int concurrency = 1;

  std::string embedder = "local";  // local | http
  unsigned seed = 0;
  std::size_t dimension = 256;
  std::string embedding_url;
  std::string embedding_model;
  std::string embedding_api_key_env = "EMBEDDING_API_KEY";

  std::string provider = "echo";  // echo | scripted | http
  std::string chat_url;
  std::string chat_model;
  std::string chat_api_key_env = "CHAT_API_KEY";
  std::string top_url;
  std::string top_model;
};

fs::path run_dir(const RunConfig& cfg) {
  return fs::path(cfg.out_dir) / cfg.run_id;
}

ordered_json config_manifest(const std::string& command, const RunConfig& cfg) {
  ordered_json j;
  j["command"] = command;
  j["run_id"] = cfg.run_id;
  j["out_dir"] = cfg.out_dir;
  j["weights"] = {{"nlq", cfg.w_nlq}, {"other", cfg.w_other}};
  j["k"] = cfg.k;
  j["excerpt_docs"] = cfg.excerpt_docs;
  j["temperature"] = cfg.temperature;
  j["concurrency"] = cfg.concurrency;
  j["embedder"] = cfg.embedder;
  j["seed"] = cfg.seed;
  j["dimension"] = cfg.dimension;
  if (!cfg.embedding_url.empty()) j["embedding_url"] = cfg.embedding_url;
  if (!cfg.embedding_model.empty()) j["embedding_model"] = cfg.embedding_model;
  j["embedding_api_key_env"] = cfg.embedding_api_key_env;
  j["provider"] = cfg.provider;
  if (!cfg.chat_url.empty()) j["chat_url"] = cfg.chat_url;
  if (!cfg.chat_model.empty()) j["chat_model"] = cfg.chat_model;
  j["chat_api_key_env"] = cfg.chat_api_key_env;
  if (!cfg.top_url.empty()) j["top_url"] = cfg.top_url;
  if (!cfg.top_model.empty()) j["top_model"] = cfg.top_model;
  return j;
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const RunConfig& cfg, ordered_json extra = {}) {
  ordered_json j = config_manifest(command, cfg);
  for (auto& [k, v] : extra.items()) j[k] = v;
  mqlkit::write_text_file(dir / "resolved_config.json", j.dump(2) + "\n");
}

std::string require_env(const std::string& env_name, const std::string& what) {
  const char* v = std::getenv(env_name.c_str());
  if (!v || !*v)
    throw mqlkit::ProviderError(0, "environment variable " + env_name +
                                       " must be set for the " + what +
                                       " provider");
  return v;
}

/// Split a JSON-lines file into parsed objects, skipping blank lines.
/// Line numbers are 1-based and count blank lines too.
std::vector<std::pair<std::size_t, ordered_json>> read_jsonl(const fs::path& path) {
  const std::string text = mqlkit::read_text_file(path);
  std::vector<std::pair<std::size_t, ordered_json>> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t stop = text.find('\n', start);
    if (stop == std::string::npos) stop = text.size();
    const std::string line = text.substr(start, stop - start);
    start = stop + 1;
    ++line_no;
    bool blank = true;
    for (char c : line)
      if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
    if (blank) continue;
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw mqlkit::SchemaError(path.string() + " line " +
                                std::to_string(line_no) +
                                " is not a JSON object");
    out.emplace_back(line_no, std::move(j));
  }
  return out;
}

std::string string_field(const ordered_json& j, const std::string& key) {
  if (!j.contains(key) || !j[key].is_string()) return "";
  return j[key].get<std::string>();
}

/// Read every database bundle under a directory. A regular <id>.json file is
/// a single-file bundle and a subdirectory is a per-collection bundle; the id
/// is the stem either way.
std::map<std::string, mqlkit::DocumentDatabase> load_dbs_dir(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw mqlkit::IoError("no such database directory: " + dir.string());
  std::map<std::string, mqlkit::DocumentDatabase> dbs;
  std::vector<fs::path> entries;
  for (const auto& entry : fs::directory_iterator(dir))
    entries.push_back(entry.path());
  std::sort(entries.begin(), entries.end());
  for (const fs::path& p : entries) {
    if (fs::is_directory(p))
      dbs[p.filename().string()] = mqlkit::load_database(p);
    else if (p.extension() == ".json")
      dbs[p.stem().string()] = mqlkit::load_database(p);
  }
  return dbs;
}

struct Options {
  RunConfig cfg;

  std::string dump_path;
  std::string out_path;

  std::string db_path;
  std::string query_text;
  std::string query_file;

  std::string gold_path;
  std::string pred_path;
  std::string dbs_dir;
  bool no_normalize = false;

  std::string training_path;

  std::string test_path;
  std::string library_path;
  bool resume = false;
  std::string replies_path;

  std::string seeds_path;
  std::string second_replies;
  std::string top_replies;
  std::vector<std::string> extender_replies;
  std::string demo_path;
  std::size_t extensions = 5;

  std::string schema_path;
  std::string rows_dir;
};

int run_transform_db(const Options& opt) {
  const mqlkit::RelationalDump dump =
      mqlkit::load_relational_dump(opt.dump_path);
  const mqlkit::TransformResult result = mqlkit::transform_database(dump);
  for (const std::string& w : result.warnings) std::cerr << w << "\n";

  const fs::path out(opt.out_path);
  fs::create_directories(out);
  std::string name = dump.name;
  if (name.empty()) name = fs::path(opt.dump_path).stem().string();
  const fs::path bundle = out / (name + ".json");
  mqlkit::save_database(result.db, bundle);
  write_manifest(out, "transform-db", opt.cfg,
                 {{"dump", opt.dump_path}, {"bundle", bundle.string()}});
  std::cout << bundle.string() << "\n";
  return 0;
}

int run_exec(const Options& opt) {
  if (opt.query_text.empty() == opt.query_file.empty()) {
    std::cerr << "exec needs exactly one of --query and --query-file\n";
    return 1;
  }
  const mqlkit::DocumentDatabase db = mqlkit::load_database(opt.db_path);
  const std::string text = opt.query_text.empty()
                               ? mqlkit::read_text_file(opt.query_file)
                               : opt.query_text;
  const mqlkit::QueryAst ast = mqlkit::parse_query(text);
  const mqlkit::ResultSet rs = mqlkit::execute_query(db, ast);
  std::cout << mqlkit::result_to_json(rs) << "\n";
  return 0;
}

int run_eval(const Options& opt) {
  std::vector<mqlkit::EvalPair> pairs;
  const auto gold_lines = read_jsonl(opt.gold_path);
  const auto pred_lines = read_jsonl(opt.pred_path);
  if (gold_lines.size() != pred_lines.size()) {
    std::cerr << "gold has " << gold_lines.size() << " records but pred has "
              << pred_lines.size() << "\n";
    return 1;
  }
  for (std::size_t i = 0; i < gold_lines.size(); ++i) {
    const ordered_json& g = gold_lines[i].second;
    const ordered_json& p = pred_lines[i].second;
    mqlkit::EvalPair pair;
    pair.id = string_field(g, "id");
    if (pair.id.empty()) pair.id = "g" + std::to_string(gold_lines[i].first);
    pair.db_id = string_field(g, "db_id");
    if (pair.db_id.empty())
      throw mqlkit::SchemaError("gold record '" + pair.id + "' lacks a db_id");
    pair.nlq = string_field(g, "nlq");
    pair.gold = string_field(g, "nosql");
    if (pair.gold.empty())
      throw mqlkit::SchemaError("gold record '" + pair.id + "' lacks a nosql query");
    pair.pred = string_field(p, "nosql");
    if (pair.pred.empty()) pair.pred = string_field(p, "final_query");
    pairs.push_back(std::move(pair));
  }

  const auto dbs = load_dbs_dir(opt.dbs_dir);
  mqlkit::EvalOptions eval_options;
  eval_options.normalize = !opt.no_normalize;
  const mqlkit::EvalReport report =
      mqlkit::evaluate_corpus(pairs, dbs, eval_options);

  const fs::path dir = run_dir(opt.cfg);
  fs::create_directories(dir);
  mqlkit::write_text_file(dir / "report.json",
                          mqlkit::report_to_json(report) + "\n");
  mqlkit::write_text_file(dir / "report.csv", mqlkit::report_to_csv(report));
  write_manifest(dir, "eval", opt.cfg,
                 {{"gold", opt.gold_path},
                  {"pred", opt.pred_path},
                  {"dbs", opt.dbs_dir},
                  {"normalize", !opt.no_normalize}});

  const mqlkit::CorpusRatios& c = report.corpus;
  auto pct = [](double v) { return std::to_string(v * 100.0); };
  std::cout << "N=" << c.n << " EM=" << pct(c.em) << " QSM=" << pct(c.qsm)
            << " QFC=" << pct(c.qfc) << " EX=" << pct(c.ex)
            << " EFM=" << pct(c.efm) << " EVM=" << pct(c.evm) << "\n";
  std::cout << "report written to " << (dir / "report.json").string() << "\n";
  return 0;
}

std::unique_ptr<mqlkit::Embedder> make_embedder(const RunConfig& cfg) {
  if (cfg.embedder == "local")
    return std::make_unique<mqlkit::LocalHashEmbedder>(cfg.seed, cfg.dimension);
  if (cfg.embedder == "http") {
    require_env(cfg.embedding_api_key_env, "embedding");
    mqlkit::HttpEmbedderConfig ec;
    ec.base_url = cfg.embedding_url;
    ec.model = cfg.embedding_model;
    ec.dimension = cfg.dimension;
    ec.api_key_env = cfg.embedding_api_key_env;
    if (ec.base_url.empty() || ec.model.empty())
      throw mqlkit::Error("http embedder needs --embedding-url and --embedding-model");
    return std::make_unique<mqlkit::HttpEmbedder>(ec);
  }
  throw mqlkit::Error("unknown embedder '" + cfg.embedder + "'");
}

int run_build_index(const Options& opt) {
  std::vector<mqlkit::ExampleRecord> records;
  for (const auto& [line_no, j] : read_jsonl(opt.training_path)) {
    mqlkit::ExampleRecord r;
    r.id = string_field(j, "id");
    if (r.id.empty()) r.id = "r" + std::to_string(line_no);
    r.nlq = string_field(j, "nlq");
    r.nosql = string_field(j, "nosql");
    if (r.nlq.empty() || r.nosql.empty())
      throw mqlkit::SchemaError("training record '" + r.id +
                                "' needs nlq and nosql");
    r.db_fields = string_field(j, "db_fields");
    r.result_fields = string_field(j, "result_fields");
    r.db_id = string_field(j, "db_id");
    records.push_back(std::move(r));
  }

  const auto embedder = make_embedder(opt.cfg);
  const mqlkit::VectorLibrary library =
      mqlkit::build_vector_library(records, *embedder);

  const fs::path dir = run_dir(opt.cfg);
  fs::create_directories(dir);
  const fs::path out = dir / "library.json";
  mqlkit::save_vector_library(library, out.string());
  write_manifest(dir, "build-index", opt.cfg,
                 {{"training", opt.training_path},
                  {"records", library.records.size()},
                  {"provider_tag", library.provider_tag}});
  std::cout << out.string() << "\n";
  return 0;
}

/// A replies file always selects a scripted client; otherwise the provider
/// flag picks echo or http.
std::unique_ptr<mqlkit::ChatClient> make_chat_client(const RunConfig& cfg,
                                                     const std::string& replies,
                                                     const std::string& url,
                                                     const std::string& model) {
  if (!replies.empty())
    return std::make_unique<mqlkit::ScriptedChatClient>(
        mqlkit::ScriptedChatClient::from_file(replies));
  if (cfg.provider == "scripted")
    throw mqlkit::Error("scripted provider needs a replies file");
  if (cfg.provider == "echo") return std::make_unique<mqlkit::EchoChatClient>();
  if (cfg.provider == "http") {
    require_env(cfg.chat_api_key_env, "chat");
    mqlkit::HttpChatClientConfig cc;
    cc.base_url = url;
    cc.model = model;
    cc.temperature = cfg.temperature;
    cc.api_key_env = cfg.chat_api_key_env;
    if (cc.base_url.empty() || cc.model.empty())
      throw mqlkit::Error("http provider needs --chat-url and --chat-model");
    return std::make_unique<mqlkit::HttpChatClient>(cc);
  }
  throw mqlkit::Error("unknown provider '" + cfg.provider + "'");
}

int run_smart_run(const Options& opt) {
  std::vector<mqlkit::TestExample> test_set;
  for (const auto& [line_no, j] : read_jsonl(opt.test_path)) {
    mqlkit::TestExample ex;
    ex.id = string_field(j, "id");
    if (ex.id.empty()) ex.id = "t" + std::to_string(line_no);
    ex.nlq = string_field(j, "nlq");
    ex.db_id = string_field(j, "db_id");
    if (ex.nlq.empty() || ex.db_id.empty())
      throw mqlkit::SchemaError("test record '" + ex.id +
                                "' needs nlq and db_id");
    test_set.push_back(std::move(ex));
  }

  const auto dbs = load_dbs_dir(opt.dbs_dir);
  const mqlkit::VectorLibrary library =
      mqlkit::load_vector_library(opt.library_path);
  const auto embedder = make_embedder(opt.cfg);
  if (!library.provider_tag.empty() &&
      library.provider_tag != embedder->provider_tag())
    std::cerr << "warning: library was built with provider '"
              << library.provider_tag << "' but queries embed with '"
              << embedder->provider_tag() << "'\n";

  const auto client =
      make_chat_client(opt.cfg, opt.replies_path, opt.cfg.chat_url, opt.cfg.chat_model);
  mqlkit::SmartClients clients;
  clients.schema = client.get();
  clients.generator = client.get();
  clients.refiner = client.get();
  clients.optimizer = client.get();

  mqlkit::SmartOptions options;
  options.weights.w_nlq = opt.cfg.w_nlq;
  options.weights.w_other = opt.cfg.w_other;
  options.k = opt.cfg.k;
  options.excerpt_docs = opt.cfg.excerpt_docs;

  const fs::path dir = run_dir(opt.cfg);
  fs::create_directories(dir);
  const fs::path traces = dir / "traces.jsonl";
  if (!opt.resume) fs::remove(traces);

  const std::vector<mqlkit::SmartTrace> produced = mqlkit::run_smart(
      test_set, dbs, library, *embedder, clients, options, traces.string());
  if (!fs::exists(traces)) mqlkit::write_text_file(traces, "");

  write_manifest(dir, "smart-run", opt.cfg,
                 {{"test", opt.test_path},
                  {"dbs", opt.dbs_dir},
                  {"library", opt.library_path},
                  {"resume", opt.resume}});

  std::size_t failed = 0;
  for (const mqlkit::SmartTrace& t : produced) failed += t.failed;
  std::cout << produced.size() << " trace(s) written, " << failed
            << " failed; journal at " << traces.string() << "\n";
  return 0;
}

int run_dataset_build(const Options& opt) {
  const std::vector<mqlkit::SeedExample> seeds =
      mqlkit::load_seed_bundle(opt.seeds_path);
  const auto dbs = load_dbs_dir(opt.dbs_dir);

  const auto second = make_chat_client(opt.cfg, opt.second_replies,
                                       opt.cfg.chat_url, opt.cfg.chat_model);
  const std::string top_url =
      opt.cfg.top_url.empty() ? opt.cfg.chat_url : opt.cfg.top_url;
  const std::string top_model =
      opt.cfg.top_model.empty() ? opt.cfg.chat_model : opt.cfg.top_model;
  const auto top =
      make_chat_client(opt.cfg, opt.top_replies, top_url, top_model);
  std::vector<std::unique_ptr<mqlkit::ChatClient>> extenders;
  for (const std::string& path : opt.extender_replies)
    extenders.push_back(std::make_unique<mqlkit::ScriptedChatClient>(
        mqlkit::ScriptedChatClient::from_file(path)));

  mqlkit::BuilderClients clients;
  clients.second_tier = second.get();
  clients.top_tier = top.get();
  for (const auto& e : extenders) clients.extenders.push_back(e.get());

  std::unique_ptr<mqlkit::CotDemo> demo;
  if (!opt.demo_path.empty()) {
    const ordered_json j =
        ordered_json::parse(mqlkit::read_text_file(opt.demo_path), nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("prompt") ||
        !j.contains("reply"))
      throw mqlkit::SchemaError("demo file must hold {prompt, reply}");
    demo = std::make_unique<mqlkit::CotDemo>();
    demo->prompt = j["prompt"].get<std::string>();
    demo->reply = j["reply"].get<std::string>();
  }

  mqlkit::BuilderOptions options;
  options.extension_count = opt.extensions;

  const fs::path dir = run_dir(opt.cfg);
  fs::create_directories(dir);
  const fs::path outcomes_path = dir / "outcomes.jsonl";
  if (!opt.resume) fs::remove(outcomes_path);

  struct StoredOutcome {
    std::string status;
    std::string candidate;
    int attempts = 0;
    bool escalated = false;
    std::vector<mqlkit::ExtensionRecord> extensions;
  };
  std::map<std::string, StoredOutcome> outcomes;
  std::vector<std::string> order;
  if (fs::exists(outcomes_path)) {
    for (const auto& [line_no, j] : read_jsonl(outcomes_path)) {
      StoredOutcome so;
      const std::string id = string_field(j, "seed_id");
      if (id.empty())
        throw mqlkit::SchemaError("outcomes journal line " +
                                  std::to_string(line_no) + " lacks a seed_id");
      so.status = string_field(j, "status");
      so.candidate = string_field(j, "candidate");
      if (j.contains("attempts") && j["attempts"].is_number_integer())
        so.attempts = j["attempts"].get<int>();
      if (j.contains("escalated") && j["escalated"].is_boolean())
        so.escalated = j["escalated"].get<bool>();
      if (j.contains("extensions") && j["extensions"].is_array())
        for (const auto& e : j["extensions"])
          so.extensions.push_back(
              {string_field(e, "nlq"), string_field(e, "model")});
      if (!outcomes.count(id)) order.push_back(id);
      outcomes[id] = std::move(so);
    }
  }

  std::ofstream journal(outcomes_path, std::ios::app);
  if (!journal)
    throw mqlkit::IoError("cannot open outcomes journal: " +
                          outcomes_path.string());

  auto status_name = [](mqlkit::SeedStatus s) {
    switch (s) {
      case mqlkit::SeedStatus::Verified:
        return "verified";
      case mqlkit::SeedStatus::Abandoned:
        return "abandoned";
      default:
        return "pending";
    }
  };

  for (const mqlkit::SeedExample& seed : seeds) {
    if (outcomes.count(seed.id)) continue;
    auto db_it = dbs.find(seed.db_id);
    if (db_it == dbs.end()) throw mqlkit::MissingDatabase(seed.db_id);
    const mqlkit::SeedOutcome outcome =
        mqlkit::process_seed(clients, seed, db_it->second, demo.get(), options);
    for (const std::string& w : outcome.warnings) std::cerr << w << "\n";

    ordered_json line;
    line["seed_id"] = seed.id;
    line["status"] = status_name(outcome.state.status);
    line["candidate"] = outcome.state.candidate_query;
    line["attempts"] = outcome.state.attempts;
    line["escalated"] = outcome.state.escalated;
    line["extensions"] = ordered_json::array();
    for (const mqlkit::ExtensionRecord& e : outcome.extensions)
      line["extensions"].push_back({{"nlq", e.nlq}, {"model", e.model}});
    line["warnings"] = outcome.warnings;
    journal << line.dump() << "\n";
    journal.flush();

    StoredOutcome so;
    so.status = status_name(outcome.state.status);
    so.candidate = outcome.state.candidate_query;
    so.attempts = outcome.state.attempts;
    so.escalated = outcome.state.escalated;
    so.extensions = outcome.extensions;
    order.push_back(seed.id);
    outcomes[seed.id] = std::move(so);
  }

  std::map<std::string, const mqlkit::SeedExample*> seed_by_id;
  for (const mqlkit::SeedExample& s : seeds) seed_by_id[s.id] = &s;

  std::vector<mqlkit::DatasetRecord> records;
  std::string provenance;
  for (const std::string& id : order) {
    const StoredOutcome& so = outcomes[id];
    if (so.status != "verified") continue;
    auto it = seed_by_id.find(id);
    if (it == seed_by_id.end()) continue;
    records.push_back({it->second->nlq, so.candidate, it->second->db_id});
    for (const mqlkit::ExtensionRecord& e : so.extensions) {
      records.push_back({e.nlq, so.candidate, it->second->db_id});
      ordered_json p;
      p["seed_id"] = id;
      p["nlq"] = e.nlq;
      p["model"] = e.model;
      provenance += p.dump() + "\n";
    }
  }

  const mqlkit::FinalizedDataset finalized = mqlkit::finalize_dataset(records);
  mqlkit::write_text_file(dir / "dataset.jsonl",
                          mqlkit::dataset_to_jsonl(finalized));
  mqlkit::write_text_file(dir / "rejections.jsonl",
                          mqlkit::rejections_to_jsonl(finalized));
  mqlkit::write_text_file(dir / "provenance.jsonl", provenance);
  write_manifest(dir, "dataset-build", opt.cfg,
                 {{"seeds", opt.seeds_path},
                  {"dbs", opt.dbs_dir},
                  {"demo", opt.demo_path},
                  {"extensions", opt.extensions},
                  {"resume", opt.resume}});

  std::size_t verified = 0, abandoned = 0;
  for (const auto& [id, so] : outcomes) {
    verified += so.status == "verified";
    abandoned += so.status == "abandoned";
  }
  std::cout << verified << " verified, " << abandoned << " abandoned; "
            << finalized.accepted.size() << " record(s) accepted, "
            << finalized.rejections.size() << " rejected; outputs in "
            << dir.string() << "\n";
  return 0;
}

int run_ingest(const Options& opt) {
  using mqlkit::DocValue;
  const DocValue schema =
      mqlkit::parse_strict_json(mqlkit::read_text_file(opt.schema_path));
  if (!schema.is_obj())
    throw mqlkit::SchemaError("schema file must be a JSON object");
  const DocValue* tables = schema.find("tables");
  if (!tables || !tables->is_array())
    throw mqlkit::SchemaError("schema file needs a 'tables' array");

  DocValue out_tables = DocValue::array();
  for (const DocValue& tv : tables->elements()) {
    if (!tv.is_obj())
      throw mqlkit::SchemaError("schema table entries must be objects");
    const DocValue* name = tv.find("name");
    if (!name || !name->is_str())
      throw mqlkit::SchemaError("schema table lacks a name");
    const DocValue* cols = tv.find("columns");
    if (!cols || !cols->is_array())
      throw mqlkit::SchemaError(name->as_str() + ": schema table needs columns");

    std::vector<std::string> column_names;
    for (const DocValue& cv : cols->elements()) {
      const DocValue* cn = cv.is_obj() ? cv.find("name") : nullptr;
      if (!cn || !cn->is_str())
        throw mqlkit::SchemaError(name->as_str() + ": column lacks a name");
      column_names.push_back(cn->as_str());
    }

    const fs::path rows_file =
        fs::path(opt.rows_dir) / (name->as_str() + ".json");
    DocValue rows_in = DocValue::array();
    if (fs::exists(rows_file))
      rows_in = mqlkit::parse_strict_json(mqlkit::read_text_file(rows_file));
    else
      std::cerr << "warning: no rows file for table '" << name->as_str()
                << "', emitting it empty\n";
    if (!rows_in.is_array())
      throw mqlkit::SchemaError(rows_file.string() + " must be a JSON array");

    DocValue rows_out = DocValue::array();
    for (const DocValue& row : rows_in.elements()) {
      if (!row.is_obj())
        throw mqlkit::SchemaError(rows_file.string() +
                                  ": rows must be objects keyed by column");
      for (std::size_t i = 0; i < row.size(); ++i) {
        bool known = false;
        for (const std::string& c : column_names) known |= c == row.key_at(i);
        if (!known)
          throw mqlkit::SchemaError(rows_file.string() + ": unknown column '" +
                                    row.key_at(i) + "' in table '" +
                                    name->as_str() + "'");
      }
      DocValue cells = DocValue::array();
      for (const std::string& c : column_names) {
        const DocValue* v = row.find(c);
        cells.push_back(v ? *v : DocValue::null());
      }
      rows_out.push_back(std::move(cells));
    }

    DocValue table = DocValue::object();
    table.set("name", *name);
    table.set("columns", *cols);
    if (const DocValue* pk = tv.find("primary_key")) table.set("primary_key", *pk);
    table.set("rows", std::move(rows_out));
    if (const DocValue* fks = tv.find("foreign_keys"))
      table.set("foreign_keys", *fks);
    out_tables.push_back(std::move(table));
  }

  DocValue dump = DocValue::object();
  if (const DocValue* n = schema.find("name")) dump.set("name", *n);
  dump.set("tables", std::move(out_tables));

  mqlkit::dump_from_json(dump);
  mqlkit::write_text_file(opt.out_path, dump.to_json() + "\n");
  std::cout << opt.out_path << "\n";
  return 0;
}

int guarded(int (*fn)(const Options&), const Options& opt) {
  try {
    return fn(opt);
  } catch (const mqlkit::CycleError& e) {
    std::cerr << "rejected: " << e.what() << "\n";
    return 2;
  } catch (const mqlkit::ProviderError& e) {
    std::cerr << "provider failure: " << e.what() << "\n";
    return 4;
  } catch (const mqlkit::UnknownCollection& e) {
    std::cerr << "missing input: " << e.what() << "\n";
    return 3;
  } catch (const mqlkit::MissingDatabase& e) {
    std::cerr << "missing input: " << e.what() << "\n";
    return 3;
  } catch (const mqlkit::IoError& e) {
    std::cerr << "missing input: " << e.what() << "\n";
    return 3;
  } catch (const mqlkit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NoSQL query toolkit: transformation, execution, evaluation, "
               "retrieval, and dataset construction"};
  app.require_subcommand(1);
  app.set_config("--config");

  Options opt;
  RunConfig& cfg = opt.cfg;

  auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("--out-dir", cfg.out_dir, "Directory holding run outputs");
    cmd->add_option("--run-id", cfg.run_id, "Name of this run's output folder");
  };
  auto add_embedder_flags = [&](CLI::App* cmd) {
    cmd->add_option("--embedder", cfg.embedder, "Embedding provider: local or http");
    cmd->add_option("--seed", cfg.seed, "Seed for the local hash embedder");
    cmd->add_option("--dimension", cfg.dimension, "Embedding dimensionality");
    cmd->add_option("--embedding-url", cfg.embedding_url, "HTTP embedding endpoint");
    cmd->add_option("--embedding-model", cfg.embedding_model, "HTTP embedding model");
    cmd->add_option("--embedding-api-key-env", cfg.embedding_api_key_env,
                    "Environment variable holding the embedding API key");
  };
  auto add_chat_flags = [&](CLI::App* cmd) {
    cmd->add_option("--provider", cfg.provider,
                    "Chat provider: echo, scripted, or http");
    cmd->add_option("--chat-url", cfg.chat_url, "HTTP chat endpoint");
    cmd->add_option("--chat-model", cfg.chat_model, "HTTP chat model");
    cmd->add_option("--chat-api-key-env", cfg.chat_api_key_env,
                    "Environment variable holding the chat API key");
    cmd->add_option("--temperature", cfg.temperature, "Chat sampling temperature");
    cmd->add_option("--concurrency", cfg.concurrency,
                    "Maximum in-flight provider calls")
        ->check(CLI::PositiveNumber);
  };

  CLI::App* transform = app.add_subcommand(
      "transform-db", "Transform a relational dump into a document bundle");
  transform->add_option("--dump", opt.dump_path, "Relational dump JSON")->required();
  transform->add_option("--out", opt.out_path, "Output directory")->required();

  CLI::App* exec = app.add_subcommand("exec", "Execute a query against a bundle");
  exec->add_option("--db", opt.db_path, "Database bundle file or directory")->required();
  exec->add_option("--query", opt.query_text, "Query text");
  exec->add_option("--query-file", opt.query_file, "File holding the query text");

  CLI::App* eval = app.add_subcommand("eval", "Score predictions against gold queries");
  eval->add_option("--gold", opt.gold_path, "Gold JSONL {id, db_id, nlq, nosql}")->required();
  eval->add_option("--pred", opt.pred_path, "Predictions JSONL {nosql}")->required();
  eval->add_option("--dbs", opt.dbs_dir, "Directory of database bundles")->required();
  eval->add_flag("--no-normalize", opt.no_normalize,
                 "Compare query text without rename normalization");
  add_run_flags(eval);

  CLI::App* index = app.add_subcommand("build-index", "Embed a training file into a vector library");
  index->add_option("--training", opt.training_path,
                    "Training JSONL {id, nlq, nosql, db_fields, result_fields, db_id}")
      ->required();
  add_run_flags(index);
  add_embedder_flags(index);

  CLI::App* smart = app.add_subcommand("smart-run", "Run the full pipeline over a test file");
  smart->add_option("--test", opt.test_path, "Test JSONL {id, nlq, db_id}")->required();
  smart->add_option("--dbs", opt.dbs_dir, "Directory of database bundles")->required();
  smart->add_option("--library", opt.library_path, "Vector library JSON")->required();
  smart->add_flag("--resume", opt.resume, "Keep the existing trace journal and skip done ids");
  smart->add_option("--replies", opt.replies_path, "Scripted replies file");
  smart->add_option("--k", cfg.k, "Reference examples to retrieve");
  smart->add_option("--w-nlq", cfg.w_nlq, "Similarity weight for the NLQ channel");
  smart->add_option("--w-other", cfg.w_other, "Similarity weight for the other channels");
  smart->add_option("--excerpt-docs", cfg.excerpt_docs,
                    "Documents shown from intermediate executions");
  add_run_flags(smart);
  add_embedder_flags(smart);
  add_chat_flags(smart);

  CLI::App* build = app.add_subcommand("dataset-build", "Verify seed queries and extend their questions");
  build->add_option("--seeds", opt.seeds_path,
                    "Seed JSONL {id, nlq, db_id, target_schema, reference_result}")
      ->required();
  build->add_option("--dbs", opt.dbs_dir, "Directory of database bundles")->required();
  build->add_option("--second-replies", opt.second_replies,
                    "Scripted replies for the second-tier client");
  build->add_option("--top-replies", opt.top_replies,
                    "Scripted replies for the top-tier client");
  build->add_option("--extender-replies", opt.extender_replies,
                    "Scripted replies for one extension client (repeatable)");
  build->add_option("--demo", opt.demo_path, "Demonstration dialogue JSON {prompt, reply}");
  build->add_option("--extensions", opt.extensions, "Extended questions kept per seed");
  build->add_flag("--resume", opt.resume, "Keep the outcomes journal and skip done seeds");
  add_run_flags(build);
  add_chat_flags(build);

  CLI::App* ingest = app.add_subcommand(
      "ingest", "Assemble a relational dump from a schema and row-object files");
  ingest->add_option("--schema", opt.schema_path, "Schema JSON without rows")->required();
  ingest->add_option("--rows-dir", opt.rows_dir, "Directory of <table>.json row arrays")->required();
  ingest->add_option("--out", opt.out_path, "Dump file to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (app.got_subcommand(transform)) return guarded(run_transform_db, opt);
  if (app.got_subcommand(exec)) return guarded(run_exec, opt);
  if (app.got_subcommand(eval)) return guarded(run_eval, opt);
  if (app.got_subcommand(index)) return guarded(run_build_index, opt);
  if (app.got_subcommand(smart)) return guarded(run_smart_run, opt);
  if (app.got_subcommand(build)) return guarded(run_dataset_build, opt);
  if (app.got_subcommand(ingest)) return guarded(run_ingest, opt);
  std::cerr << "no subcommand given\n";
  return 1;
}
