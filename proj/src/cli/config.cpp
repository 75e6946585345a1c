#include "fbench/cli/config.hpp"

#include <algorithm>

#include "fbench/errors.hpp"
#include "fbench/util/fs.hpp"
#include "fbench/util/hash.hpp"

namespace fbench::cli {

namespace stdfs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw ConfigError("config field '" + field + "': " + what);
}

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> known) {
  if (!j.is_object()) field_error(where.empty() ? "<root>" : where, "must be an object");
  for (const auto& [k, _] : j.items())
    if (std::none_of(known.begin(), known.end(), [&](const char* n) { return k == n; }))
      field_error(where.empty() ? k : where + "." + k, "unknown field");
}

template <class T>
T get(const json& j, const std::string& key, const std::string& field, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    field_error(field, "has the wrong type");
  }
}

template <class T>
T require(const json& j, const std::string& key, const std::string& field) {
  if (!j.contains(key) || j[key].is_null()) field_error(field, "is required");
  return get<T>(j, key, field, T{});
}

stdfs::path resolve(const stdfs::path& base, const std::string& p) {
  if (p.empty()) return {};
  stdfs::path q(p);
  return (q.is_absolute() ? q : base / q).lexically_normal();
}

}  // namespace

RunConfig config_from_json(const json& j, const stdfs::path& base_dir) {
  reject_unknown(j, "",
                 {"seed", "corpus", "documents", "output", "pdflatex", "workers", "generator", "parsers", "llm",
                  "matching", "metrics", "cdm_command", "report", "study"});
  RunConfig c;
  c.seed = require<std::uint64_t>(j, "seed", "seed");
  c.corpus = resolve(base_dir, require<std::string>(j, "corpus", "corpus"));
  if (!stdfs::is_regular_file(c.corpus)) field_error("corpus", "file does not exist: " + c.corpus.string());
  const auto docs = require<std::int64_t>(j, "documents", "documents");
  if (docs < 1) field_error("documents", "must be at least 1");
  c.documents = static_cast<std::size_t>(docs);
  c.output = resolve(base_dir, get<std::string>(j, "output", "output", ""));
  c.pdflatex = get<std::string>(j, "pdflatex", "pdflatex", "");
  if (!c.pdflatex.empty() && c.pdflatex.find('/') != std::string::npos) c.pdflatex = resolve(base_dir, c.pdflatex).string();
  const auto workers = get<std::int64_t>(j, "workers", "workers", 1);
  if (workers < 1 || workers > 256) field_error("workers", "must be between 1 and 256");
  c.workers = static_cast<unsigned>(workers);

  if (j.contains("generator")) {
    const auto& g = j["generator"];
    const auto known = synthdoc::GeneratorConfig{}.to_json();
    if (!g.is_object()) field_error("generator", "must be an object");
    for (const auto& [k, _] : g.items())
      if (!known.contains(k)) field_error("generator." + k, "unknown field");
    try {
      c.generator = synthdoc::GeneratorConfig::from_json(g);
    } catch (const json::exception&) {
      field_error("generator", "has a field of the wrong type");
    }
    if (c.generator.inline_max_pt <= 0) field_error("generator.inline_max_pt", "must be positive");
    if (c.generator.min_sentences < 1 || c.generator.max_sentences < c.generator.min_sentences)
      field_error("generator.min_sentences", "needs 1 <= min_sentences <= max_sentences");
  }

  if (!j.contains("parsers") || !j["parsers"].is_array() || j["parsers"].empty())
    field_error("parsers", "must be a non-empty list of adapter specs");
  std::set<std::string> names;
  for (std::size_t i = 0; i < j["parsers"].size(); ++i) {
    const std::string field = "parsers[" + std::to_string(i) + "]";
    const auto& pj = j["parsers"][i];
    if (pj.is_object() && pj.contains("mode")) {
      const auto mode = pj["mode"].is_string() ? pj["mode"].get<std::string>() : std::string();
      if (mode != "subprocess" && mode != "http" && mode != "builtin_mock")
        field_error(field + ".mode", "unknown adapter mode '" + (pj["mode"].is_string() ? mode : pj["mode"].dump()) + "'");
    }
    try {
      auto spec = adapters::AdapterSpec::from_json(pj);
      spec.validate();
      if (!names.insert(spec.name).second) field_error(field + ".name", "duplicate parser name '" + spec.name + "'");
      c.parsers.push_back(std::move(spec));
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      if (msg.rfind("config field", 0) == 0) throw;
      field_error(field, msg);
    }
  }

  if (j.contains("llm")) {
    const auto& l = j["llm"];
    reject_unknown(l, "llm",
                   {"backend", "mock_default", "mock_script", "model", "base_url", "api_key_env", "max_cost",
                    "max_concurrency", "tokens_per_minute", "max_retries", "timeout_s", "price_in_per_mtok",
                    "price_out_per_mtok"});
    auto& s = c.llm;
    s.backend = get<std::string>(l, "backend", "llm.backend", s.backend);
    if (s.backend != "mock" && s.backend != "http") field_error("llm.backend", "must be 'mock' or 'http'");
    s.mock_default = get<std::string>(l, "mock_default", "llm.mock_default", s.mock_default);
    if (s.mock_default != "echo" && s.mock_default != "strict")
      field_error("llm.mock_default", "must be 'echo' or 'strict'");
    s.mock_script = resolve(base_dir, get<std::string>(l, "mock_script", "llm.mock_script", "")).string();
    if (!s.mock_script.empty() && !stdfs::is_regular_file(s.mock_script))
      field_error("llm.mock_script", "file does not exist: " + s.mock_script);
    s.model = get<std::string>(l, "model", "llm.model", s.model);
    s.base_url = get<std::string>(l, "base_url", "llm.base_url", s.base_url);
    s.api_key_env = get<std::string>(l, "api_key_env", "llm.api_key_env", s.api_key_env);
    if (l.contains("max_cost") && !l["max_cost"].is_null()) {
      s.max_cost = get<double>(l, "max_cost", "llm.max_cost", 0.0);
      if (*s.max_cost < 0) field_error("llm.max_cost", "must not be negative");
    }
    const auto conc = get<std::int64_t>(l, "max_concurrency", "llm.max_concurrency", s.max_concurrency);
    if (conc < 1) field_error("llm.max_concurrency", "must be at least 1");
    s.max_concurrency = static_cast<unsigned>(conc);
    s.tokens_per_minute = get<std::int64_t>(l, "tokens_per_minute", "llm.tokens_per_minute", s.tokens_per_minute);
    s.max_retries = get<int>(l, "max_retries", "llm.max_retries", s.max_retries);
    s.timeout_s = get<int>(l, "timeout_s", "llm.timeout_s", s.timeout_s);
    s.price_in_per_mtok = get<double>(l, "price_in_per_mtok", "llm.price_in_per_mtok", s.price_in_per_mtok);
    s.price_out_per_mtok = get<double>(l, "price_out_per_mtok", "llm.price_out_per_mtok", s.price_out_per_mtok);
  }

  if (j.contains("matching")) {
    const auto& m = j["matching"];
    reject_unknown(m, "matching", {"max_ratio", "retry"});
    c.max_ratio = get<double>(m, "max_ratio", "matching.max_ratio", c.max_ratio);
    if (!(c.max_ratio >= 0.0 && c.max_ratio < 1.0)) field_error("matching.max_ratio", "must be in [0, 1)");
    c.retry = get<bool>(m, "retry", "matching.retry", c.retry);
  }

  if (j.contains("metrics")) {
    if (!j["metrics"].is_array()) field_error("metrics", "must be a list");
    std::string csv;
    for (const auto& m : j["metrics"]) {
      if (!m.is_string()) field_error("metrics", "entries must be strings");
      csv += m.get<std::string>() + ",";
    }
    try {
      c.metrics = metrics::parse_metric_list(csv);
    } catch (const ConfigError& e) {
      field_error("metrics", e.what());
    }
  }
  c.cdm_command = get<std::string>(j, "cdm_command", "cdm_command", "");

  if (j.contains("report")) {
    const auto& r = j["report"];
    reject_unknown(r, "report", {"missing_as_zero", "human_ratings"});
    c.missing_as_zero = get<bool>(r, "missing_as_zero", "report.missing_as_zero", true);
    c.human_ratings = resolve(base_dir, get<std::string>(r, "human_ratings", "report.human_ratings", ""));
    if (!c.human_ratings.empty() && !stdfs::is_regular_file(c.human_ratings))
      field_error("report.human_ratings", "file does not exist: " + c.human_ratings.string());
  }

  if (j.contains("study")) {
    const auto& s = j["study"];
    reject_unknown(s, "study", {"pairs", "raters", "raters_per_pair", "pairs_per_rater", "converter"});
    c.study.pairs = get<std::size_t>(s, "pairs", "study.pairs", c.study.pairs);
    c.study.raters = get<std::size_t>(s, "raters", "study.raters", c.study.raters);
    c.study.raters_per_pair = get<std::size_t>(s, "raters_per_pair", "study.raters_per_pair", c.study.raters_per_pair);
    c.study.pairs_per_rater = get<std::size_t>(s, "pairs_per_rater", "study.pairs_per_rater", c.study.pairs_per_rater);
    c.study.converter = get<std::string>(s, "converter", "study.converter", "");
  }
  return c;
}

RunConfig validate_config(const stdfs::path& path) {
  if (!stdfs::is_regular_file(path)) throw ConfigError("config file does not exist: " + path.string());
  json j;
  try {
    j = json::parse(fs::read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": not valid JSON: " + e.what());
  }
  return config_from_json(j, stdfs::absolute(path).parent_path());
}

json RunConfig::to_json() const {
  json parsers_j = json::array();
  for (const auto& p : parsers) parsers_j.push_back(p.to_json());
  json metrics_j = json::array();
  for (auto m : metrics) metrics_j.push_back(metrics::to_string(m));
  json llm_j{{"backend", llm.backend},
             {"mock_default", llm.mock_default},
             {"model", llm.model},
             {"api_key_env", llm.api_key_env},
             {"max_concurrency", llm.max_concurrency},
             {"tokens_per_minute", llm.tokens_per_minute},
             {"max_retries", llm.max_retries},
             {"timeout_s", llm.timeout_s},
             {"price_in_per_mtok", llm.price_in_per_mtok},
             {"price_out_per_mtok", llm.price_out_per_mtok}};
  if (!llm.mock_script.empty()) llm_j["mock_script"] = llm.mock_script;
  if (!llm.base_url.empty()) llm_j["base_url"] = llm.base_url;
  if (llm.max_cost) llm_j["max_cost"] = *llm.max_cost;
  json j{{"seed", seed},
         {"corpus", corpus.string()},
         {"documents", documents},
         {"workers", workers},
         {"generator", generator.to_json()},
         {"parsers", parsers_j},
         {"llm", llm_j},
         {"matching", {{"max_ratio", max_ratio}, {"retry", retry}}},
         {"metrics", metrics_j},
         {"report", {{"missing_as_zero", missing_as_zero}}},
         {"study",
          {{"pairs", study.pairs},
           {"raters", study.raters},
           {"raters_per_pair", study.raters_per_pair},
           {"pairs_per_rater", study.pairs_per_rater}}}};
  if (!output.empty()) j["output"] = output.string();
  if (!pdflatex.empty()) j["pdflatex"] = pdflatex;
  if (!cdm_command.empty()) j["cdm_command"] = cdm_command;
  if (!human_ratings.empty()) j["report"]["human_ratings"] = human_ratings.string();
  if (!study.converter.empty()) j["study"]["converter"] = study.converter;
  return j;
}

std::string config_hash(const RunConfig& c) {
  auto j = c.to_json();
  j.erase("output");
  j.erase("corpus");
  j["corpus_sha256"] = hash::sha256_hex(fs::read_file(c.corpus));
  return hash::sha256_hex(j.dump());
}

std::shared_ptr<llm::LlmBackend> make_backend(const LlmSettings& s) {
  if (s.backend == "http") {
    llm::HttpBackendOptions o;
    o.base_url = s.base_url;
    o.api_key_env = s.api_key_env;
    o.timeout = std::chrono::seconds(s.timeout_s);
    return std::make_shared<llm::HttpChatBackend>(o);
  }
  if (!s.mock_script.empty()) return llm::MockBackend::from_file(s.mock_script);
  return std::make_shared<llm::MockBackend>(std::map<std::string, json>{},
                                            s.mock_default == "strict" ? llm::MockDefault::strict : llm::MockDefault::echo);
}

llm::ClientOptions client_options(const LlmSettings& s) {
  llm::ClientOptions o;
  o.max_retries = s.max_retries;
  o.max_concurrency = s.max_concurrency;
  o.tokens_per_minute = s.tokens_per_minute;
  o.max_cost = s.max_cost;
  o.price_in_per_mtok = s.price_in_per_mtok;
  o.price_out_per_mtok = s.price_out_per_mtok;
  return o;
}

}  // namespace fbench::cli
