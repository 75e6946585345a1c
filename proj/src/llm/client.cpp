#include "fbench/llm/client.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <thread>

#include "fbench/errors.hpp"
#include "fbench/llm/schema.hpp"
#include "fbench/util/fs.hpp"
#include "fbench/util/hash.hpp"
#include "fbench/util/text.hpp"
#include "fbench/util/utf8.hpp"

namespace fbench::llm {

using nlohmann::json;

std::string fingerprint(const LlmRequest& req) {
  return hash::sha256_hex(req.system_prompt + "\x1f" + req.user_prompt);
}

std::string tagged(const std::string& tag, const std::string& body) {
  return "<" + tag + ">\n" + body + "\n</" + tag + ">";
}

std::optional<std::string> untag(const std::string& prompt, const std::string& tag) {
  const std::string open = "<" + tag + ">\n", close = "\n</" + tag + ">";
  auto b = prompt.find(open);
  if (b == std::string::npos) return std::nullopt;
  b += open.size();
  auto e = prompt.rfind(close);
  if (e == std::string::npos || e < b) return std::nullopt;
  return prompt.substr(b, e - b);
}

namespace {

std::string strip_ws(const std::string& s) {
  std::u32string out;
  for (char32_t c : utf8::decode(s))
    if (!utf8::is_space(c)) out.push_back(c);
  return utf8::encode(out);
}

}  // namespace

json echo_extract(const json& ground_truth, const std::string& parsed_text) {
  const std::string hay = strip_ws(parsed_text);
  json items = json::array();
  for (const auto& g : ground_truth) {
    const std::string latex = g.at("latex").get<std::string>();
    const std::string needle = strip_ws(latex);
    const bool present = !needle.empty() && hay.find(needle) != std::string::npos;
    items.push_back({{"index", g.at("index")}, {"extracted", present ? latex : ""}, {"grouped", false}});
  }
  return json{{"formulas", items}};
}

json exact_judge(const std::string& gt, const std::string& extracted) {
  const bool same = gt == extracted;
  return json{{"score", same ? 10.0 : 0.0},
              {"justification", same ? "identical strings" : "strings differ"}};
}

MockBackend::MockBackend(std::map<std::string, json> script, MockDefault fallback)
    : script_(std::move(script)), fallback_(fallback) {}

std::shared_ptr<MockBackend> MockBackend::from_file(const std::filesystem::path& p) {
  json j = fs::read_json(p);
  std::map<std::string, json> script;
  if (auto r = j.find("responses"); r != j.end())
    for (auto it = r->begin(); it != r->end(); ++it) script[it.key()] = it.value();
  const std::string def = j.value("default", "strict");
  if (def != "strict" && def != "echo")
    throw ConfigError(p.string() + ": default must be 'strict' or 'echo'");
  return std::make_shared<MockBackend>(std::move(script),
                                       def == "echo" ? MockDefault::echo : MockDefault::strict);
}

std::string MockBackend::describe() const {
  return std::string("mock:") + (fallback_ == MockDefault::echo ? "echo" : "strict") + ":" +
         std::to_string(script_.size());
}

Completion MockBackend::complete(const LlmRequest& req) {
  const std::string fp = fingerprint(req);
  if (auto it = script_.find(fp); it != script_.end()) return {it->second.dump(), 0, 0};
  if (fallback_ == MockDefault::strict) throw TransportError("mock: no scripted response for " + fp);
  if (req.schema_name == kExtractionSchema) {
    auto gt = untag(req.user_prompt, "ground_truth");
    auto parsed = untag(req.user_prompt, "parsed_output");
    if (!gt || !parsed) throw TransportError("mock echo: extraction prompt lacks tagged sections");
    return {echo_extract(json::parse(*gt), *parsed).dump(), 0, 0};
  }
  if (req.schema_name == kJudgeSchema) {
    auto gt = untag(req.user_prompt, "ground_truth_formula");
    auto ex = untag(req.user_prompt, "extracted_formula");
    if (!gt || !ex) throw TransportError("mock echo: judge prompt lacks tagged sections");
    return {exact_judge(*gt, *ex).dump(), 0, 0};
  }
  throw TransportError("mock echo: unsupported schema " + req.schema_name);
}

HttpChatBackend::HttpChatBackend(HttpBackendOptions opts)
    : base_url_(std::move(opts.base_url)), api_key_env_(std::move(opts.api_key_env)), timeout_(opts.timeout) {
  if (base_url_.empty()) {
    const char* env = std::getenv("LLM_BASE_URL");
    base_url_ = env && *env ? env : "https://api.openai.com/v1";
  }
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

json HttpChatBackend::request_body(const LlmRequest& req) {
  json body{{"model", req.model},
            {"messages",
             json::array({{{"role", "system"}, {"content", req.system_prompt}},
                          {{"role", "user"}, {"content", req.user_prompt}}})},
            {"response_format",
             {{"type", "json_schema"},
              {"json_schema", {{"name", req.schema_name}, {"strict", true}, {"schema", req.response_schema}}}}}};
  if (req.temperature) body["temperature"] = *req.temperature;
  return body;
}

Completion HttpChatBackend::complete(const LlmRequest& req) {
  const char* key = std::getenv(api_key_env_.c_str());
  if (!key || !*key) throw TransportError("environment variable " + api_key_env_ + " is not set");

  auto url = text::split_url(base_url_);
  if (!url) throw TransportError("invalid LLM base URL: " + base_url_);

  httplib::Client cli(url->origin);
  cli.set_connection_timeout(timeout_);
  cli.set_read_timeout(timeout_);
  cli.set_write_timeout(timeout_);
  httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};
  auto res = cli.Post(url->path + "/chat/completions", headers, request_body(req).dump(), "application/json");
  if (!res) throw TransportError("LLM request failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw TransportError("LLM HTTP " + std::to_string(res->status) + ": " + text::tail(res->body, 500));
  json j;
  try {
    j = json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw TransportError(std::string("LLM response is not JSON: ") + e.what());
  }
  Completion c;
  if (j.contains("choices") && !j["choices"].empty()) {
    const auto& msg = j["choices"][0].value("message", json::object());
    if (msg.contains("content") && msg["content"].is_string()) c.content = msg["content"].get<std::string>();
  }
  if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
    c.tokens_in = u->value("prompt_tokens", 0);
    c.tokens_out = u->value("completion_tokens", 0);
  } else {
    c.tokens_in = static_cast<std::int64_t>((req.system_prompt.size() + req.user_prompt.size()) / 4);
    c.tokens_out = static_cast<std::int64_t>(c.content.size() / 4);
  }
  return c;
}

void CostLedger::add(const std::string& stage, std::int64_t tokens_in, std::int64_t tokens_out, double cost) {
  std::lock_guard lock(mu_);
  auto& e = entries_[stage];
  e.stage = stage;
  e.calls += 1;
  e.tokens_in += tokens_in;
  e.tokens_out += tokens_out;
  e.cost += std::max(0.0, cost);
  total_ += std::max(0.0, cost);
}

double CostLedger::total() const {
  std::lock_guard lock(mu_);
  return total_;
}

std::map<std::string, CostEntry> CostLedger::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

json CostLedger::to_json() const {
  std::lock_guard lock(mu_);
  json stages = json::object();
  for (const auto& [name, e] : entries_)
    stages[name] = {{"calls", e.calls}, {"tokens_in", e.tokens_in}, {"tokens_out", e.tokens_out}, {"cost", e.cost}};
  return json{{"total_cost", total_}, {"stages", stages}};
}

LlmClient::LlmClient(std::shared_ptr<LlmBackend> backend, ClientOptions opts)
    : backend_(std::move(backend)), opts_(std::move(opts)) {
  if (!backend_) throw PreconditionError("LlmClient needs a backend");
  if (opts_.max_concurrency == 0) opts_.max_concurrency = 1;
}

void LlmClient::pause(std::chrono::milliseconds d) {
  if (opts_.sleep)
    opts_.sleep(d);
  else
    std::this_thread::sleep_for(d);
}

void LlmClient::acquire(std::int64_t estimated_tokens) {
  std::unique_lock lock(mu_);
  while (true) {
    const auto now = std::chrono::steady_clock::now();
    while (!window_.empty() && now - window_.front().first >= std::chrono::minutes(1)) window_.pop_front();
    std::int64_t used = 0;
    for (const auto& [t, n] : window_) used += n;
    const bool tokens_ok = opts_.tokens_per_minute <= 0 || window_.empty() ||
                           used + estimated_tokens <= opts_.tokens_per_minute;
    if (in_flight_ < opts_.max_concurrency && tokens_ok) break;
    if (!tokens_ok && in_flight_ < opts_.max_concurrency)
      cv_.wait_until(lock, window_.front().first + std::chrono::minutes(1));
    else
      cv_.wait(lock);
  }
  ++in_flight_;
}

void LlmClient::release(std::int64_t actual_tokens) {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
    if (opts_.tokens_per_minute > 0) window_.emplace_back(std::chrono::steady_clock::now(), actual_tokens);
  }
  cv_.notify_all();
}

LlmResponse LlmClient::complete_structured(const LlmRequest& req, const std::string& stage) {
  if (text::trim(req.system_prompt).empty() || text::trim(req.user_prompt).empty())
    throw PreconditionError("LLM request prompts must be non-empty");
  if (req.schema_name.empty()) throw PreconditionError("LLM request needs a schema name");
  if (auto err = check_schema(req.response_schema)) throw PreconditionError("response schema: " + *err);

  LlmResponse out;
  out.fingerprint = fingerprint(req);
  const bool live = backend_->is_live();
  const auto estimate = static_cast<std::int64_t>((req.system_prompt.size() + req.user_prompt.size()) / 4);
  auto backoff = opts_.backoff_initial;
  std::string last_error;
  for (int attempt = 0; attempt <= opts_.max_retries; ++attempt) {
    if (attempt > 0) {
      pause(backoff);
      backoff = std::min(opts_.backoff_max,
                         std::chrono::milliseconds(static_cast<long long>(backoff.count() * opts_.backoff_factor)));
    }
    if (live && opts_.max_cost && ledger_.total() >= *opts_.max_cost)
      throw BudgetExceeded("LLM cost budget of " + text::format_fixed(*opts_.max_cost, 2) + " reached");
    Completion c;
    acquire(estimate);
    try {
      c = backend_->complete(req);
    } catch (const TransportError& e) {
      release(estimate);
      last_error = e.what();
      out.retry_count = attempt;
      if (attempt == opts_.max_retries) throw TransportError(last_error);
      continue;
    }
    release(c.tokens_in + c.tokens_out);
    const double cost = live ? (static_cast<double>(c.tokens_in) * opts_.price_in_per_mtok +
                                static_cast<double>(c.tokens_out) * opts_.price_out_per_mtok) / 1e6
                             : 0.0;
    ledger_.add(stage, c.tokens_in, c.tokens_out, cost);
    out.tokens_in += c.tokens_in;
    out.tokens_out += c.tokens_out;
    out.cost_estimate += cost;
    out.retry_count = attempt;
    json payload;
    try {
      payload = json::parse(c.content);
    } catch (const json::parse_error& e) {
      last_error = std::string("payload is not JSON: ") + e.what();
      continue;
    }
    if (auto err = validate(payload, req.response_schema)) {
      last_error = "schema violation: " + *err;
      continue;
    }
    out.payload = std::move(payload);
    return out;
  }
  throw ProtocolError("no schema-valid response after " + std::to_string(opts_.max_retries + 1) +
                      " attempts: " + last_error);
}

}  // namespace fbench::llm
