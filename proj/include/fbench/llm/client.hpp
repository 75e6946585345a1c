#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace fbench::llm {

inline constexpr const char* kDefaultModel = "GPT-5-mini";

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LlmRequest {
  std::string model = kDefaultModel;
  std::string system_prompt;
  std::string user_prompt;
  std::string schema_name;
  nlohmann::json response_schema;
  std::optional<double> temperature = 0.0;
};

struct LlmResponse {
  nlohmann::json payload;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
  double cost_estimate = 0.0;
  int retry_count = 0;
  std::string fingerprint;
};

// Raw backend output before schema validation.
struct Completion {
  std::string content;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
};

// SHA-256 over the system and user prompts.
std::string fingerprint(const LlmRequest& req);

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  // Throws TransportError on network/auth failure.
  virtual Completion complete(const LlmRequest& req) = 0;
  virtual bool is_live() const = 0;
  virtual std::string describe() const = 0;
};

enum class MockDefault {
  strict,  // unknown fingerprint -> TransportError
  echo,    // echo-extractor for extraction requests, exact-equality for judge requests
};

class MockBackend : public LlmBackend {
 public:
  MockBackend(std::map<std::string, nlohmann::json> script, MockDefault fallback);
  // {"default": "echo"|"strict", "responses": {"<fingerprint>": payload}}
  static std::shared_ptr<MockBackend> from_file(const std::filesystem::path& p);

  Completion complete(const LlmRequest& req) override;
  bool is_live() const override { return false; }
  std::string describe() const override;

 private:
  std::map<std::string, nlohmann::json> script_;
  MockDefault fallback_;
};

struct HttpBackendOptions {
  std::string base_url;  // defaults to $LLM_BASE_URL, then https://api.openai.com/v1
  std::string api_key_env = "LLM_API_KEY";
  std::chrono::seconds timeout{120};
};

class HttpChatBackend : public LlmBackend {
 public:
  explicit HttpChatBackend(HttpBackendOptions opts);
  Completion complete(const LlmRequest& req) override;
  bool is_live() const override { return true; }
  std::string describe() const override { return "http:" + base_url_; }

  static nlohmann::json request_body(const LlmRequest& req);

 private:
  std::string base_url_;
  std::string api_key_env_;
  std::chrono::seconds timeout_;
};

struct CostEntry {
  std::string stage;
  std::int64_t calls = 0;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
  double cost = 0.0;
};

class CostLedger {
 public:
  void add(const std::string& stage, std::int64_t tokens_in, std::int64_t tokens_out, double cost);
  double total() const;
  std::map<std::string, CostEntry> entries() const;
  nlohmann::json to_json() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, CostEntry> entries_;
  double total_ = 0.0;
};

struct ClientOptions {
  int max_retries = 3;
  std::chrono::milliseconds backoff_initial{500};
  double backoff_factor = 2.0;
  std::chrono::milliseconds backoff_max{8000};
  double price_in_per_mtok = 0.25;
  double price_out_per_mtok = 2.0;
  unsigned max_concurrency = 4;
  std::int64_t tokens_per_minute = 0;  // 0 = unlimited
  std::optional<double> max_cost;      // live calls refused once reached
  std::function<void(std::chrono::milliseconds)> sleep;
};

class LlmClient {
 public:
  explicit LlmClient(std::shared_ptr<LlmBackend> backend, ClientOptions opts = {});

  // Throws PreconditionError, TransportError, ProtocolError or BudgetExceeded.
  LlmResponse complete_structured(const LlmRequest& req, const std::string& stage = "llm");

  CostLedger& ledger() { return ledger_; }
  const LlmBackend& backend() const { return *backend_; }
  const ClientOptions& options() const { return opts_; }

 private:
  void acquire(std::int64_t estimated_tokens);
  void release(std::int64_t actual_tokens);
  void pause(std::chrono::milliseconds d);

  std::shared_ptr<LlmBackend> backend_;
  ClientOptions opts_;
  CostLedger ledger_;
  std::mutex mu_;
  std::condition_variable cv_;
  unsigned in_flight_ = 0;
  std::deque<std::pair<std::chrono::steady_clock::time_point, std::int64_t>> window_;
};

// Tag convention shared by the prompt templates and the mock heuristics.
std::string tagged(const std::string& tag, const std::string& body);
std::optional<std::string> untag(const std::string& prompt, const std::string& tag);

inline constexpr const char* kExtractionSchema = "formula_extraction";
inline constexpr const char* kJudgeSchema = "formula_judgement";

// Deterministic stand-ins used by MockDefault::echo.
nlohmann::json echo_extract(const nlohmann::json& ground_truth, const std::string& parsed_text);
nlohmann::json exact_judge(const std::string& gt, const std::string& extracted);

}  // namespace fbench::llm
