#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "fbench/errors.hpp"
#include "fbench/llm/client.hpp"
#include "fbench/llm/schema.hpp"

using namespace fbench;
using namespace fbench::llm;
using nlohmann::json;

namespace {

json score_schema() {
  return json{{"type", "object"},
              {"properties", {{"score", {{"type", "number"}, {"minimum", 0}, {"maximum", 10}}}}},
              {"required", {"score"}},
              {"additionalProperties", false}};
}

LlmRequest score_request() {
  LlmRequest r;
  r.system_prompt = "You rate things.";
  r.user_prompt = "Rate this.";
  r.schema_name = "rating";
  r.response_schema = score_schema();
  return r;
}

class LocalServer {
 public:
  explicit LocalServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    svr_.Post("/v1/chat/completions", handler);
    port_ = svr_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { svr_.listen_after_bind(); });
    svr_.wait_until_ready();
  }
  ~LocalServer() {
    svr_.stop();
    thread_.join();
  }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server svr_;
  int port_ = 0;
  std::thread thread_;
};

std::string chat_reply(const std::string& content) {
  return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}},
              {"usage", {{"prompt_tokens", 1000}, {"completion_tokens", 100}}}}
      .dump();
}

ClientOptions fast_options(std::vector<long long>* sleeps = nullptr) {
  ClientOptions o;
  o.sleep = [sleeps](std::chrono::milliseconds d) {
    if (sleeps) sleeps->push_back(d.count());
  };
  return o;
}

}  // namespace

TEST_SUITE("llmclient") {
  TEST_CASE("schema validation subset") {
    CHECK_FALSE(validate(json{{"score", 3}}, score_schema()));
    CHECK(validate(json{{"score", 11}}, score_schema()));
    CHECK(validate(json{{"score", "x"}}, score_schema()));
    CHECK(validate(json::object(), score_schema()));
    CHECK(validate(json{{"score", 1}, {"extra", 1}}, score_schema()));
    json half{{"type", "number"}, {"multipleOf", 0.5}};
    CHECK_FALSE(validate(9.5, half));
    CHECK(validate(9.3, half));
    json arr{{"type", "array"}, {"items", {{"type", "integer"}}}, {"minItems", 2}, {"maxItems", 2}};
    CHECK_FALSE(validate(json{1, 2}, arr));
    CHECK(validate(json{1}, arr));
    CHECK(validate(json{1, 2.5}, arr));
    CHECK(check_schema(json{{"type", "object"}, {"properties", {{"a", {{"type", "string"}}}}}}));
    CHECK_FALSE(check_schema(score_schema()));
  }

  TEST_CASE("mock backend scripted payload costs nothing") {
    auto req = score_request();
    auto mock = std::make_shared<MockBackend>(std::map<std::string, json>{{fingerprint(req), {{"score", 7}}}},
                                              MockDefault::strict);
    LlmClient client(mock, fast_options());
    auto r1 = client.complete_structured(req);
    CHECK(r1.payload == json{{"score", 7}});
    CHECK(r1.cost_estimate == 0.0);
    CHECK(r1.retry_count == 0);
    auto r2 = client.complete_structured(req);
    CHECK(r2.payload == r1.payload);
    CHECK(client.ledger().total() == 0.0);

    auto other = req;
    other.user_prompt = "Something else.";
    CHECK_THROWS_AS(client.complete_structured(other), TransportError);
  }

  TEST_CASE("preconditions") {
    LlmClient client(std::make_shared<MockBackend>(std::map<std::string, json>{}, MockDefault::echo), fast_options());
    auto req = score_request();
    req.user_prompt = "  ";
    CHECK_THROWS_AS(client.complete_structured(req), PreconditionError);
    req = score_request();
    req.response_schema = json{{"type", "object"}, {"properties", {{"a", {{"type", "string"}}}}}};
    CHECK_THROWS_AS(client.complete_structured(req), PreconditionError);
  }

  TEST_CASE("echo heuristics") {
    json gt = json::array({{{"index", 0}, {"latex", "a + b"}}, {{"index", 1}, {"latex", "\\frac{1}{2}"}}});
    auto p = echo_extract(gt, "text $a+b$ more");
    CHECK(p["formulas"][0]["extracted"] == "a + b");
    CHECK(p["formulas"][1]["extracted"] == "");
    CHECK(p["formulas"][0]["grouped"] == false);
    CHECK(exact_judge("x", "x")["score"] == 10.0);
    CHECK(exact_judge("x", "x ")["score"] == 0.0);

    LlmRequest req;
    req.system_prompt = "sys";
    req.user_prompt = tagged("ground_truth", gt.dump()) + "\n" + tagged("parsed_output", "$\\frac{1}{2}$");
    req.schema_name = kExtractionSchema;
    req.response_schema = json{{"type", "object"}};
    LlmClient client(std::make_shared<MockBackend>(std::map<std::string, json>{}, MockDefault::echo), fast_options());
    auto r = client.complete_structured(req);
    CHECK(r.payload["formulas"][0]["extracted"] == "");
    CHECK(r.payload["formulas"][1]["extracted"] == "\\frac{1}{2}");
  }

  TEST_CASE("live backend retries a non-conforming payload once") {
    std::atomic<int> calls{0};
    std::string seen_auth, seen_body;
    LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
      seen_auth = req.get_header_value("Authorization");
      seen_body = req.body;
      int n = calls++;
      res.set_content(chat_reply(n == 0 ? R"({"score": 42})" : R"({"score": 8.5})"), "application/json");
    });
    ::setenv("FBENCH_TEST_KEY", "secret", 1);
    auto backend = std::make_shared<HttpChatBackend>(HttpBackendOptions{server.base_url(), "FBENCH_TEST_KEY"});
    std::vector<long long> sleeps;
    LlmClient client(backend, fast_options(&sleeps));
    auto r = client.complete_structured(score_request(), "judge");
    CHECK(r.payload["score"] == 8.5);
    CHECK(r.retry_count == 1);
    CHECK(calls == 2);
    CHECK(seen_auth == "Bearer secret");
    auto body = json::parse(seen_body);
    CHECK(body["model"] == kDefaultModel);
    CHECK(body["temperature"] == 0.0);
    CHECK(body["response_format"]["json_schema"]["name"] == "rating");
    CHECK(r.tokens_in == 2000);
    CHECK(r.cost_estimate == doctest::Approx(2 * (1000 * 0.25 + 100 * 2.0) / 1e6));
    CHECK(client.ledger().total() == doctest::Approx(r.cost_estimate));
    CHECK(client.ledger().entries().at("judge").calls == 2);
  }

  TEST_CASE("transport failures exhaust the retry budget with exponential backoff") {
    std::atomic<int> calls{0};
    LocalServer server([&](const httplib::Request&, httplib::Response& res) {
      ++calls;
      res.status = 503;
      res.set_content("busy", "text/plain");
    });
    ::setenv("FBENCH_TEST_KEY", "secret", 1);
    auto backend = std::make_shared<HttpChatBackend>(HttpBackendOptions{server.base_url(), "FBENCH_TEST_KEY"});
    std::vector<long long> sleeps;
    LlmClient client(backend, fast_options(&sleeps));
    CHECK_THROWS_AS(client.complete_structured(score_request()), TransportError);
    CHECK(calls == 4);
    CHECK(sleeps == std::vector<long long>{500, 1000, 2000});
  }

  TEST_CASE("persistent schema violation is a protocol error") {
    LocalServer server([&](const httplib::Request&, httplib::Response& res) {
      res.set_content(chat_reply("not json"), "application/json");
    });
    ::setenv("FBENCH_TEST_KEY", "secret", 1);
    LlmClient client(std::make_shared<HttpChatBackend>(HttpBackendOptions{server.base_url(), "FBENCH_TEST_KEY"}),
                     fast_options());
    CHECK_THROWS_AS(client.complete_structured(score_request()), ProtocolError);
    double before = client.ledger().total();
    CHECK(before > 0.0);
  }

  TEST_CASE("missing key and cost budget") {
    ::unsetenv("FBENCH_MISSING_KEY");
    LlmClient client(std::make_shared<HttpChatBackend>(HttpBackendOptions{"http://127.0.0.1:9/v1", "FBENCH_MISSING_KEY"}),
                     fast_options());
    CHECK_THROWS_AS(client.complete_structured(score_request()), TransportError);

    auto opts = fast_options();
    opts.max_cost = 0.0;
    LlmClient capped(std::make_shared<HttpChatBackend>(HttpBackendOptions{"http://127.0.0.1:9/v1", "FBENCH_MISSING_KEY"}),
                     opts);
    CHECK_THROWS_AS(capped.complete_structured(score_request()), BudgetExceeded);
  }

  TEST_CASE("concurrent callers respect the limiter") {
    std::atomic<int> active{0}, peak{0};
    LocalServer server([&](const httplib::Request&, httplib::Response& res) {
      int now = ++active;
      int p = peak.load();
      while (now > p && !peak.compare_exchange_weak(p, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
      --active;
      res.set_content(chat_reply(R"({"score": 1})"), "application/json");
    });
    ::setenv("FBENCH_TEST_KEY", "secret", 1);
    auto opts = fast_options();
    opts.max_concurrency = 2;
    LlmClient client(std::make_shared<HttpChatBackend>(HttpBackendOptions{server.base_url(), "FBENCH_TEST_KEY"}), opts);
    std::vector<std::thread> threads;
    for (int i = 0; i < 6; ++i) threads.emplace_back([&] { client.complete_structured(score_request()); });
    for (auto& t : threads) t.join();
    CHECK(peak <= 2);
    CHECK(client.ledger().entries().at("llm").calls == 6);
  }
}
