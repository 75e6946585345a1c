#include <doctest.h>

#include "fbench/adapters/perturb.hpp"
#include "fbench/errors.hpp"
#include "fbench/metrics/scoring.hpp"
#include "fbench/util/fs.hpp"
#include "support/support.hpp"

using namespace fbench;
using namespace fbench::metrics;
using fbench::testing::sample_manifest;
using fbench::testing::TempDir;
using nlohmann::json;

namespace {

llm::ClientOptions quiet() {
  llm::ClientOptions o;
  o.sleep = [](std::chrono::milliseconds) {};
  return o;
}

// Counts calls and answers from a fixed payload, or fails every time.
class CountingBackend : public llm::LlmBackend {
 public:
  explicit CountingBackend(std::optional<json> payload) : payload_(std::move(payload)) {}
  llm::Completion complete(const llm::LlmRequest&) override {
    ++calls;
    if (!payload_) throw llm::TransportError("down");
    return {payload_->dump(), 10, 5};
  }
  bool is_live() const override { return false; }
  std::string describe() const override { return "counting"; }
  std::atomic<int> calls{0};

 private:
  std::optional<json> payload_;
};

matching::DocumentMatches identity_matches(const synthdoc::DocumentManifest& m) {
  matching::DocumentMatches d;
  d.doc_id = m.doc_id;
  d.parser = "mock";
  const auto text = adapters::identity_rendering(m);
  for (const auto& g : m.ground_truth) {
    matching::MatchResult r;
    r.gt_index = g.gt_index;
    r.extracted = g.latex;
    r.method = matching::MatchMethod::exact;
    r.edit_ratio = 0.0;
    const auto b = text.find(g.latex);
    r.span = matching::Span{b, b + g.latex.size()};
    d.results.push_back(r);
  }
  return d;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("MISSING judges 0 without a model call") {
    auto backend = std::make_shared<CountingBackend>(json{{"score", 10}, {"justification", "x"}});
    llm::LlmClient client(backend, quiet());
    CHECK(llm_judge("x^2", std::nullopt, client) == 0.0);
    auto o = judge_pair("x^2", std::nullopt, client);
    CHECK(*o.score == 0.0);
    CHECK(!o.called);
    CHECK(backend->calls == 0);
  }

  TEST_CASE("exact-equality mock judge") {
    llm::LlmClient client(std::make_shared<llm::MockBackend>(std::map<std::string, json>{}, llm::MockDefault::echo),
                          quiet());
    CHECK(llm_judge("\\alpha + 1", std::string("\\alpha + 1"), client) == 10.0);
    CHECK(llm_judge("\\alpha + 1", std::string("\\alpha + 2"), client) == 0.0);
  }

  TEST_CASE("scripted judge treats equivalent renderings as equal") {
    auto req = judge_request("\\frac{1}{2}", "{1 \\over 2}", llm::kDefaultModel);
    std::map<std::string, json> script{
        {llm::fingerprint(req), {{"score", 10}, {"justification", "both render as one half"}}}};
    llm::LlmClient client(std::make_shared<llm::MockBackend>(script, llm::MockDefault::strict), quiet());
    CHECK(llm_judge("\\frac{1}{2}", std::string("{1 \\over 2}"), client) == 10.0);
  }

  TEST_CASE("judge payload off the half-point grid is rejected") {
    auto backend = std::make_shared<CountingBackend>(json{{"score", 7.3}, {"justification", "x"}});
    llm::LlmClient client(backend, quiet());
    CHECK_THROWS_AS(llm_judge("a", std::string("b"), client), llm::ProtocolError);
    auto o = judge_pair("a", std::string("b"), client);
    CHECK(!o.score);
    CHECK(o.reason.find("protocol") == 0);
  }

  TEST_CASE("persistent judge failure leaves the pair unscored") {
    auto m = sample_manifest();
    auto d = identity_matches(m);
    d.results[1] = matching::MatchResult{1};
    auto backend = std::make_shared<CountingBackend>(std::nullopt);
    llm::LlmClient client(backend, quiet());
    ScoringOptions opts;
    opts.metrics = {Metric::judge};
    auto recs = score_document(m, d, &client, opts);
    REQUIRE(recs.size() == m.ground_truth.size());
    for (const auto& r : recs) {
      if (r.gt_index == 1) {
        CHECK(r.status == ScoreStatus::scored);
        CHECK(r.missing);
        CHECK(r.value == 0.0);
      } else {
        CHECK(r.status == ScoreStatus::unscored);
      }
    }
    auto cov = coverage(recs);
    CHECK(cov[Metric::judge].scored == 1);
    CHECK(cov[Metric::judge].unscored == m.ground_truth.size() - 1);
  }

  TEST_CASE("batch records: one per pair and metric, MISSING is zero everywhere") {
    auto m = sample_manifest();
    auto d = identity_matches(m);
    d.results[3] = matching::MatchResult{3};
    d.results[0].extracted = "a_{1} + b_{2} = c^{4}";
    d.results[0].method = matching::MatchMethod::fuzzy;
    llm::LlmClient client(std::make_shared<llm::MockBackend>(std::map<std::string, json>{}, llm::MockDefault::echo),
                          quiet());
    ScoringOptions opts;
    opts.metrics = {Metric::lev_sim, Metric::bleu, Metric::cdm_f1, Metric::judge};
    opts.workers = 3;
    auto recs = score_document(m, d, &client, opts);
    REQUIRE(recs.size() == 4 * m.ground_truth.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const auto& r = recs[i];
      CHECK(r.gt_index == i / 4);
      CHECK(r.placement == m.ground_truth[r.gt_index].placement);
      CHECK(r.value >= 0.0);
      CHECK(r.value <= metric_max(r.metric));
      if (r.metric == Metric::cdm_f1) CHECK(r.status == ScoreStatus::unavailable);
      if (r.gt_index == 3) CHECK(r.value == 0.0);
      if (r.gt_index == 2 && r.metric != Metric::cdm_f1) CHECK(r.value == metric_max(r.metric));
    }
    CHECK(recs[0].value == doctest::Approx(1.0 - 1.0 / 21.0));
    CHECK(recs[3].value == 0.0);

    TempDir dir;
    write_scores(dir / "scores.jsonl", recs);
    CHECK(read_scores(dir / "scores.jsonl") == recs);
  }

  TEST_CASE("external CDM adapter") {
    CHECK(!cdm_external("x", "x", std::nullopt).available);
    CHECK(cdm_external("x", "x", std::nullopt).reason == "cdm tool not configured");

    CdmTool same{"if cmp -s {gt} {pred}; then echo '{\"f1\": 1.0, \"precision\": 1, \"recall\": 1}'; "
                 "else echo '{\"f1\": 0.5}'; fi"};
    auto a = cdm_external("\\frac{a}{b}", "\\frac{a}{b}", same);
    CHECK(a.available);
    CHECK(a.f1 == 1.0);
    CHECK(*a.recall == 1.0);
    CHECK(cdm_external("a", "b", same).f1 == 0.5);

    auto failing = cdm_external("a", "a", CdmTool{"echo broken >&2; exit 4"});
    CHECK(!failing.available);
    CHECK(failing.reason.find("exited with 4") != std::string::npos);
    CHECK(!cdm_external("a", "a", CdmTool{"echo not-json"}).available);
    CHECK(!cdm_external("a", "a", CdmTool{"echo '{\"f1\": 3}'"}).available);
    CHECK(!cdm_external("a", "a", CdmTool{"sleep 5", std::chrono::seconds(1)}).available);
  }

  TEST_CASE("metric list parsing") {
    CHECK(parse_metric_list("lev,bleu,judge,cdm").size() == 4);
    CHECK(parse_metric_list(" judge ") == std::set<Metric>{Metric::judge});
    CHECK_THROWS_AS(parse_metric_list("lev,ssim"), ConfigError);
    CHECK_THROWS_AS(parse_metric_list(""), ConfigError);
  }
}
