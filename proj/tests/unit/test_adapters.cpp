#include <doctest.h>

#include <httplib.h>

#include <cstdlib>
#include <thread>

#include "fbench/adapters/adapter.hpp"
#include "fbench/errors.hpp"
#include "support/support.hpp"

using namespace fbench;
using namespace fbench::adapters;
using fbench::testing::sample_manifest;
using fbench::testing::TempDir;

namespace {

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

AdapterSpec subprocess_spec(const std::string& cmd, int timeout_s = 10) {
  AdapterSpec s;
  s.name = "sub";
  s.mode = AdapterMode::subprocess;
  s.command_template = cmd;
  s.timeout = std::chrono::seconds(timeout_s);
  return s;
}

struct LocalServer {
  httplib::Server server;
  int port = 0;
  std::thread thread;
  LocalServer() = default;
  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~LocalServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port) + path; }
};

}  // namespace

TEST_SUITE("adapters") {
  TEST_CASE("identity rendering format") {
    auto m = sample_manifest();
    auto text = identity_rendering(m);
    CHECK(text ==
          "First sentence here. Second one follows.\n\n"
          "$a_{1} + b_{2} = c^{3}$ Ein Satz mit Formel. Noch einer $\\alpha \\cdot x_{n} \\leq y$\n\n"
          "$$\\int_{0}^{1} x^{2} \\, dx = \\frac{1}{3}$$\n\n"
          "$$\\sum_{k=1}^{n} k = \\frac{n(n+1)}{2}$$\n\n"
          "Une phrase simple. Encore une autre phrase.\n\n"
          "Una frase $(x + y)^{2} \\geq 4xy$ con formula.\n\n"
          "$$\\lim_{n \\to \\infty} (1 + 1/n)^{n} = e$$\n");
    auto run = perturb_output(m, PerturbationSpec{});
    CHECK(run.output.text == text);
    CHECK(run.output.status == ParseStatus::ok);
    CHECK(run.ledger->formulas.empty());
    for (const auto& g : m.ground_truth) {
      const std::string delim = g.placement == synthdoc::Placement::display_math ? "$$" : "$";
      CHECK(text.find(delim + g.latex + delim) != std::string::npos);
    }
  }

  TEST_CASE("total drop removes every formula") {
    auto m = sample_manifest();
    PerturbationSpec s;
    s.drop_formula_rate = 1.0;
    auto p = perturb(m, s);
    for (const auto& g : m.ground_truth) CHECK(p.text.find(g.latex) == std::string::npos);
    CHECK(p.text.find('$') == std::string::npos);
    CHECK(p.ledger.dropped().size() == m.ground_truth.size());
    CHECK(p.text.find("Ein Satz mit Formel. Noch einer\n") != std::string::npos);
    CHECK(p.text.find("Una frase con formula.") != std::string::npos);
  }

  TEST_CASE("merging adjacent display formulas") {
    auto m = sample_manifest();
    PerturbationSpec s;
    s.merge_adjacent_rate = 1.0;
    auto p = perturb(m, s);
    REQUIRE(p.ledger.merged_groups.size() == 1);
    CHECK(p.ledger.merged_groups[0] == std::vector<std::size_t>{2, 3});
    CHECK(p.text.find("$$\\int_{0}^{1} x^{2} \\, dx = \\frac{1}{3} \\\\ \\sum_{k=1}^{n} k = \\frac{n(n+1)}{2}$$") !=
          std::string::npos);
    CHECK(count(p.text, "$$") == 4);
    CHECK(p.ledger.names(2));
    CHECK(!p.ledger.names(5));
  }

  TEST_CASE("delimiter stripping") {
    auto m = sample_manifest();
    PerturbationSpec s;
    s.strip_delimiter_rate = 1.0;
    auto p = perturb(m, s);
    CHECK(p.text.find('$') == std::string::npos);
    for (const auto& g : m.ground_truth) CHECK(p.text.find(g.latex) != std::string::npos);
    CHECK(p.ledger.formulas.size() == m.ground_truth.size());
  }

  TEST_CASE("unicode substitution touches whole commands only") {
    CHECK(unicode_substitute("\\alpha + \\beta_{i} \\leq \\infty") == "α + β_{i} ≤ ∞");
    CHECK(unicode_substitute("\\alphabet \\{ x \\}") == "\\alphabet \\{ x \\}");
    CHECK(unicode_substitute("\\int_{0}^{1} \\inf") == "∫_{0}^{1} \\inf");
    CHECK(unicode_substitute("\\\\alpha") == "\\\\alpha");
  }

  TEST_CASE("typos alter one character") {
    auto m = sample_manifest();
    PerturbationSpec s;
    s.typo_rate_per_formula = 1.0;
    s.seed = 4;
    auto p = perturb(m, s);
    REQUIRE(p.ledger.formulas.size() == m.ground_truth.size());
    for (const auto& f : p.ledger.formulas) {
      REQUIRE(f.typo);
      const auto& orig = m.ground_truth[f.gt_index].latex;
      REQUIRE(orig.size() == f.emitted.size());
      int diffs = 0;
      for (std::size_t i = 0; i < orig.size(); ++i) diffs += orig[i] != f.emitted[i];
      CHECK(diffs == 1);
      CHECK(orig.substr(f.typo->pos, 1) == f.typo->from);
      CHECK(f.emitted.substr(f.typo->pos, 1) == f.typo->to);
    }
  }

  TEST_CASE("column reorder interleaves paragraphs") {
    auto m = sample_manifest();
    PerturbationSpec s;
    s.reorder_columns = true;
    auto p = perturb(m, s);
    CHECK(p.ledger.paragraph_order == std::vector<std::size_t>{0, 4, 1, 5, 2, 6, 3});
    CHECK(text::starts_with(p.text, "First sentence here. Second one follows.\n\nUne phrase simple."));
  }

  TEST_CASE("ledger describes the output exactly" * doctest::description("property")) {
    Rng r(77);
    for (int trial = 0; trial < 300; ++trial) {
      auto m = sample_manifest("doc_" + std::to_string(trial));
      PerturbationSpec s;
      s.drop_formula_rate = r.uniform01();
      s.strip_delimiter_rate = r.uniform01();
      s.merge_adjacent_rate = r.uniform01();
      s.reorder_columns = r.bernoulli(0.5);
      s.unicode_substitution_rate = r.uniform01();
      s.typo_rate_per_formula = r.uniform01();
      s.whitespace_jitter_rate = r.uniform01();
      s.seed = r.next();
      const auto before = m;
      auto p = perturb(m, s);
      CHECK(m == before);
      CHECK(perturb(m, s).text == p.text);
      CHECK(apply_ledger(m, p.ledger) == p.text);
      CHECK(apply_ledger(m, PerturbationLedger::from_json(p.ledger.to_json())) == p.text);
      for (const auto& g : m.ground_truth)
        if (!p.ledger.names(g.gt_index)) CHECK(p.text.find(g.latex) != std::string::npos);
      for (const auto& f : p.ledger.formulas)
        if (!f.dropped) CHECK(p.text.find(f.emitted) != std::string::npos);
    }
  }

  TEST_CASE("whitespace jitter keeps normalized content") {
    auto m = sample_manifest();
    PerturbationSpec s;
    s.whitespace_jitter_rate = 1.0;
    s.seed = 9;
    auto p = perturb(m, s);
    CHECK(!p.ledger.formulas.empty());
    auto squash = [](std::string x) {
      x.erase(std::remove(x.begin(), x.end(), ' '), x.end());
      return x;
    };
    for (const auto& f : p.ledger.formulas) CHECK(squash(f.emitted) == squash(m.ground_truth[f.gt_index].latex));
  }

  TEST_CASE("spec validation") {
    CHECK_NOTHROW(subprocess_spec("cat {pdf}").validate());
    CHECK_THROWS_AS(subprocess_spec("cat").validate(), ConfigError);
    AdapterSpec h;
    h.name = "h";
    h.mode = AdapterMode::http;
    CHECK_THROWS_AS(h.validate(), ConfigError);
    h.endpoint = "http://localhost:1/parse";
    CHECK_NOTHROW(h.validate());
    h.command_template = "x {pdf}";
    CHECK_THROWS_AS(h.validate(), ConfigError);
    AdapterSpec mock;
    mock.name = "m";
    mock.mock_profile.drop_formula_rate = 1.5;
    CHECK_THROWS_AS(mock.validate(), ConfigError);
    CHECK_THROWS_AS(AdapterSpec::from_json({{"name", "x"}, {"mode", "ftp"}}), ConfigError);
    CHECK_THROWS_AS(AdapterSpec::from_json({{"name", "x"}, {"mode", "builtin_mock"}, {"bogus", 1}}), ConfigError);
    auto round = AdapterSpec::from_json(subprocess_spec("tool {pdf} > {out}").to_json());
    CHECK(round.command_template == "tool {pdf} > {out}");
    CHECK(round.timeout.count() == 10);
    CHECK(AdapterSpec::from_json({{"name", "d"}, {"mode", "builtin_mock"}}).timeout == kDefaultParserTimeout);
  }

  TEST_CASE("subprocess adapter") {
    TempDir t;
    const auto pdf = t / "in file.pdf";
    fs::write_file_atomic(pdf, "%PDF-1.4 payload");
    auto m = sample_manifest();

    auto ok = run_parser(subprocess_spec("cat {pdf}"), pdf, m);
    CHECK(ok.output.status == ParseStatus::ok);
    CHECK(ok.output.text == "%PDF-1.4 payload");
    CHECK(ok.output.parser == "sub");
    CHECK(!ok.ledger);

    auto via_file = run_parser(subprocess_spec("cp {pdf} {out}; echo ignored"), pdf, m);
    CHECK(via_file.output.text == "%PDF-1.4 payload");

    auto fail = run_parser(subprocess_spec("echo boom >&2; exit 3 # {pdf}"), pdf, m);
    CHECK(fail.output.status == ParseStatus::error);
    CHECK(fail.output.error_detail.find("boom") != std::string::npos);
    CHECK(fail.output.error_detail.find("3") != std::string::npos);

    auto slow = run_parser(subprocess_spec("sleep 5 # {pdf}", 1), pdf, m);
    CHECK(slow.output.status == ParseStatus::timeout);
    CHECK(slow.output.runtime_ms < 4000);

    auto missing = run_parser(subprocess_spec("cat {pdf}"), t / "nope.pdf", m);
    CHECK(missing.output.status == ParseStatus::error);
    CHECK(fs::read_file(pdf) == "%PDF-1.4 payload");
  }

  TEST_CASE("http adapter") {
    LocalServer srv;
    std::string seen_auth, seen_type;
    srv.server.Post("/raw", [&](const httplib::Request& req, httplib::Response& res) {
      seen_auth = req.get_header_value("Authorization");
      seen_type = req.get_header_value("Content-Type");
      res.set_content("parsed:" + req.body, "text/markdown");
    });
    srv.server.Post("/multi", [&](const httplib::Request& req, httplib::Response& res) {
      if (!req.has_file("document")) {
        res.status = 400;
        return;
      }
      nlohmann::json j{{"markdown", "got " + req.get_file_value("document").content}};
      res.set_content(j.dump(), "application/json");
    });
    srv.server.Post("/fail", [](const httplib::Request&, httplib::Response& res) {
      res.status = 500;
      res.set_content("internal", "text/plain");
    });
    srv.server.Post("/slow", [](const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(2500));
      res.set_content("late", "text/plain");
    });
    srv.start();

    TempDir t;
    const auto pdf = t / "doc.pdf";
    fs::write_file_atomic(pdf, "PDFBYTES");
    auto m = sample_manifest();

    AdapterSpec s;
    s.name = "svc";
    s.mode = AdapterMode::http;
    s.endpoint = srv.url("/raw");
    s.auth_env = "FBENCH_TEST_PARSER_KEY";
    ::unsetenv("FBENCH_TEST_PARSER_KEY");
    CHECK_THROWS_AS(run_parser(s, pdf, m), ConfigError);
    ::setenv("FBENCH_TEST_PARSER_KEY", "k123", 1);
    auto raw = run_parser(s, pdf, m);
    CHECK(raw.output.status == ParseStatus::ok);
    CHECK(raw.output.text == "parsed:PDFBYTES");
    CHECK(seen_auth == "Bearer k123");
    CHECK(seen_type == "application/pdf");

    s.auth_env.clear();
    s.endpoint = srv.url("/multi");
    s.upload = UploadKind::multipart;
    s.multipart_field = "document";
    s.response_field = "markdown";
    auto multi = run_parser(s, pdf, m);
    CHECK(multi.output.status == ParseStatus::ok);
    CHECK(multi.output.text == "got PDFBYTES");

    s.upload = UploadKind::binary;
    s.response_field.clear();
    s.endpoint = srv.url("/fail");
    auto fail = run_parser(s, pdf, m);
    CHECK(fail.output.status == ParseStatus::error);
    CHECK(fail.output.error_detail.find("500") != std::string::npos);

    s.endpoint = srv.url("/slow");
    s.timeout = std::chrono::seconds(1);
    auto slow = run_parser(s, pdf, m);
    CHECK(slow.output.status == ParseStatus::timeout);

    s.endpoint = "http://127.0.0.1:1/none";
    auto refused = run_parser(s, pdf, m);
    CHECK(refused.output.status == ParseStatus::error);
  }

  TEST_CASE("parser runs persist and reload") {
    TempDir t;
    auto m = sample_manifest();
    PerturbationSpec s;
    s.drop_formula_rate = 0.5;
    s.seed = 3;
    auto run = perturb_output(m, s, "mock");
    write_parser_run(t / "mock/doc_0000", run, {{"seed", 3}});
    auto back = read_parser_run(t / "mock/doc_0000");
    REQUIRE(back);
    CHECK(back->output == run.output);
    REQUIRE(back->ledger);
    CHECK(*back->ledger == *run.ledger);
    fs::write_file_atomic(t / "mock/doc_0000/output.md", "tampered");
    CHECK(!read_parser_run(t / "mock/doc_0000"));
    CHECK(!read_parser_run(t / "absent"));
  }
}
