#include <doctest.h>

#include <httplib.h>

#include <set>
#include <thread>

#include "fbench/errors.hpp"
#include "fbench/study/design.hpp"
#include "fbench/study/render.hpp"
#include "fbench/study/server.hpp"
#include "fbench/study/store.hpp"
#include "fbench/util/rng.hpp"
#include "support/support.hpp"

using namespace fbench;
using namespace fbench::study;
using fbench::testing::TempDir;
using nlohmann::json;

namespace {

CandidatePair candidate(std::size_t i, std::optional<double> cdm, std::optional<double> judge,
                        std::optional<std::string> extracted = std::string("y")) {
  return CandidatePair{{"mock", "doc_" + std::to_string(i / 10), i % 10}, "x_{" + std::to_string(i) + "}", extracted, cdm,
                       judge};
}

std::vector<std::string> ids(std::size_t n, const std::string& prefix = "p") {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

// Independent recount of both marginals and per-rater distinctness.
bool design_ok(const std::vector<Assignment>& d, const std::vector<std::string>& pairs, std::size_t rpp,
               std::size_t ppr) {
  std::map<std::string, std::size_t> count;
  for (const auto& a : d) {
    if (a.pair_ids.size() != ppr) return false;
    if (std::set<std::string>(a.pair_ids.begin(), a.pair_ids.end()).size() != ppr) return false;
    for (const auto& p : a.pair_ids) ++count[p];
  }
  if (count.size() != pairs.size()) return false;
  for (const auto& p : pairs)
    if (count[p] != rpp) return false;
  return true;
}

std::function<std::string()> fixed_clock() {
  return [] { return std::string("2026-01-01T00:00:00Z"); };
}

// Writes a small study directory with placeholder images.
std::vector<StudyPair> seed_study(const StudyPaths& paths, std::size_t n_pairs, std::size_t n_raters, std::size_t rpp,
                                  std::size_t ppr) {
  std::vector<CandidatePair> cands;
  for (std::size_t i = 0; i < n_pairs; ++i) cands.push_back(candidate(i, 0.5, 7.0));
  auto pairs = select_challenge_pairs(cands, n_pairs, 1);
  std::vector<std::string> pids;
  for (const auto& p : pairs) {
    pids.push_back(p.pair_id);
    fs::write_file_atomic(paths.images() / p.gt_image, placeholder_png());
    fs::write_file_atomic(paths.images() / p.extracted_image, placeholder_png());
  }
  write_pairs(paths.pairs(), pairs);
  write_assignments(paths.assignments(), build_assignments(pids, rater_ids(n_raters), rpp, ppr, 9));
  return pairs;
}

}  // namespace

TEST_SUITE("study") {
  TEST_CASE("challenge selection excludes only doubly perfect pairs") {
    std::vector<CandidatePair> c = {candidate(0, 1.0, 10.0), candidate(1, 1.0, 9.0), candidate(2, 0.9, 10.0),
                                    candidate(3, std::nullopt, 10.0), candidate(4, 0.2, 3.0, std::nullopt)};
    auto s = select_challenge_pairs(c, 100, 1);
    REQUIRE(s.size() == 3);
    CHECK(s[0].source.gt_index == 1);
    CHECK(s[1].source.gt_index == 2);
    CHECK(s[2].source.gt_index == 3);
    CHECK(s[0].pair_id == pair_id_for(s[0].source));
    CHECK(s[0].gt_image == s[0].pair_id + "_gt.png");
  }

  TEST_CASE("challenge selection caps by seeded sampling") {
    std::vector<CandidatePair> c;
    for (std::size_t i = 0; i < 400; ++i) c.push_back(candidate(i, 0.5, 6.0));
    auto a = select_challenge_pairs(c, 250, 42);
    auto b = select_challenge_pairs(c, 250, 42);
    auto other = select_challenge_pairs(c, 250, 43);
    CHECK(a.size() == 250);
    CHECK(a == b);
    CHECK(a != other);
    std::set<std::string> unique;
    for (const auto& p : a) unique.insert(p.pair_id);
    CHECK(unique.size() == 250);
  }

  TEST_CASE("assignment design examples") {
    auto pairs = ids(250);
    auto raters = rater_ids(30);
    auto d = build_assignments(pairs, raters, 3, 25, 7);
    CHECK(d.size() == 30);
    CHECK(design_ok(d, pairs, 3, 25));
    CHECK(check_design(d, pairs, 3, 25).empty());
    CHECK(build_assignments(pairs, raters, 3, 25, 7) == d);
    CHECK(build_assignments(pairs, raters, 3, 25, 8) != d);

    auto single = build_assignments({"only"}, {"r"}, 1, 1, 1);
    REQUIRE(single.size() == 1);
    CHECK(single[0].pair_ids == std::vector<std::string>{"only"});

    auto small = build_assignments(ids(10), rater_ids(6), 3, 5, 3);
    CHECK(design_ok(small, ids(10), 3, 5));
  }

  TEST_CASE("infeasible designs raise the balance error") {
    CHECK_THROWS_AS(build_assignments(ids(250), rater_ids(30), 3, 24, 1), BalanceError);
    CHECK_THROWS_AS(build_assignments(ids(10), rater_ids(7), 3, 5, 1), BalanceError);
    CHECK_THROWS_AS(build_assignments(ids(1), rater_ids(2), 1, 1, 1), BalanceError);
    CHECK_THROWS_AS(build_assignments(ids(4), rater_ids(1), 2, 8, 1), BalanceError);
    CHECK_THROWS_AS(build_assignments({}, {}, 3, 25, 1), BalanceError);
    CHECK_THROWS_AS(build_assignments({"a", "a"}, rater_ids(2), 1, 1, 1), BalanceError);
  }

  TEST_CASE("balanced designs over random feasible sizes") {
    Rng rng(2024);
    for (int t = 0; t < 300; ++t) {
      const std::size_t raters = 1 + rng.below(12);
      const std::size_t rpp = 1 + rng.below(raters);
      const std::size_t ppr_unit = raters / std::gcd(raters, rpp);
      const std::size_t pairs = ppr_unit * (1 + rng.below(6));
      const std::size_t ppr = pairs * rpp / raters;
      if (ppr > pairs) continue;
      auto d = build_assignments(ids(pairs), rater_ids(raters), rpp, ppr, rng.next());
      CHECK(design_ok(d, ids(pairs), rpp, ppr));
      std::size_t total = 0;
      for (const auto& a : d) total += a.pair_ids.size();
      CHECK(total == pairs * rpp);
    }
  }

  TEST_CASE("aggregate human means") {
    std::vector<HumanRating> r = {{"a", "p1", 9, ""}, {"b", "p1", 10, ""}, {"c", "p1", 8, ""}, {"a", "p2", 4, ""}};
    auto m = aggregate_human(r, 3);
    CHECK(m.at("p1").mean == 9.0);
    CHECK(!m.at("p1").incomplete);
    CHECK(m.at("p2").mean == 4.0);
    CHECK(m.at("p2").incomplete);
    CHECK(!m.count("p3"));
  }

  TEST_CASE("rating store accepts, rejects and deduplicates") {
    TempDir dir;
    std::vector<Assignment> a = {{"r1", {"p1", "p2"}}, {"r2", {"p2", "p3"}}};
    RatingStore store(dir.path(), a, 50, fixed_clock());
    CHECK(store.record_rating("r1", "p1", json(7)).ok());
    auto dup = store.record_rating("r1", "p1", json(7));
    CHECK(dup.ok());
    CHECK(dup.duplicate);
    CHECK(store.ratings().size() == 1);
    CHECK(store.record_rating("r1", "p1", json(6)).error == RatingError::already_rated);
    CHECK(store.record_rating("r1", "p2", json(11)).error == RatingError::out_of_scale);
    CHECK(store.record_rating("r1", "p2", json(-1)).error == RatingError::out_of_scale);
    CHECK(store.record_rating("r1", "p2", json(7.5)).error == RatingError::out_of_scale);
    CHECK(store.record_rating("r1", "p3", json(5)).error == RatingError::unassigned_pair);
    CHECK(store.record_rating("nobody", "p1", json(5)).error == RatingError::unknown_rater);
    CHECK(store.record_rating("r1", "p2", json(8.0)).ok());
    CHECK(store.pending("r1").empty());
    CHECK(store.pending("r2") == std::vector<std::string>{"p2", "p3"});
    CHECK(store.rater_progress().at("r1").done == 2);
    CHECK(store.pair_progress().at("p2").total == 2);
    CHECK(text::split(fs::read_file(store.log_path()), '\n').size() == 3);  // two lines plus trailing empty
  }

  TEST_CASE("rating store survives restarts and torn writes") {
    TempDir dir;
    std::vector<Assignment> a = {{"r1", ids(10)}};
    {
      RatingStore store(dir.path(), a, 4, fixed_clock());
      for (int i = 0; i < 6; ++i) REQUIRE(store.record_rating("r1", "p" + std::to_string(i), json(i)).ok());
      CHECK(std::filesystem::exists(store.snapshot_path()));
      CHECK(fs::read_json(store.snapshot_path())["log_lines"] == 4);
    }
    {
      std::ofstream(dir / "ratings.jsonl", std::ios::app) << "{\"rater_id\": \"r1\", \"pai";
      RatingStore store(dir.path(), a, 4, fixed_clock());
      auto r = store.ratings();
      REQUIRE(r.size() == 6);
      for (int i = 0; i < 6; ++i) CHECK(r[i].score == i);
    }
    std::filesystem::remove(dir / "ratings.snapshot.json");
    RatingStore replay(dir.path(), a, 4, fixed_clock());
    CHECK(replay.ratings().size() == 6);
  }

  TEST_CASE("concurrent raters: progress equals stored ratings") {
    TempDir dir;
    auto raters = rater_ids(8);
    auto d = build_assignments(ids(16), raters, 4, 8, 5);
    RatingStore store(dir.path(), d, 7, fixed_clock());
    std::vector<std::thread> threads;
    for (const auto& a : d)
      threads.emplace_back([&store, a] {
        for (const auto& p : a.pair_ids) {
          store.record_rating(a.rater_id, p, json(5));
          store.record_rating(a.rater_id, p, json(5));
          auto v = store.view();
          std::size_t sum = 0;
          for (const auto& [_, n] : v->per_rater) sum += n;
          CHECK(sum == v->ratings.size());
        }
      });
    for (auto& t : threads) t.join();
    CHECK(store.ratings().size() == 64);
    RatingStore reread(dir.path(), d, 7, fixed_clock());
    CHECK(reread.ratings().size() == 64);
  }

  TEST_CASE("placeholder image is a deterministic PNG") {
    const auto a = placeholder_png();
    CHECK(a.substr(0, 8) == std::string("\x89PNG\r\n\x1a\n", 8));
    CHECK(a == placeholder_png());
    CHECK_THROWS(encode_png(2, 2, std::vector<unsigned char>(5)));
  }

  TEST_CASE("render falls back to the placeholder without a converter") {
    TempDir dir;
    fbench::testing::FakeCompiler compiler;
    auto out = render_formula_png("x", compiler, std::nullopt, dir / "x.png");
    CHECK(!out.rendered);
    CHECK(fs::read_file(dir / "x.png") == placeholder_png());
    CHECK(!render_formula_png("  ", compiler, ImageConverter{"true"}, dir / "e.png").rendered);
  }

  TEST_CASE("render pair images with the real compiler" *
            doctest::skip(!fbench::testing::have_pdflatex() || fbench::testing::pdf2png_command().empty())) {
    TempDir dir;
    synthdoc::PdfLatexCompiler compiler(fbench::testing::real_pdflatex());
    ImageConverter conv{fbench::testing::pdf2png_command()};
    StudyPair good{"g", "\\frac{a}{b}", "\\frac{a}{b}", "g_gt.png", "g_ext.png", {}, {}, {}};
    auto r = render_pair_images(good, compiler, conv, dir.path());
    CHECK(r.gt.rendered);
    CHECK(r.extracted.rendered);
    const auto img = fs::read_file(dir / "g_gt.png");
    CHECK(img.substr(1, 3) == "PNG");
    CHECK(img == fs::read_file(dir / "g_ext.png"));
    CHECK(img != placeholder_png());

    StudyPair bad{"b", "x^2", "\\frac{a}", "b_gt.png", "b_ext.png", {}, {}, {}};
    auto rb = render_pair_images(bad, compiler, conv, dir.path());
    CHECK(rb.gt.rendered);
    CHECK(!rb.extracted.rendered);
    CHECK(fs::read_file(dir / "b_ext.png") == placeholder_png());
  }

  TEST_CASE("HTTP API") {
    TempDir dir;
    StudyPaths paths{dir.path()};
    auto pairs = seed_study(paths, 6, 3, 2, 4);
    StudyServer server(paths, 2);
    const int port = server.start();
    httplib::Client cli("127.0.0.1", port);

    auto progress = json::parse(cli.Get("/api/progress")->body);
    CHECK(progress["total_ratings"] == 0);
    CHECK(progress["expected_ratings"] == 12);

    auto a = cli.Get("/api/assignment/rater_01");
    REQUIRE(a);
    CHECK(a->status == 200);
    auto aj = json::parse(a->body);
    REQUIRE(aj["pending"].size() == 4);
    const std::string first = aj["pending"][0];
    CHECK(cli.Get("/api/assignment/ghost")->status == 404);

    auto p = cli.Get("/api/pair/" + first);
    REQUIRE(p->status == 200);
    auto pj = json::parse(p->body);
    CHECK(pj["gt_image_url"] == "/img/" + first + "_gt.png");
    CHECK(!pj.contains("judge"));
    auto img = cli.Get(pj["gt_image_url"].get<std::string>());
    CHECK(img->status == 200);
    CHECK(img->body == placeholder_png());
    CHECK(cli.Get("/img/..%2Fpairs.json")->status == 404);
    CHECK(cli.Get("/api/pair/nope")->status == 404);

    const json body{{"rater_id", "rater_01"}, {"pair_id", first}, {"score", 8}};
    auto ok = cli.Post("/api/rating", body.dump(), "application/json");
    CHECK(ok->status == 200);
    CHECK(json::parse(ok->body)["duplicate"] == false);
    auto again = cli.Post("/api/rating", body.dump(), "application/json");
    CHECK(json::parse(again->body)["duplicate"] == true);
    auto changed = cli.Post("/api/rating", json{{"rater_id", "rater_01"}, {"pair_id", first}, {"score", 3}}.dump(),
                            "application/json");
    CHECK(changed->status == 409);
    auto bad = cli.Post("/api/rating", json{{"rater_id", "rater_01"}, {"pair_id", first}, {"score", 11}}.dump(),
                        "application/json");
    CHECK(bad->status == 400);
    CHECK(json::parse(bad->body)["error"]["code"] == "out_of_scale");
    CHECK(cli.Post("/api/rating", "not json", "application/json")->status == 400);
    std::string foreign;
    for (const auto& pr : pairs)
      if (std::find(aj["pair_ids"].begin(), aj["pair_ids"].end(), pr.pair_id) == aj["pair_ids"].end())
        foreign = pr.pair_id;
    REQUIRE(!foreign.empty());
    auto unassigned = cli.Post("/api/rating", json{{"rater_id", "rater_01"}, {"pair_id", foreign}, {"score", 5}}.dump(),
                               "application/json");
    CHECK(unassigned->status == 403);

    progress = json::parse(cli.Get("/api/progress")->body);
    CHECK(progress["total_ratings"] == 1);
    CHECK(progress["raters"]["rater_01"]["done"] == 1);
    CHECK(json::parse(cli.Get("/api/assignment/rater_01")->body)["pending"].size() == 3);

    auto exp = cli.Get("/api/export");
    auto rows = parse_export(exp->body);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].rating.score == 8);
    CHECK(rows[0].source.parser == "mock");
    server.stop();
  }

  TEST_CASE("server refuses to start without images") {
    TempDir dir;
    StudyPaths paths{dir.path()};
    auto pairs = seed_study(paths, 2, 2, 1, 1);
    std::filesystem::remove(paths.images() / pairs[0].gt_image);
    CHECK_THROWS_AS(StudyServer(paths, 1), PreconditionError);
  }
}
