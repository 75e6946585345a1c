#include <doctest.h>

#include <algorithm>

#include "fbench/matching/fuzzy.hpp"
#include "fbench/util/rng.hpp"
#include "oracles/oracles.hpp"

using namespace fbench;
using namespace fbench::matching;

namespace {

std::string random_text(Rng& rng, std::size_t max_len, const std::string& alphabet) {
  std::string s;
  auto n = rng.below(max_len + 1);
  for (std::size_t i = 0; i < n; ++i) s += alphabet[rng.below(alphabet.size())];
  return s;
}

}  // namespace

TEST_SUITE("matching") {
  TEST_CASE("normalize") {
    CHECK(normalize("a + b") == "a+b");
    CHECK(normalize("\\frac{1}{2}") == "frac{1}{2}");
    CHECK(normalize("") == "");
    CHECK(normalize("x\u00a0y\u2003z\n") == "xyz");
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
      auto s = random_text(rng, 20, "ab \\{}\t");
      CHECK(normalize(normalize(s)) == normalize(s));
    }
  }

  TEST_CASE("fuzzy_locate examples") {
    const std::string hay = "It holds that E=mc^2 today";
    auto r = fuzzy_locate("E = mc^2", hay, 0.15);
    REQUIRE(r);
    CHECK(r->edit_ratio == 0.0);
    CHECK(hay.substr(r->span.begin, r->span.end - r->span.begin) == "E=mc^2");

    auto same = fuzzy_locate("x+y", "x+y", 0.15);
    REQUIRE(same);
    CHECK(same->span == Span{0, 3});
    CHECK(same->exact_raw);

    auto sub = fuzzy_locate("abcdefghij", "xxabcdefghiyxx", 0.15);
    REQUIRE(sub);
    CHECK(sub->edit_ratio == doctest::Approx(0.1));
    CHECK(sub->distance == 1);
    CHECK_FALSE(fuzzy_locate("abcdefghij", "xxabcdefghiyxx", 0.05));
    CHECK_THROWS(fuzzy_locate("  ", "abc", 0.15));
  }

  TEST_CASE("fuzzy_locate maps spans back through backslashes and unicode") {
    const std::string hay = "prefix é \\alpha + \\beta_{1} suffix";
    auto r = fuzzy_locate("\\alpha+\\beta_{1}", hay, 0.15);
    REQUIRE(r);
    CHECK(hay.substr(r->span.begin, r->span.end - r->span.begin) == "\\alpha + \\beta_{1}");
    auto stripped = fuzzy_locate("\\alpha+\\beta_{1}", "α is alpha+beta_{1}", 0.15);
    REQUIRE(stripped);
    CHECK(stripped->edit_ratio == 0.0);
  }

  TEST_CASE("blocked spans are skipped") {
    const std::string hay = "a+b=c and a+b=c";
    auto first = fuzzy_locate("a+b=c", hay);
    REQUIRE(first);
    CHECK(first->span.begin == 0);
    auto second = fuzzy_locate("a+b=c", hay, 0.15, {first->span});
    REQUIRE(second);
    CHECK(second->span.begin == 10);
    CHECK_FALSE(fuzzy_locate("a+b=c", hay, 0.15, {first->span, second->span}));
  }

  TEST_CASE("best window ratio matches a brute-force oracle") {
    Rng rng(21);
    for (int it = 0; it < 300; ++it) {
      auto needle = random_text(rng, 12, "abcd");
      if (needle.empty()) needle = "a";
      auto hay = random_text(rng, 30, "abcd") + "e";
      auto r = best_window(needle, hay);
      REQUIRE(r);
      std::size_t n = needle.size();
      std::size_t lo = 1;
      std::size_t hi = std::clamp<std::size_t>(n + n / 5, 1, hay.size());
      double best = 1e9;
      for (std::size_t s = 0; s < hay.size(); ++s)
        for (std::size_t len = lo; len <= hi && s + len <= hay.size(); ++len) {
          double ratio = static_cast<double>(oracle::levenshtein(needle, hay.substr(s, len))) /
                         static_cast<double>(std::max(n, len));
          best = std::min(best, ratio);
        }
      if (hay.find(needle) != std::string::npos) best = 0.0;
      CAPTURE(needle);
      CAPTURE(hay);
      CHECK(r->edit_ratio == doctest::Approx(best));
    }
  }

  TEST_CASE("suffix and threshold monotonicity") {
    Rng rng(22);
    for (int it = 0; it < 300; ++it) {
      auto needle = random_text(rng, 10, "ab\\ c");
      if (normalize(needle).empty()) needle = "ab";
      auto hay = random_text(rng, 25, "ab\\ c") + "c";
      auto suffix = random_text(rng, 10, "ab\\ c");
      auto r1 = best_window(needle, hay);
      auto r2 = best_window(needle, hay + suffix);
      if (r1) {
        REQUIRE(r2);
        CHECK(r2->edit_ratio <= r1->edit_ratio);
      }
      bool found_low = fuzzy_locate(needle, hay, 0.1).has_value();
      bool found_high = fuzzy_locate(needle, hay, 0.3).has_value();
      CHECK((!found_low || found_high));
    }
  }

  TEST_CASE("split_grouped") {
    auto r = split_grouped("x^2+1 \\\\ \\frac{a}{b}", {"x^2+1", "\\frac{a}{b}"});
    REQUIRE(r.segments.size() == 2);
    CHECK(r.segments[0] == "x^2+1 \\\\");
    CHECK(r.segments[1] == "\\frac{a}{b}");
    CHECK_FALSE(r.degenerate);
    CHECK(normalize(r.segments[0]) == normalize("x^2+1"));

    auto comma = split_grouped("a=1, b=2; c=3", {"a=1", "b=2", "c=3"});
    CHECK(comma.segments == std::vector<std::string>{"a=1,", "b=2;", "c=3"});

    auto tight = split_grouped("ab", {"abc", "def", "ghi"});
    REQUIRE(tight.segments.size() == 3);
    CHECK(tight.degenerate);
    CHECK(tight.segments.back().empty());

    CHECK_THROWS(split_grouped("abc", {"abc"}));
  }

  TEST_CASE("split_grouped recovers random concatenations") {
    Rng rng(23);
    for (int it = 0; it < 100; ++it) {
      std::vector<std::string> parts;
      auto k = 2 + rng.below(3);
      std::string merged;
      for (std::size_t i = 0; i < k; ++i) {
        std::string p = "\\" + std::string(1, "abc"[rng.below(3)]) + random_text(rng, 6, "xyz123") + "{q" + std::to_string(i) + "}";
        parts.push_back(p);
        if (i) merged += " \\\\ ";
        merged += p;
      }
      auto r = split_grouped(merged, parts);
      REQUIRE(r.segments.size() == k);
      for (std::size_t i = 0; i < k; ++i) CHECK(normalize(r.segments[i]) == normalize(parts[i]));
    }
  }
}
