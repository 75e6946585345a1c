#include <doctest.h>

#include <cmath>

#include "fbench/metrics/text_metrics.hpp"
#include "fbench/util/rng.hpp"
#include "oracles/oracles.hpp"

using namespace fbench;
using namespace fbench::metrics;

namespace {

std::string random_ascii(Rng& rng, std::size_t max_len, const std::string& alphabet) {
  std::string s;
  auto n = rng.below(max_len + 1);
  for (std::size_t i = 0; i < n; ++i) s += alphabet[rng.below(alphabet.size())];
  return s;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("levenshtein examples") {
    CHECK(levenshtein("abc", "abc") == 0);
    CHECK(levenshtein("abc", "abd") == 1);
    CHECK(levenshtein("", "xyz") == 3);
    CHECK(levenshtein("kitten", "sitting") == 3);
    CHECK(levenshtein("α", "β") == 1);
  }

  TEST_CASE("levenshtein matches full-matrix oracle") {
    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
      auto a = random_ascii(rng, 40, "abcd\\{}");
      auto b = random_ascii(rng, 40, "abcd\\{}");
      CHECK(levenshtein(a, b) == oracle::levenshtein(a, b));
    }
  }

  TEST_CASE("lev_similarity") {
    CHECK(lev_similarity("abc", "abc") == 1.0);
    CHECK(lev_similarity("abc", "abd") == doctest::Approx(2.0 / 3.0));
    CHECK(lev_similarity("", "") == 1.0);
    CHECK(lev_similarity("", "ab") == 0.0);
    Rng rng(6);
    for (int i = 0; i < 300; ++i) {
      auto a = random_ascii(rng, 12, "ab"), b = random_ascii(rng, 12, "ab");
      double s = lev_similarity(a, b);
      CHECK(s == lev_similarity(b, a));
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
      CHECK((s == 1.0) == (a == b));
    }
  }

  TEST_CASE("tokenize_latex") {
    using V = std::vector<std::string>;
    CHECK(tokenize_latex("\\frac{a}{b}") == V{"\\frac", "{", "a", "}", "{", "b", "}"});
    CHECK(tokenize_latex("x^2") == V{"x", "^", "2"});
    CHECK(tokenize_latex("").empty());
    CHECK(tokenize_latex("x_{12} \\, + \\{y\\}") ==
          V{"x", "_", "{", "12", "}", "\\,", "+", "\\{", "y", "\\}"});
    CHECK(tokenize_latex("ab  c") == V{"a", "b", "c"});
    CHECK(tokenize_latex("α≤") == V{"α", "≤"});
  }

  TEST_CASE("tokenize round trip is a fixed point") {
    Rng rng(7);
    for (int i = 0; i < 500; ++i) {
      auto s = random_ascii(rng, 30, "ab12 \\{}^_+=,");
      auto t = tokenize_latex(s);
      CHECK(tokenize_latex(detokenize(t)) == t);
    }
  }

  TEST_CASE("bleu_latex") {
    CHECK(bleu_latex("\\frac{a}{b}", "\\frac{a}{b}") == doctest::Approx(1.0));
    CHECK(bleu_latex("", "x") == 0.0);
    CHECK(bleu_latex("a + b", "") == 0.0);
    CHECK(bleu_latex("1 2 3", "x y z") == 0.0);
    // p1 = 2/3, p2 = (1+1)/(2+1), p3 = (0+1)/(1+1), p4 = (0+1)/(0+1), BP = 1.
    CHECK(bleu_latex("a + b", "a + c") == doctest::Approx(std::pow(2.0 / 3 * 2.0 / 3 * 0.5, 0.25)));
    // Shorter candidate: c = 2, r = 3, p1 = 1, p2 = 2/2, p3 = 1, p4 = 1.
    CHECK(bleu_latex("a +", "a + c") == doctest::Approx(std::exp(1.0 - 3.0 / 2.0)));
  }
}
