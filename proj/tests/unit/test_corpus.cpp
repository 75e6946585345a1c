#include <doctest.h>

#include <regex>
#include <string>

#include "fbench/corpus.hpp"
#include "fbench/util/fs.hpp"
#include "fbench/util/rng.hpp"

using namespace fbench;
using namespace fbench::corpus;

namespace {

// Independent regex formulation of the atom rules (ASCII inputs only).
std::uint64_t oracle_score(const std::string& s) {
  static const std::regex atom(R"(\\[A-Za-z]+|\\[\s\S]|\\$|[A-Za-z0-9]|[-+*/=<>()\[\]|,;.:!?_^])");
  std::uint64_t n = 0;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), atom); it != std::sregex_iterator(); ++it) ++n;
  return n;
}

std::string random_latex(Rng& rng, std::size_t max_len) {
  static const std::vector<std::string> pieces = {
      "\\alpha", "\\frac", "\\{", "\\}", "\\,", "\\\\", "\\", "{", "}", "x", "y", "Z", "0", "7",
      "+", "-", "=", "<", "(", ")", "[", "]", "|", "^", "_", ",", ".", "!", " ", "&", "'", "~",
      "\\mathbb", "ab", "12", "\\sum_{i=1}^{n}"};
  std::string s;
  auto n = rng.below(max_len + 1);
  for (std::size_t i = 0; i < n; ++i) s += rng.pick(pieces);
  return s;
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("complexity_score hand counts") {
    CHECK(complexity_score("\\alpha") == 1);
    CHECK(complexity_score("x^2 + 1") == 5);
    CHECK(complexity_score("") == 0);
    CHECK(complexity_score("\\frac{a}{b} + c^2 = d_1") == 11);
    CHECK(complexity_score("\\mathbb{R}") == 2);
    CHECK(complexity_score("\\{ x \\}") == 3);
    CHECK(complexity_score("{}{}") == 0);
    CHECK(complexity_score("a ± b") == 3);
  }

  TEST_CASE("complexity_score agrees with regex oracle") {
    Rng rng(11);
    for (int i = 0; i < 2000; ++i) {
      auto s = random_latex(rng, 12);
      CAPTURE(s);
      CHECK(complexity_score(s) == oracle_score(s));
    }
  }

  TEST_CASE("complexity_score additivity and whitespace invariance") {
    Rng rng(12);
    for (int i = 0; i < 1000; ++i) {
      auto a = random_latex(rng, 8), b = random_latex(rng, 8);
      CAPTURE(a);
      CAPTURE(b);
      CHECK(complexity_score(a + " " + b) == complexity_score(a) + complexity_score(b));
      CHECK(complexity_score("  \t" + a + "\n ") == complexity_score(a));
    }
  }

  TEST_CASE("extract_formulas on a hand-written page") {
    const std::string html = R"(<html><body>
<p>Some text <span class="mwe-math-element"><math xmlns="http://www.w3.org/1998/Math/MathML" alttext="{\displaystyle x^{2}+1}">
<semantics><mrow><msup><mi>x</mi><mn>2</mn></msup><mo>+</mo><mn>1</mn></mrow>
<annotation encoding="application/x-tex">{\displaystyle x^{2}+1}</annotation></semantics></math></span></p>
<p>no math here</p>
</body></html>)";
    auto res = extract_formulas(html, "page");
    REQUIRE(res.records.size() == 1);
    CHECK(res.records[0].latex == "x^{2}+1");
    CHECK(res.records[0].source_id == "page");
    CHECK(res.records[0].complexity == 5);
    CHECK(res.skipped == 0);
  }

  TEST_CASE("extract_formulas edge cases") {
    CHECK(extract_formulas("<html><p>plain</p></html>", "p").records.empty());

    const std::string twice =
        R"(<math><annotation encoding="application/x-tex">a+b=c</annotation></math>)"
        R"(<MATH alttext="a+b=c"></MATH>)";
    auto res = extract_formulas(twice, "p");
    REQUIRE(res.records.size() == 2);
    CHECK(res.records[0].latex == res.records[1].latex);

    auto entities = extract_formulas(
        R"(<math><annotation encoding="application/x-tex">{\displaystyle a&lt;b \&amp; c&#x3E;d}</annotation></math>)",
        "p");
    REQUIRE(entities.records.size() == 1);
    CHECK(entities.records[0].latex == "a<b \\& c>d");

    auto broken = extract_formulas(
        R"(<math><annotation encoding="application/x-tex">x</annotation> <math alttext="y+z"></math> <math>)",
        "p");
    CHECK(broken.skipped == 2);
    REQUIRE(broken.records.size() == 1);
    CHECK(broken.records[0].latex == "y+z");

    CHECK(extract_formulas(R"(<math><mi>x</mi></math>)", "p").skipped == 1);
  }

  TEST_CASE("strip_displaystyle only strips one full wrapper") {
    CHECK(strip_displaystyle("{\\displaystyle x}") == "x");
    CHECK(strip_displaystyle("{\\displaystyle {\\displaystyle x}}") == "{\\displaystyle x}");
    CHECK(strip_displaystyle("{\\displaystyle a}+{b}") == "{\\displaystyle a}+{b}");
    CHECK(strip_displaystyle("  x^2 ") == "x^2");
    CHECK(strip_displaystyle("{\\displaystyle \\}}") == "\\}");
  }

  TEST_CASE("filter_corpus threshold, dedup, idempotence") {
    std::vector<FormulaRecord> recs;
    for (auto s : {"\\alpha", "x^2 + 1", "\\mathbb{R}"}) recs.push_back(make_record(s, "t"));
    CHECK(filter_corpus(recs, 8).records.empty());

    auto a = make_record("\\frac{a}{b} + c^2 = d_1", "p1");
    auto b = make_record("  \\frac{a}{b} + c^2 = d_1 ", "p2");
    auto c = make_record("\\frac{a}{b}+c^2=d_1", "p3");
    auto out = filter_corpus({a, b, c}, 8);
    REQUIRE(out.records.size() == 2);
    CHECK(out.records[0].source_id == "p1");
    CHECK(out.records[1].source_id == "p3");
    CHECK(filter_corpus(out.records, 8) == out);

    std::vector<FormulaRecord> distinct;
    for (auto s : {"a", "b+c", "\\beta"}) distinct.push_back(make_record(s, "t"));
    CHECK(filter_corpus(distinct, 0).records.size() == 3);
    CHECK_THROWS(filter_corpus(distinct, -1));
  }

  TEST_CASE("corpus file round trip and validation") {
    auto c = filter_corpus({make_record("\\frac{a}{b} + c^2 = d_1", "p"),
                            make_record("\\int_0^1 f(x)\\,dx = F", "q")},
                           8);
    auto text = serialize_corpus(c);
    CHECK(parse_corpus(text) == c);
    CHECK(text.substr(0, text.find('\n')).find("\"count\":2") != std::string::npos);

    auto tampered = text;
    tampered.replace(tampered.find("\"complexity\":11"), 15, "\"complexity\":12");
    CHECK_THROWS(parse_corpus(tampered));
    CHECK_THROWS(parse_corpus(text.substr(text.find('\n') + 1)));
  }

  TEST_CASE("extract_from_source reads directories and tar archives") {
    auto dir = fs::make_temp_dir("fbench_corpus_");
    fs::write_file_atomic(dir / "b.html", R"(<math alttext="{\displaystyle b+b=c}"></math>)");
    fs::write_file_atomic(dir / "a.html", R"(<math alttext="{\displaystyle a+a=c}"></math>)");
    fs::write_file_atomic(dir / "notes.txt", R"(<math alttext="z"></math>)");
    auto res = extract_from_source(dir);
    REQUIRE(res.records.size() == 2);
    CHECK(res.records[0].source_id == "a");
    CHECK(res.pages == 2);

    auto tar = dir / "pages.tar.gz";
    REQUIRE(std::system(("cd " + dir.string() + " && tar czf pages.tar.gz a.html b.html").c_str()) == 0);
    auto from_tar = extract_from_source(tar);
    CHECK(from_tar.records == res.records);
    std::filesystem::remove_all(dir);
  }
}
