#include <doctest.h>

#include <set>

#include "fbench/errors.hpp"
#include "fbench/synthdoc/document.hpp"
#include "support/support.hpp"

using namespace fbench;
using namespace fbench::synthdoc;
using fbench::testing::FakeCompiler;
using fbench::testing::TempDir;

namespace {

corpus::Corpus small_corpus() {
  std::vector<corpus::FormulaRecord> recs;
  for (int i = 0; i < 60; ++i) {
    std::string f = "a_{" + std::to_string(i) + "} + b_{" + std::to_string(i) + "} = c^{2} + d";
    if (i % 3 == 0) f = "\\frac{x_{" + std::to_string(i) + "}}{y+z} = w_{k}";
    recs.push_back(corpus::make_record(f, "t"));
  }
  return corpus::filter_corpus(recs, 8);
}

const auto kNeedsTex = doctest::skip(!fbench::testing::have_pdflatex());

}  // namespace

TEST_SUITE("synthdoc") {
  TEST_CASE("layout sampling is deterministic and in range") {
    Rng a(42), b(42);
    CHECK(sample_layout(a) == sample_layout(b));
    Rng r(7);
    int one = 0, two = 0;
    std::set<int> sizes;
    std::set<std::string> classes, fonts;
    for (int i = 0; i < 1000; ++i) {
      auto l = sample_layout(r);
      CHECK(within_ranges(l));
      (l.columns == 1 ? one : two)++;
      sizes.insert(l.font_size_pt);
      classes.insert(to_string(l.document_class));
      fonts.insert(to_string(l.font_family));
    }
    CHECK(one >= 100);
    CHECK(two >= 100);
    CHECK(sizes == std::set<int>{10, 11, 12});
    CHECK(classes.size() == 3);
    CHECK(fonts.size() == 4);
  }

  TEST_CASE("layout json round trip") {
    Rng r(3);
    auto l = sample_layout(r);
    CHECK(layout_from_json(to_json(l)) == l);
  }

  TEST_CASE("preamble reflects layout") {
    LayoutConfig l;
    l.document_class = DocumentClass::report;
    l.columns = 2;
    l.column_sep_pt = 12;
    l.font_size_pt = 11;
    l.line_spacing = 1.25;
    l.font_family = FontFamily::cm_sans;
    auto p = render_preamble(l);
    CHECK(p.find("\\documentclass[11pt,twocolumn]{report}") != std::string::npos);
    CHECK(p.find("\\linespread{1.25}") != std::string::npos);
    CHECK(p.find("\\setlength{\\columnsep}{12pt}") != std::string::npos);
    CHECK(p.find("\\sfdefault") != std::string::npos);
    CHECK(text::ends_with(p, "\\begin{document}\n"));
  }

  TEST_CASE("sentences come from the lexicon") {
    for (auto lang : kLanguages) {
      CHECK(lexicon(lang).size() >= 500);
      Rng r(1);
      auto s = generate_sentence(r, lang);
      CHECK(!s.empty());
      CHECK(std::string(".?!").find(s.back()) != std::string::npos);
    }
    Rng a(9), b(9);
    CHECK(generate_sentences(a, Language::fr, 5) == generate_sentences(b, Language::fr, 5));
    CHECK(escape_tex_text("50% & $x_1$") == "50\\% \\& \\$x\\_1\\$");
  }

  TEST_CASE("log parsing") {
    const std::string log =
        "Overfull \\hbox (3.2pt too wide) in paragraph at lines 5--6\n"
        "Overfull \\hbox (12.5pt too wide) in paragraph at lines 8--9\n"
        "Missing character: There is no ^^A in font cmr10!\n"
        "Output written on doc.pdf (2 pages, 1234 bytes).\n";
    auto r = parse_log(log, true);
    CHECK(r.success);
    CHECK(r.page_count == 2);
    CHECK(r.overfull_hbox_max_pt == doctest::Approx(12.5));
    CHECK(!r.overfull_vbox);
    CHECK(r.significant_warnings.size() == 2);
    CHECK(!is_clean(r));

    auto v = parse_log("Overfull \\vbox (1.0pt too high) has occurred while \\output is active\n"
                       "Output written on doc.pdf (1 page, 10 bytes).\n",
                       true);
    CHECK(v.overfull_vbox);
    CHECK(!is_clean(v));

    auto none = parse_log("No pages of output.\n", false);
    CHECK(!none.success);
    CHECK(none.page_count == 0);

    auto clean = parse_log("Overfull \\hbox (9.9pt too wide) in paragraph\nOutput written on doc.pdf (1 page, 5 bytes).\n", true);
    CHECK(is_clean(clean));
    CHECK(clean.overfull_hbox_max_pt > 0);
  }

  TEST_CASE("wrapped log lines are joined") {
    std::string first(79, 'x');
    first.replace(0, 25, "Output written on /a/long");
    auto log = first + "\n/path/doc.pdf (1 page, 99 bytes).\n";
    auto r = parse_log(log, true);
    CHECK(r.page_count == 1);
    CHECK(r.success);
  }

  TEST_CASE("probe document and log") {
    LayoutConfig l;
    auto src = render_probe(l, {"x", "y^2"});
    CHECK(src.find("\\hbox{$x$}") != std::string::npos);
    CHECK(src.find("FBPROBE:1:") != std::string::npos);
    auto m = parse_probe_log("FBPROBE:0:6.83331pt\nfoo\nFBPROBE:1:12.0pt\n");
    CHECK(m.size() == 2);
    CHECK(m[0] == doctest::Approx(6.83331));
  }

  TEST_CASE("probe batches fall back to single compiles on error") {
    FakeCompiler fc;
    TempDir t;
    InlineProbe probe(fc, t.path());
    LayoutConfig l;
    auto h = probe.measure({"x", "\\frac{a}{b}", "\\bad", "y"}, l);
    REQUIRE(h.size() == 4);
    CHECK(h[0] == doctest::Approx(6.5));
    CHECK(h[1] == doctest::Approx(14.0));
    CHECK(!h[2]);
    CHECK(h[3] == doctest::Approx(6.5));
    const int runs = fc.runs;
    CHECK(runs == 5);  // batch, two halves, two singles
    probe.measure(std::vector<std::string>{"x", "y"}, l);
    CHECK(fc.runs == runs);  // cached
  }

  TEST_CASE("block kinds satisfy their invariants") {
    FakeCompiler fc;
    TempDir t;
    InlineProbe probe(fc, t.path());
    auto c = small_corpus();
    FormulaPool pool(c);
    LayoutConfig l;
    GeneratorConfig cfg;
    InlineSelector sel(pool, probe, l, Rng(2), cfg.inline_max_pt);
    Rng r(11);
    std::set<BlockKind> kinds;
    for (int i = 0; i < 30; ++i) {
      auto b = next_block(r, pool, sel, cfg);
      kinds.insert(b.kind);
      CHECK(block_invariants_hold(b));
      if (b.kind == BlockKind::text_with_inline) {
        CHECK(b.formulas.size() <= 3);
        for (const auto& f : b.formulas) CHECK(f.latex.find("\\frac") == std::string::npos);
      }
      if (b.kind != BlockKind::display_formula) CHECK(b.language.has_value());
    }
    CHECK(kinds.size() == 3);
  }

  TEST_CASE("inline budget exhaustion reports attempts") {
    FakeCompiler fc;
    TempDir t;
    InlineProbe probe(fc, t.path());
    std::vector<corpus::FormulaRecord> recs;
    for (int i = 0; i < 80; ++i) recs.push_back(corpus::make_record("\\frac{a_{" + std::to_string(i) + "}}{b+c+d}", "t"));
    auto c = corpus::filter_corpus(recs, 8);
    FormulaPool pool(c);
    GeneratorConfig cfg;
    LayoutConfig l;
    InlineSelector sel(pool, probe, l, Rng(2), cfg.inline_max_pt);
    Rng r(5);
    try {
      make_block(BlockKind::text_with_inline, r, pool, sel, cfg);
      FAIL("expected GenerationError");
    } catch (const GenerationError& e) {
      CHECK(e.attempts() == 50);
    }
    CHECK(pool.available() == c.records.size());
  }

  TEST_CASE("build loop fills one page and keeps manifest invariants") {
    FakeCompiler fc(3000);
    TempDir t;
    auto c = small_corpus();
    auto m = build_document("doc_0000", 123, c, fc, t.path() / "doc_0000");
    CHECK(m.compile_report.page_count == 1);
    CHECK(is_clean(m.compile_report));
    const auto tex = fs::read_file(t.path() / "doc_0000/doc.tex");
    CHECK(check_manifest(m, tex).empty());
    CHECK(tex.size() > 2000);
    CHECK(!std::filesystem::exists(t.path() / "doc_0000/.build"));
    CHECK(manifest_from_json(fs::read_json(t.path() / "doc_0000/manifest.json")) == m);
    CHECK(m.pdf_hash == hash::sha256_hex(fs::read_file(t.path() / "doc_0000/doc.pdf")));
    std::set<std::string> ids;
    for (const auto& g : m.ground_truth) ids.insert(g.formula_id);
    CHECK(ids.size() == m.ground_truth.size());

    FakeCompiler fc2(3000);
    auto m2 = build_document("doc_0000", 123, c, fc2, t.path() / "again");
    CHECK(m2 == m);
    CHECK(fs::read_file(t.path() / "again/doc.tex") == tex);
  }

  TEST_CASE("degenerate page raises") {
    FakeCompiler fc(1);
    TempDir t;
    auto c = small_corpus();
    CHECK_THROWS_AS(build_document("d", 1, c, fc, t.path() / "d"), GenerationError);
    CHECK_THROWS_AS(build_document("d", 1, corpus::Corpus{}, fc, t.path() / "d"), std::invalid_argument);
  }

  TEST_CASE("batch generation reuses complete documents") {
    FakeCompiler fc(3000);
    TempDir t;
    auto c = small_corpus();
    auto res = generate_documents(3, 99, c, fc, t.path(), GeneratorConfig{}, 2, true);
    REQUIRE(res.manifests.size() == 3);
    CHECK(res.reused.empty());
    CHECK(res.manifests[1].doc_id == "doc_0001");
    const int runs = fc.runs;
    auto again = generate_documents(3, 99, c, fc, t.path(), GeneratorConfig{}, 2, true);
    CHECK(again.reused.size() == 3);
    CHECK(fc.runs == runs);
    CHECK(again.manifests[2] == res.manifests[2]);
  }

  TEST_CASE("missing compiler is a startup error") {
    CHECK_THROWS_AS(require_compiler("/nonexistent/pdflatex"), fbench::ToolError);
  }

  TEST_CASE("compile_check on real documents" * kNeedsTex) {
    PdfLatexCompiler pc(fbench::testing::real_pdflatex());
    TempDir t;
    const std::string pre = "\\documentclass{article}\n\\begin{document}\n";
    auto ok = compile_check(pre + "Hello world.\n\\end{document}\n", pc, t.path());
    CHECK(ok.success);
    CHECK(ok.page_count == 1);
    CHECK(ok.significant_warnings.empty());

    auto two = compile_check(pre + "A\\newpage B\n\\end{document}\n", pc, t.path());
    CHECK(two.page_count == 2);

    auto wide = compile_check(pre + "\\noindent\\hbox{" + std::string(120, 'W') + "}\n\\end{document}\n", pc, t.path());
    CHECK(wide.overfull_hbox_max_pt > 0);

    auto broken = compile_check(pre + "\\undefinedmacro\n\\end{document}\n", pc, t.path());
    CHECK(!is_clean(broken));
  }

  TEST_CASE("inline height probe with pdflatex" * kNeedsTex) {
    PdfLatexCompiler pc(fbench::testing::real_pdflatex());
    TempDir t;
    LayoutConfig l;
    auto x = measure_inline_height("x", l, pc, t.path());
    REQUIRE(x);
    CHECK(*x <= 10.0);
    auto tall = measure_inline_height("\\frac{\\frac{a}{b}}{\\frac{c}{d}}", l, pc, t.path());
    REQUIRE(tall);
    CHECK(*tall > 10.0);
    CHECK(!measure_inline_height("\\frac{a}", l, pc, t.path()));

    InlineProbe probe(pc, t.path() / "batch");
    auto h = probe.measure({"x", "\\frac{\\frac{a}{b}}{\\frac{c}{d}}", "\\frac{a}"}, l);
    CHECK(h[0] == doctest::Approx(*x));
    CHECK(h[1] == doctest::Approx(*tall));
    CHECK(!h[2]);
  }

  TEST_CASE("real build is reproducible" * kNeedsTex) {
    PdfLatexCompiler pc(fbench::testing::real_pdflatex());
    TempDir t;
    const auto& c = fbench::testing::fixture_corpus();
    auto a = build_document("doc_0000", 2024, c, pc, t.path() / "a");
    auto b = build_document("doc_0000", 2024, c, pc, t.path() / "b");
    CHECK(a == b);
    CHECK(fs::read_file(t.path() / "a/doc.tex") == fs::read_file(t.path() / "b/doc.tex"));
    CHECK(a.compile_report.page_count == 1);
    CHECK(check_manifest(a, fs::read_file(t.path() / "a/doc.tex")).empty());
    MESSAGE("formulas: " << a.ground_truth.size() << " blocks: " << a.blocks.size() << " compiles: " << a.compile_count);
  }
}
