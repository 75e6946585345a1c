#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <regex>
#include <string>

#include "fbench/corpus.hpp"
#include "fbench/synthdoc/compiler.hpp"
#include "fbench/synthdoc/document.hpp"
#include "fbench/util/fs.hpp"
#include "fbench/util/hash.hpp"
#include "fbench/util/subprocess.hpp"
#include "fbench/util/text.hpp"

namespace fbench::testing {

inline std::filesystem::path source_dir() { return FBENCH_SOURCE_DIR; }

class TempDir {
 public:
  explicit TempDir(std::string_view prefix = "fbench-test") : path_(fs::make_temp_dir(prefix)) {}
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline const corpus::Corpus& fixture_corpus() {
  static const corpus::Corpus c = [] {
    auto ex = corpus::extract_from_source(source_dir() / "data/fixtures/wiki_pages");
    return corpus::filter_corpus(ex.records, corpus::kDefaultThreshold);
  }();
  return c;
}

// Hand-built manifest: plain, inline x2, display, display, plain, inline x1, display.
inline synthdoc::DocumentManifest sample_manifest(const std::string& doc_id = "doc_0000") {
  using namespace synthdoc;
  auto f = [](const std::string& latex, Placement p) {
    return BlockFormula{hash::sha256_hex(latex), latex, p};
  };
  DocumentManifest m;
  m.doc_id = doc_id;
  m.seed = 1;
  m.blocks = {
      {BlockKind::plain_text, Language::en, "First sentence here. Second one follows.", {}},
      {BlockKind::text_with_inline, Language::de, "{{0}} Ein Satz mit Formel. Noch einer {{1}}",
       {f("a_{1} + b_{2} = c^{3}", Placement::inline_math), f("\\alpha \\cdot x_{n} \\leq y", Placement::inline_math)}},
      {BlockKind::display_formula, std::nullopt, "", {f("\\int_{0}^{1} x^{2} \\, dx = \\frac{1}{3}", Placement::display_math)}},
      {BlockKind::display_formula, std::nullopt, "", {f("\\sum_{k=1}^{n} k = \\frac{n(n+1)}{2}", Placement::display_math)}},
      {BlockKind::plain_text, Language::fr, "Une phrase simple. Encore une autre phrase.", {}},
      {BlockKind::text_with_inline, Language::es, "Una frase {{0}} con formula.",
       {f("(x + y)^{2} \\geq 4xy", Placement::inline_math)}},
      {BlockKind::display_formula, std::nullopt, "", {f("\\lim_{n \\to \\infty} (1 + 1/n)^{n} = e", Placement::display_math)}},
  };
  m.ground_truth = flatten_ground_truth(m.blocks);
  return m;
}

inline std::string real_pdflatex() { return FBENCH_PDFLATEX_PATH; }
// Converter command for study images, empty when PyMuPDF is unavailable.
inline std::string pdf2png_command() {
  static const std::string cmd = [] {
    auto r = run_shell("python3 -c 'import pymupdf'", std::chrono::seconds(60));
    if (!r.ok()) return std::string();
    return "python3 " + text::shell_quote((source_dir() / "tools/pdf2png.py").string()) + " {pdf} {png}";
  }();
  return cmd;
}

inline bool have_pdflatex() { return !real_pdflatex().empty() && std::filesystem::exists(real_pdflatex()); }

// Deterministic stand-in for pdflatex. Body text longer than `page_capacity`
// bytes spills onto further pages; `\frac` makes an inline box 14pt tall;
// `\bad` is an undefined control sequence.
class FakeCompiler : public synthdoc::LatexCompiler {
 public:
  explicit FakeCompiler(std::size_t page_capacity = 2500) : capacity_(page_capacity) {}

  synthdoc::CompileRun run(const std::string& tex, const std::filesystem::path& workdir, bool halt) override {
    ++runs;
    std::filesystem::create_directories(workdir);
    std::filesystem::remove(workdir / "doc.pdf");
    fs::write_file_atomic(workdir / "doc.tex", tex);
    synthdoc::CompileRun r;
    const auto begin = tex.find("\\begin{document}");
    const auto end = tex.find("\\end{document}");
    const std::string body = tex.substr(begin + 16, end - begin - 16);
    std::string log = "This is FakeTeX\n";
    const bool bad = body.find("\\bad") != std::string::npos;
    if (body.find("FBPROBE") != std::string::npos) {
      ++probe_runs;
      static const std::regex box(R"(\\hbox\{\$(.*)\$\}\n\\typeout\{FBPROBE:(\d+):)");
      for (std::sregex_iterator it(body.begin(), body.end(), box), e; it != e; ++it) {
        const std::string f = (*it)[1].str();
        if (f.find("\\bad") != std::string::npos) {
          log += "! Undefined control sequence.\n";
          if (halt) break;
          continue;
        }
        log += "FBPROBE:" + (*it)[2].str() + ":" + (f.find("\\frac") != std::string::npos ? "14.0pt" : "6.5pt") + "\n";
      }
      log += "No pages of output.\n";
      r.exit_code = bad ? 1 : 0;
    } else if (bad) {
      log += "! Undefined control sequence.\n";
      r.exit_code = 1;
    } else {
      const std::size_t pages = body.size() / capacity_ + 1;
      if (body.find("\\overfull") != std::string::npos) log += "Overfull \\hbox (15.0pt too wide) in paragraph\n";
      const std::string pdf = "%PDF-fake\n" + hash::sha256_hex(body) + "\n";
      fs::write_file_atomic(workdir / "doc.pdf", pdf);
      log += "Output written on doc.pdf (" + std::to_string(pages) + (pages == 1 ? " page, " : " pages, ") +
             std::to_string(pdf.size()) + " bytes).\n";
      r.exit_code = 0;
      r.pdf_written = true;
    }
    fs::write_file_atomic(workdir / "doc.log", log);
    r.log = log;
    return r;
  }
  std::string describe() const override { return "fake"; }

  std::atomic<int> runs{0};
  std::atomic<int> probe_runs{0};

 private:
  std::size_t capacity_;
};

}  // namespace fbench::testing
