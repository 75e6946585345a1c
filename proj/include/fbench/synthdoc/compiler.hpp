#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace fbench::synthdoc {

struct CompileReport {
  bool success = false;
  int page_count = 0;
  double overfull_hbox_max_pt = 0.0;
  bool overfull_vbox = false;
  std::vector<std::string> significant_warnings;

  bool operator==(const CompileReport&) const = default;
};

struct WarningPolicy {
  double overfull_hbox_tolerance_pt = 10.0;
};

// A CompileReport is acceptable when it compiled to exactly one page without
// significant warnings.
bool is_clean(const CompileReport& r);

struct CompileRun {
  int exit_code = -1;
  bool timed_out = false;
  std::string log;
  std::string stdout_text;
  bool pdf_written = false;
};

// One pdflatex-compatible invocation on `<workdir>/doc.tex`, producing doc.pdf / doc.log.
class LatexCompiler {
 public:
  virtual ~LatexCompiler() = default;
  // `halt_on_error` false keeps going after errors (used for batched probes).
  virtual CompileRun run(const std::string& tex_source, const std::filesystem::path& workdir,
                         bool halt_on_error) = 0;
  virtual std::string describe() const = 0;
};

inline constexpr std::chrono::seconds kDefaultCompileTimeout{60};
// Fixed document timestamp so output PDFs do not embed the wall clock.
inline constexpr long long kSourceDateEpoch = 946684800;

class PdfLatexCompiler : public LatexCompiler {
 public:
  PdfLatexCompiler(std::filesystem::path executable, std::chrono::seconds timeout = kDefaultCompileTimeout);
  CompileRun run(const std::string& tex_source, const std::filesystem::path& workdir, bool halt_on_error) override;
  std::string describe() const override { return executable_.string(); }
  const std::filesystem::path& executable() const { return executable_; }

 private:
  std::filesystem::path executable_;
  std::chrono::seconds timeout_;
};

// Search order: explicit setting, $FBENCH_PDFLATEX, `pdflatex` on PATH.
std::optional<std::filesystem::path> discover_compiler(const std::string& configured = {});
// Throws ToolError when nothing is found.
std::filesystem::path require_compiler(const std::string& configured = {});

// Joins lines TeX hard-wrapped at max_print_line (79 characters).
std::string unwrap_log(std::string_view log);
CompileReport parse_log(std::string_view log, bool pdf_written, const WarningPolicy& policy = {});

CompileReport compile_check(const std::string& tex_source, LatexCompiler& compiler,
                            const std::filesystem::path& workdir, const WarningPolicy& policy = {});

nlohmann::json to_json(const CompileReport& r);
CompileReport compile_report_from_json(const nlohmann::json& j);

}  // namespace fbench::synthdoc
