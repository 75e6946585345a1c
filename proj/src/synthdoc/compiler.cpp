#include "fbench/synthdoc/compiler.hpp"

#include <cstdlib>
#include <regex>

#include "fbench/errors.hpp"
#include "fbench/util/fs.hpp"
#include "fbench/util/subprocess.hpp"
#include "fbench/util/text.hpp"

namespace fbench::synthdoc {

namespace stdfs = std::filesystem;
using nlohmann::json;

bool is_clean(const CompileReport& r) {
  return r.success && r.page_count == 1 && r.significant_warnings.empty();
}

PdfLatexCompiler::PdfLatexCompiler(stdfs::path executable, std::chrono::seconds timeout)
    : executable_(std::move(executable)), timeout_(timeout) {}

CompileRun PdfLatexCompiler::run(const std::string& tex_source, const stdfs::path& workdir, bool halt_on_error) {
  stdfs::create_directories(workdir);
  for (const char* ext : {".pdf", ".log", ".aux"}) stdfs::remove(workdir / (std::string("doc") + ext));
  fs::write_file_atomic(workdir / "doc.tex", tex_source);

  ProcessOptions opts;
  opts.argv = {executable_.string(), "-interaction=nonstopmode", "-no-shell-escape", "-jobname=doc"};
  if (halt_on_error) opts.argv.push_back("-halt-on-error");
  opts.argv.push_back("doc.tex");
  opts.cwd = workdir;
  opts.timeout = timeout_;
  opts.stdin_data = std::string();
  opts.env = {{"SOURCE_DATE_EPOCH", std::to_string(kSourceDateEpoch)}, {"FORCE_SOURCE_DATE", "1"}};
  auto res = run_process(opts);
  if (res.spawn_failed) throw ToolError("cannot run compiler " + executable_.string() + ": " + res.err);

  CompileRun out;
  out.exit_code = res.exit_code;
  out.timed_out = res.timed_out;
  out.stdout_text = std::move(res.out);
  std::error_code ec;
  if (stdfs::exists(workdir / "doc.log", ec)) out.log = fs::read_file(workdir / "doc.log");
  out.pdf_written = !res.timed_out && stdfs::exists(workdir / "doc.pdf", ec) && stdfs::file_size(workdir / "doc.pdf", ec) > 0;
  return out;
}

std::optional<stdfs::path> discover_compiler(const std::string& configured) {
  if (!configured.empty()) return find_executable(configured);
  if (const char* env = std::getenv("FBENCH_PDFLATEX"); env && *env) return find_executable(env);
  return find_executable("pdflatex");
}

stdfs::path require_compiler(const std::string& configured) {
  auto p = discover_compiler(configured);
  if (!p) {
    throw ToolError(configured.empty() ? "no pdflatex-compatible compiler found (set FBENCH_PDFLATEX or add pdflatex to PATH)"
                                       : "configured compiler not found: " + configured);
  }
  return *p;
}

std::string unwrap_log(std::string_view log) {
  constexpr std::size_t kWrap = 79;
  std::string out;
  out.reserve(log.size());
  std::size_t pos = 0;
  while (pos < log.size()) {
    auto nl = log.find('\n', pos);
    auto line = log.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.append(line);
    if (nl == std::string_view::npos) break;
    if (line.size() != kWrap) out += '\n';
    pos = nl + 1;
  }
  return out;
}

CompileReport parse_log(std::string_view raw_log, bool pdf_written, const WarningPolicy& policy) {
  static const std::regex pages_re(R"(Output written on .*\((\d+) pages?)");
  static const std::regex hbox_re(R"(^Overfull \\hbox \(([0-9.]+)pt too wide\))");
  const std::string log = unwrap_log(raw_log);

  CompileReport r;
  bool pages_known = false;
  for (const auto& line : text::split(log, '\n')) {
    std::smatch m;
    if (std::regex_search(line, m, pages_re)) {
      r.page_count = std::stoi(m[1].str());
      pages_known = true;
    } else if (text::starts_with(line, "No pages of output")) {
      r.page_count = 0;
      pages_known = true;
    } else if (std::regex_search(line, m, hbox_re)) {
      const double pt = std::stod(m[1].str());
      r.overfull_hbox_max_pt = std::max(r.overfull_hbox_max_pt, pt);
      if (pt > policy.overfull_hbox_tolerance_pt) r.significant_warnings.push_back(line);
    } else if (text::starts_with(line, "Overfull \\vbox")) {
      r.overfull_vbox = true;
      r.significant_warnings.push_back(line);
    } else if (text::starts_with(line, "Missing character:")) {
      r.significant_warnings.push_back(line);
    } else if (text::starts_with(line, "! ")) {
      r.significant_warnings.push_back(line);
    }
  }
  r.success = pdf_written && pages_known && r.page_count >= 1;
  if (pdf_written && !pages_known) r.significant_warnings.push_back("page count missing from log");
  return r;
}

CompileReport compile_check(const std::string& tex_source, LatexCompiler& compiler, const stdfs::path& workdir,
                            const WarningPolicy& policy) {
  auto run = compiler.run(tex_source, workdir, true);
  auto report = parse_log(run.log, run.pdf_written, policy);
  if (run.timed_out) {
    report.success = false;
    report.significant_warnings.push_back("compiler timed out");
  } else if (run.log.empty() && run.exit_code != 0) {
    report.significant_warnings.push_back("compiler exited with status " + std::to_string(run.exit_code) +
                                          ": " + text::tail(run.stdout_text, 400));
  }
  return report;
}

json to_json(const CompileReport& r) {
  return json{{"success", r.success},
              {"page_count", r.page_count},
              {"overfull_hbox_max_pt", r.overfull_hbox_max_pt},
              {"overfull_vbox", r.overfull_vbox},
              {"significant_warnings", r.significant_warnings}};
}

CompileReport compile_report_from_json(const json& j) {
  CompileReport r;
  r.success = j.at("success").get<bool>();
  r.page_count = j.at("page_count").get<int>();
  r.overfull_hbox_max_pt = j.at("overfull_hbox_max_pt").get<double>();
  r.overfull_vbox = j.at("overfull_vbox").get<bool>();
  r.significant_warnings = j.at("significant_warnings").get<std::vector<std::string>>();
  return r;
}

}  // namespace fbench::synthdoc
