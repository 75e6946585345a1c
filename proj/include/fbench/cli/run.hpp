#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbench/cli/config.hpp"
#include "fbench/matching/pipeline.hpp"
#include "fbench/reporting/reporting.hpp"
#include "fbench/study/server.hpp"
#include "fbench/synthdoc/compiler.hpp"

namespace fbench::cli {

inline constexpr const char* kVersion = "0.1.0";
inline const char* const kStages[] = {"gen", "parse", "match", "judge", "report"};

struct StageStats {
  std::string stage;
  std::size_t executed = 0;
  std::size_t skipped = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // item, reason
};

struct ParserSummary {
  std::size_t pairs = 0;
  std::size_t missing = 0;
  std::size_t parse_errors = 0;
  std::size_t unmatched_documents = 0;
};

// Content of summary.json: depends only on artifacts, never on what ran this time.
struct RunSummary {
  std::size_t documents = 0;
  std::size_t ground_truth = 0;
  std::size_t inline_formulas = 0;
  std::size_t display_formulas = 0;
  std::vector<std::string> failed_documents;
  std::map<std::string, ParserSummary> parsers;
  double llm_cost = 0.0;
  nlohmann::json to_json() const;
};

struct RunResult {
  std::vector<StageStats> stages;
  RunSummary summary;
  bool partial() const;
  std::size_t executed() const;
};

// Exclusive handle on a run directory. Creates it with config.json and
// run.lock on first use; later opens must present the same config hash.
class RunDir {
 public:
  RunDir(const std::filesystem::path& root, const RunConfig& config);
  // Opens an existing run directory using its recorded config.
  static RunDir open(const std::filesystem::path& root);
  ~RunDir();
  RunDir(RunDir&&) noexcept;
  RunDir& operator=(RunDir&&) = delete;

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path stage(const std::string& name) const { return root_ / name; }
  RunConfig& config() { return config_; }
  const RunConfig& config() const { return config_; }
  const std::string& config_hash() const { return hash_; }
  nlohmann::json provenance(const std::string& stage) const;
  void mark_complete(const std::string& stage);

 private:
  RunDir() = default;
  void acquire();
  void init();
  void write_lock_manifest();

  std::filesystem::path root_;
  RunConfig config_;
  std::string hash_;
  std::vector<std::string> completed_;
  int lock_fd_ = -1;
};

// Shared LLM client for one invocation; cost already persisted counts toward --max-cost.
std::unique_ptr<llm::LlmClient> make_client(const RunConfig& c, double spent = 0.0);

std::vector<synthdoc::DocumentManifest> load_documents(const RunDir& run);

StageStats stage_gen(RunDir& run, synthdoc::LatexCompiler& compiler);
StageStats stage_parse(RunDir& run);
StageStats stage_match(RunDir& run, llm::LlmClient& client);
StageStats stage_judge(RunDir& run, llm::LlmClient& client);
StageStats stage_report(RunDir& run);

double persisted_cost(const RunDir& run);
// Mean rating per (parser, doc, gt) over an exported ratings file.
std::map<reporting::PairKey, double> human_means(const std::vector<study::ExportedRating>& ratings);
RunSummary summarize(const RunDir& run);

// gen -> parse -> match -> judge -> report. `compiler` overrides discovery (tests).
RunResult run_all(RunDir& run, synthdoc::LatexCompiler* compiler = nullptr);

std::filesystem::path matches_path(const RunDir& run, const std::string& parser, const std::string& doc_id);
std::vector<matching::DocumentMatches> load_matches(const RunDir& run);

}  // namespace fbench::cli
