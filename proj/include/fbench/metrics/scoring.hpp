#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbench/llm/client.hpp"
#include "fbench/matching/pipeline.hpp"
#include "fbench/synthdoc/document.hpp"

namespace fbench::metrics {

enum class Metric { lev_sim, bleu, cdm_f1, judge };
inline constexpr Metric kMetrics[] = {Metric::lev_sim, Metric::bleu, Metric::cdm_f1, Metric::judge};

std::string to_string(Metric m);
Metric metric_from_string(std::string_view s);
// Accepts "lev", "bleu", "cdm", "judge" and the full metric names.
std::set<Metric> parse_metric_list(std::string_view csv);
double metric_max(Metric m);

enum class ScoreStatus { scored, unscored, unavailable };
std::string to_string(ScoreStatus s);

struct ScoreRecord {
  std::string parser;
  std::string doc_id;
  std::size_t gt_index = 0;
  synthdoc::Placement placement = synthdoc::Placement::inline_math;
  Metric metric = Metric::lev_sim;
  double value = 0.0;  // 0 unless scored
  ScoreStatus status = ScoreStatus::scored;
  bool missing = false;
  std::string reason;

  bool operator==(const ScoreRecord&) const = default;
};

// Judge

nlohmann::json judge_schema();
std::string judge_prompt_fingerprint();
llm::LlmRequest judge_request(const std::string& gt, const std::string& extracted, const std::string& model);

struct JudgeOutcome {
  std::optional<double> score;  // nullopt = unscored
  std::string justification;
  std::string reason;
  bool called = false;
  double cost = 0.0;
};

// MISSING scores 0 without a call. Throws llm errors.
double llm_judge(const std::string& gt, const std::optional<std::string>& extracted, llm::LlmClient& client,
                 const std::string& model = llm::kDefaultModel);
// Turns transport and protocol failures into an unscored outcome. BudgetExceeded propagates.
JudgeOutcome judge_pair(const std::string& gt, const std::optional<std::string>& extracted, llm::LlmClient& client,
                        const std::string& model = llm::kDefaultModel);

// External CDM

// `command` is a shell template with {gt} and {pred} replaced by quoted paths of
// files holding each LaTeX string. The tool prints a JSON object with "f1" and
// optionally "precision" and "recall" on stdout.
struct CdmTool {
  std::string command;
  std::chrono::seconds timeout{120};
};

struct CdmScores {
  bool available = false;
  double f1 = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::string reason;
};

CdmScores cdm_external(const std::string& gt, const std::string& pred, const std::optional<CdmTool>& tool);

// Batch

struct ScoringOptions {
  std::set<Metric> metrics = {Metric::lev_sim, Metric::bleu, Metric::judge};
  std::optional<CdmTool> cdm;
  std::string model = llm::kDefaultModel;
  unsigned workers = 1;
};

struct ScoringStats {
  std::size_t judge_calls = 0;
  double cost = 0.0;
};

// One record per (result, selected metric), ordered by gt_index then metric.
// `client` may be null when judge is not selected.
std::vector<ScoreRecord> score_document(const synthdoc::DocumentManifest& m, const matching::DocumentMatches& d,
                                        llm::LlmClient* client, const ScoringOptions& opts,
                                        ScoringStats* stats = nullptr);

struct Coverage {
  std::size_t total = 0;
  std::size_t scored = 0;
  std::size_t unscored = 0;
  std::size_t unavailable = 0;
  double fraction() const { return total ? static_cast<double>(scored) / total : 1.0; }
};
std::map<Metric, Coverage> coverage(const std::vector<ScoreRecord>& records);

nlohmann::json to_json(const ScoreRecord& r);
ScoreRecord score_record_from_json(const nlohmann::json& j);
void write_scores(const std::filesystem::path& p, const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> read_scores(const std::filesystem::path& p);

}  // namespace fbench::metrics
