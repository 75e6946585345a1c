#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbench/adapters/adapter.hpp"
#include "fbench/llm/client.hpp"
#include "fbench/matching/fuzzy.hpp"
#include "fbench/synthdoc/document.hpp"

namespace fbench::matching {

enum class MatchMethod { exact, fuzzy, retry_exact, retry_fuzzy, split_from_group, missing };
enum class TextVersion { original, residual };

std::string to_string(MatchMethod m);
MatchMethod match_method_from_string(std::string_view s);

struct ExtractionItem {
  std::size_t index = 0;
  std::string extracted;
  bool grouped = false;
};

struct ExtractionResponse {
  std::vector<ExtractionItem> items;  // one per requested formula, in request order
  nlohmann::json payload;             // raw structured payload
  std::string fingerprint;
  int retry_count = 0;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
  double cost = 0.0;
};

struct MatchResult {
  std::size_t gt_index = 0;
  std::optional<std::string> extracted;  // parser text at `span`; nullopt = MISSING
  std::string llm_extracted;             // Stage-1 copy as returned by the model
  MatchMethod method = MatchMethod::missing;
  std::optional<double> edit_ratio;
  std::optional<Span> span;
  TextVersion text_version = TextVersion::original;
  std::vector<std::size_t> group;  // gt indices sharing one parsed environment

  bool operator==(const MatchResult&) const = default;
};

struct MatchOptions {
  double max_ratio = kDefaultMaxRatio;
  std::string model = llm::kDefaultModel;
  bool retry = true;
};

struct DocumentMatches {
  std::string doc_id;
  std::string parser;
  std::vector<MatchResult> results;
  nlohmann::json stage1;               // {fingerprint, retry_count, tokens_in, tokens_out, cost, payload} or null
  nlohmann::json retry;                // same, or null when no retry ran
  std::optional<std::string> residual_text;
  std::string prompt_fingerprint;
  double max_ratio = kDefaultMaxRatio;

  double cost() const;  // Stage 1 plus retry
};

// Identifies the prompt templates and response schema.
std::string prompt_fingerprint();
nlohmann::json extraction_schema(std::size_t count);
llm::LlmRequest extraction_request(const std::vector<std::pair<std::size_t, std::string>>& gt,
                                   const std::string& parsed_text, const std::string& model);

// Stage 1 for the given (gt_index, latex) list. Throws llm errors.
ExtractionResponse llm_extract(const std::vector<std::pair<std::size_t, std::string>>& gt, const std::string& parsed_text,
                               llm::LlmClient& client, const std::string& model = llm::kDefaultModel);
ExtractionResponse llm_extract(const std::vector<std::string>& gt, const std::string& parsed_text, llm::LlmClient& client,
                               const std::string& model = llm::kDefaultModel);

// Removes one pair of outer math delimiters.
std::string strip_math_delimiters(std::string_view s);
// Replaces each span by a single space.
std::string excise(std::string_view text, std::vector<Span> spans);

DocumentMatches match_pipeline(const synthdoc::DocumentManifest& m, const adapters::ParsedOutput& parsed,
                               llm::LlmClient& client, const MatchOptions& opts = {});

// Problems with a result list; empty when every invariant holds.
std::vector<std::string> check_matches(const DocumentMatches& d, const synthdoc::DocumentManifest& m,
                                       const std::string& parsed_text);

nlohmann::json to_json(const MatchResult& r);
MatchResult match_result_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DocumentMatches& d);
DocumentMatches document_matches_from_json(const nlohmann::json& j);

}  // namespace fbench::matching
