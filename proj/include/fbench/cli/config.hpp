#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbench/adapters/adapter.hpp"
#include "fbench/llm/client.hpp"
#include "fbench/metrics/scoring.hpp"
#include "fbench/synthdoc/document.hpp"

namespace fbench::cli {

struct LlmSettings {
  std::string backend = "mock";  // mock | http
  std::string mock_default = "echo";
  std::string mock_script;  // resolved path, empty = none
  std::string model = llm::kDefaultModel;
  std::string base_url;
  std::string api_key_env = "LLM_API_KEY";
  std::optional<double> max_cost;
  unsigned max_concurrency = 4;
  std::int64_t tokens_per_minute = 0;
  int max_retries = 3;
  int timeout_s = 120;
  double price_in_per_mtok = 0.25;
  double price_out_per_mtok = 2.0;
};

struct StudySettings {
  std::size_t pairs = 250;
  std::size_t raters = 30;
  std::size_t raters_per_pair = 3;
  std::size_t pairs_per_rater = 25;
  std::string converter;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path corpus;
  std::size_t documents = 0;
  std::filesystem::path output;  // empty when the run directory comes from the command line
  std::string pdflatex;
  unsigned workers = 1;
  synthdoc::GeneratorConfig generator;
  std::vector<adapters::AdapterSpec> parsers;
  LlmSettings llm;
  double max_ratio = 0.15;
  bool retry = true;
  std::set<metrics::Metric> metrics = {metrics::Metric::lev_sim, metrics::Metric::bleu, metrics::Metric::judge};
  std::string cdm_command;
  bool missing_as_zero = true;
  std::filesystem::path human_ratings;
  StudySettings study;

  // Normalized form with absolute paths; read back by config_from_json.
  nlohmann::json to_json() const;
};

// `base_dir` resolves relative paths. Throws ConfigError naming the field.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig validate_config(const std::filesystem::path& path);

// SHA-256 over the normalized config without the output directory, plus the corpus bytes.
std::string config_hash(const RunConfig& c);

std::shared_ptr<llm::LlmBackend> make_backend(const LlmSettings& s);
llm::ClientOptions client_options(const LlmSettings& s);

}  // namespace fbench::cli
