#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "fbench/adapters/perturb.hpp"
#include "fbench/synthdoc/document.hpp"

namespace fbench::adapters {

enum class AdapterMode { subprocess, http, builtin_mock };
enum class UploadKind { binary, multipart };
enum class ParseStatus { ok, error, timeout };

std::string to_string(AdapterMode m);
std::string to_string(ParseStatus s);
ParseStatus parse_status_from_string(std::string_view s);

inline constexpr std::chrono::seconds kDefaultParserTimeout{300};

struct AdapterSpec {
  std::string name;
  AdapterMode mode = AdapterMode::builtin_mock;
  // subprocess: `{pdf}` is the absolute input path, `{out}` an output file the
  // parser may write instead of stdout.
  std::string command_template;
  // http
  std::string endpoint;
  std::string auth_env;
  UploadKind upload = UploadKind::binary;
  std::string multipart_field = "file";
  std::string response_field;  // when set, the response is JSON and this string field holds the text
  // builtin_mock
  PerturbationSpec mock_profile;

  std::chrono::seconds timeout = kDefaultParserTimeout;
  unsigned max_concurrency = 1;

  // Throws ConfigError (name, mode-specific fields, placeholders, rates).
  void validate() const;
  nlohmann::json to_json() const;
  static AdapterSpec from_json(const nlohmann::json& j);
};

struct ParsedOutput {
  std::string parser;
  std::string doc_id;
  std::string text;
  std::int64_t runtime_ms = 0;
  ParseStatus status = ParseStatus::ok;
  std::string error_detail;

  bool operator==(const ParsedOutput&) const = default;
};

struct ParserRun {
  ParsedOutput output;
  std::optional<PerturbationLedger> ledger;  // builtin mocks only
};

// Mock output for a manifest under a perturbation spec (runtime 0, status ok).
ParserRun perturb_output(const synthdoc::DocumentManifest& m, const PerturbationSpec& spec, const std::string& parser = "mock");

// Never throws for parser failures; those are encoded in the status. The spec
// is validated first and a ConfigError escapes before anything runs.
ParserRun run_parser(const AdapterSpec& spec, const std::filesystem::path& pdf, const synthdoc::DocumentManifest& m);

// <dir>/output.md, <dir>/status.json and, for mocks, <dir>/perturbations.json.
void write_parser_run(const std::filesystem::path& dir, const ParserRun& run, const nlohmann::json& provenance);
std::optional<ParserRun> read_parser_run(const std::filesystem::path& dir);

}  // namespace fbench::adapters
