#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace fbench::corpus {

struct FormulaRecord {
  std::string latex;
  std::uint64_t complexity = 0;
  std::string source_id;
  std::string content_hash;

  bool operator==(const FormulaRecord&) const = default;
};

struct Corpus {
  std::vector<FormulaRecord> records;
  int threshold = 8;

  bool operator==(const Corpus&) const = default;
};

struct ExtractionResult {
  std::vector<FormulaRecord> records;
  std::size_t skipped = 0;  // math elements without a usable LaTeX payload
  std::size_t pages = 0;
};

constexpr int kDefaultThreshold = 8;

std::uint64_t complexity_score(std::string_view latex);
std::string content_hash(std::string_view latex);
// Trims `latex` and fills in complexity and hash.
FormulaRecord make_record(std::string_view latex, std::string source_id);

// Removes one outer `{\displaystyle ...}` wrapper, if present.
std::string strip_displaystyle(std::string_view latex);
std::string decode_html_entities(std::string_view s);

ExtractionResult extract_formulas(std::string_view html_page, std::string_view source_id);
// A directory of .html/.htm files, a single HTML file, or a .tar / .tar.gz archive.
ExtractionResult extract_from_source(const std::filesystem::path& source);

Corpus filter_corpus(const std::vector<FormulaRecord>& records, int threshold = kDefaultThreshold);

nlohmann::json to_json(const FormulaRecord& r);
FormulaRecord record_from_json(const nlohmann::json& j);

std::string serialize_corpus(const Corpus& c);
void write_corpus(const std::filesystem::path& p, const Corpus& c);
// Validates the header and every record invariant; throws std::runtime_error.
Corpus read_corpus(const std::filesystem::path& p);
Corpus parse_corpus(std::string_view text, const std::string& origin = "corpus");

}  // namespace fbench::corpus
