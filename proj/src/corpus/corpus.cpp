#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "fbench/corpus.hpp"
#include "fbench/errors.hpp"
#include "fbench/util/fs.hpp"
#include "fbench/util/text.hpp"

namespace fbench::corpus {

using nlohmann::json;

Corpus filter_corpus(const std::vector<FormulaRecord>& records, int threshold) {
  if (threshold < 0) throw PreconditionError("filter threshold must be >= 0");
  Corpus out;
  out.threshold = threshold;
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (r.complexity <= static_cast<std::uint64_t>(threshold)) continue;
    if (!seen.insert(r.content_hash).second) continue;
    out.records.push_back(r);
  }
  return out;
}

json to_json(const FormulaRecord& r) {
  return json{{"type", "formula"},
              {"latex", r.latex},
              {"complexity", r.complexity},
              {"source_id", r.source_id},
              {"content_hash", r.content_hash}};
}

FormulaRecord record_from_json(const json& j) {
  FormulaRecord r;
  r.latex = j.at("latex").get<std::string>();
  r.complexity = j.at("complexity").get<std::uint64_t>();
  r.source_id = j.value("source_id", "");
  r.content_hash = j.at("content_hash").get<std::string>();
  return r;
}

std::string serialize_corpus(const Corpus& c) {
  std::vector<json> rows;
  rows.reserve(c.records.size() + 1);
  rows.push_back(json{{"type", "header"},
                      {"format", "fbench-corpus/1"},
                      {"threshold", c.threshold},
                      {"count", c.records.size()}});
  for (const auto& r : c.records) rows.push_back(to_json(r));
  return fs::dump_jsonl(rows);
}

void write_corpus(const std::filesystem::path& p, const Corpus& c) {
  fs::write_file_atomic(p, serialize_corpus(c));
}

Corpus parse_corpus(std::string_view text, const std::string& origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::size_t declared = 0;
  Corpus c;
  std::unordered_set<std::string> hashes;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(e.what());
    }
    if (!have_header) {
      if (j.value("type", "") != "header") fail("first record must be the corpus header");
      c.threshold = j.at("threshold").get<int>();
      declared = j.at("count").get<std::size_t>();
      have_header = true;
      continue;
    }
    FormulaRecord r;
    try {
      r = record_from_json(j);
    } catch (const json::exception& e) {
      fail(e.what());
    }
    if (text::trim(r.latex).empty()) fail("empty latex");
    if (r.complexity != complexity_score(r.latex)) fail("complexity does not match latex");
    if (r.complexity <= static_cast<std::uint64_t>(c.threshold)) fail("record below threshold");
    if (r.content_hash != content_hash(r.latex)) fail("content_hash does not match latex");
    if (!hashes.insert(r.content_hash).second) fail("duplicate content_hash");
    c.records.push_back(std::move(r));
  }
  if (!have_header) throw std::runtime_error(origin + ": missing corpus header");
  if (declared != c.records.size())
    throw std::runtime_error(origin + ": header count " + std::to_string(declared) + " but " +
                             std::to_string(c.records.size()) + " records");
  return c;
}

Corpus read_corpus(const std::filesystem::path& p) { return parse_corpus(fs::read_file(p), p.string()); }

}  // namespace fbench::corpus
