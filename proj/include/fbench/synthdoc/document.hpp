#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbench/corpus.hpp"
#include "fbench/synthdoc/compiler.hpp"
#include "fbench/synthdoc/layout.hpp"
#include "fbench/synthdoc/probe.hpp"
#include "fbench/synthdoc/textgen.hpp"
#include "fbench/util/rng.hpp"

namespace fbench::synthdoc {

enum class BlockKind { plain_text, text_with_inline, display_formula };
enum class Placement { inline_math, display_math };

std::string to_string(BlockKind k);
std::string to_string(Placement p);
BlockKind block_kind_from_string(std::string_view s);
Placement placement_from_string(std::string_view s);

struct BlockFormula {
  std::string formula_id;  // content hash of the corpus record
  std::string latex;
  Placement placement = Placement::inline_math;

  bool operator==(const BlockFormula&) const = default;
};

struct ContentBlock {
  BlockKind kind = BlockKind::plain_text;
  std::optional<Language> language;  // text kinds only
  std::string text;                  // inline formula i sits at marker "{{i}}"
  std::vector<BlockFormula> formulas;

  bool operator==(const ContentBlock&) const = default;
};

struct GroundTruthFormula {
  std::size_t gt_index = 0;
  std::string latex;
  Placement placement = Placement::inline_math;
  std::string formula_id;
  std::size_t block_index = 0;

  bool operator==(const GroundTruthFormula&) const = default;
};

struct GeneratorConfig {
  double inline_max_pt = kDefaultInlineMaxPt;
  int attempts_per_slot = 20;
  int failed_slots_to_stop = 5;
  // A slot also fails after this many page overflows; 0 disables the cutoff.
  int overflow_rejections_per_slot = 3;
  int inline_attempts = 50;
  int min_sentences = 2;
  int max_sentences = 6;
  int max_inline_per_block = 3;
  WarningPolicy warnings;

  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
};

struct DocumentManifest {
  std::string doc_id;
  std::uint64_t seed = 0;
  LayoutConfig layout;
  std::vector<ContentBlock> blocks;
  std::vector<GroundTruthFormula> ground_truth;
  std::string pdf_hash;
  CompileReport compile_report;
  std::size_t compile_count = 0;

  bool operator==(const DocumentManifest&) const = default;
};

class GenerationError : public std::runtime_error {
 public:
  GenerationError(const std::string& what, int attempts) : std::runtime_error(what), attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

bool block_invariants_hold(const ContentBlock& b);
std::vector<GroundTruthFormula> flatten_ground_truth(const std::vector<ContentBlock>& blocks);

std::string render_block(const ContentBlock& b);
std::string render_document(const LayoutConfig& layout, const std::vector<ContentBlock>& blocks);

// Per-document formula sampler without replacement.
class FormulaPool {
 public:
  explicit FormulaPool(const corpus::Corpus& c);
  std::size_t available() const { return free_.size(); }
  // Draws up to n distinct unused formulas (indices into the corpus).
  std::vector<std::size_t> draw(Rng& rng, std::size_t n);
  void take(std::size_t idx);
  void give_back(std::size_t idx);
  bool is_free(std::size_t idx) const;
  std::size_t size() const { return corpus_.records.size(); }
  const corpus::FormulaRecord& record(std::size_t idx) const { return corpus_.records[idx]; }

 private:
  const corpus::Corpus& corpus_;
  std::vector<std::size_t> free_;  // sorted
};

// Walks the pool in a seeded random order, measuring candidates ahead in chunks.
class InlineSelector {
 public:
  InlineSelector(FormulaPool& pool, InlineProbe& probe, const LayoutConfig& layout, Rng order_rng,
                 double max_pt, std::size_t chunk = 64);
  // Next free formula whose inline extent is within max_pt. Each examined
  // candidate counts one attempt; gives up once `attempts` reaches `budget`.
  std::optional<std::size_t> next(int budget, int& attempts);
  std::optional<double> height(std::size_t idx) const;

 private:
  void measure_ahead();

  FormulaPool& pool_;
  InlineProbe& probe_;
  const LayoutConfig& layout_;
  double max_pt_;
  std::size_t chunk_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::map<std::size_t, std::optional<double>> heights_;
};

ContentBlock next_block(Rng& rng, FormulaPool& pool, InlineSelector& inline_sel, const GeneratorConfig& cfg);
// Same, with a fixed kind.
ContentBlock make_block(BlockKind kind, Rng& rng, FormulaPool& pool, InlineSelector& inline_sel,
                        const GeneratorConfig& cfg);

// Writes <out_dir>/doc.tex, doc.pdf and manifest.json.
DocumentManifest build_document(const std::string& doc_id, std::uint64_t seed, const corpus::Corpus& corpus,
                                LatexCompiler& compiler, const std::filesystem::path& out_dir,
                                const GeneratorConfig& cfg = {});

// Seed used for the document at `index` of a batch.
std::uint64_t document_seed(std::uint64_t batch_seed, const std::string& doc_id);
std::string document_id(std::size_t index);

struct BatchResult {
  std::vector<DocumentManifest> manifests;  // in doc_id order
  std::vector<std::string> reused;          // doc_ids found complete on disk
  std::vector<std::pair<std::string, std::string>> failures;  // doc_id, reason
};

// Generates <out_root>/doc_NNNN for NNNN in [0, count).
BatchResult generate_documents(std::size_t count, std::uint64_t batch_seed, const corpus::Corpus& corpus,
                               LatexCompiler& compiler, const std::filesystem::path& out_root,
                               const GeneratorConfig& cfg, unsigned workers, bool skip_existing);
// The manifest in `dir` when doc.tex, doc.pdf and manifest.json are present and consistent.
std::optional<DocumentManifest> load_complete_document(const std::filesystem::path& dir, std::uint64_t seed);

nlohmann::json to_json(const ContentBlock& b);
ContentBlock block_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DocumentManifest& m);
DocumentManifest manifest_from_json(const nlohmann::json& j);
DocumentManifest read_manifest(const std::filesystem::path& path);

// Problems with a manifest against its emitted source; empty when all invariants hold.
std::vector<std::string> check_manifest(const DocumentManifest& m, const std::string& tex_source);

}  // namespace fbench::synthdoc
