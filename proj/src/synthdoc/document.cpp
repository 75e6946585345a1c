#include "fbench/synthdoc/document.hpp"

#include <algorithm>
#include <cstdio>

#include "fbench/errors.hpp"
#include "fbench/util/fs.hpp"
#include "fbench/util/hash.hpp"
#include "fbench/util/parallel.hpp"
#include "fbench/util/text.hpp"

namespace fbench::synthdoc {

namespace stdfs = std::filesystem;
using nlohmann::json;

std::string to_string(BlockKind k) {
  switch (k) {
    case BlockKind::plain_text: return "plain_text";
    case BlockKind::text_with_inline: return "text_with_inline";
    case BlockKind::display_formula: return "display_formula";
  }
  return "plain_text";
}

std::string to_string(Placement p) { return p == Placement::inline_math ? "inline" : "display"; }

BlockKind block_kind_from_string(std::string_view s) {
  for (auto k : {BlockKind::plain_text, BlockKind::text_with_inline, BlockKind::display_formula})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown block kind: " + std::string(s));
}

Placement placement_from_string(std::string_view s) {
  if (s == "inline") return Placement::inline_math;
  if (s == "display") return Placement::display_math;
  throw std::invalid_argument("unknown placement: " + std::string(s));
}

json GeneratorConfig::to_json() const {
  return json{{"inline_max_pt", inline_max_pt},
              {"attempts_per_slot", attempts_per_slot},
              {"failed_slots_to_stop", failed_slots_to_stop},
              {"overflow_rejections_per_slot", overflow_rejections_per_slot},
              {"inline_attempts", inline_attempts},
              {"min_sentences", min_sentences},
              {"max_sentences", max_sentences},
              {"max_inline_per_block", max_inline_per_block},
              {"overfull_hbox_tolerance_pt", warnings.overfull_hbox_tolerance_pt}};
}

GeneratorConfig GeneratorConfig::from_json(const json& j) {
  GeneratorConfig c;
  c.inline_max_pt = j.value("inline_max_pt", c.inline_max_pt);
  c.attempts_per_slot = j.value("attempts_per_slot", c.attempts_per_slot);
  c.failed_slots_to_stop = j.value("failed_slots_to_stop", c.failed_slots_to_stop);
  c.overflow_rejections_per_slot = j.value("overflow_rejections_per_slot", c.overflow_rejections_per_slot);
  c.inline_attempts = j.value("inline_attempts", c.inline_attempts);
  c.min_sentences = j.value("min_sentences", c.min_sentences);
  c.max_sentences = j.value("max_sentences", c.max_sentences);
  c.max_inline_per_block = j.value("max_inline_per_block", c.max_inline_per_block);
  c.warnings.overfull_hbox_tolerance_pt = j.value("overfull_hbox_tolerance_pt", c.warnings.overfull_hbox_tolerance_pt);
  return c;
}

namespace {

std::string marker(std::size_t i) { return "{{" + std::to_string(i) + "}}"; }

// Splits inline-block text into literal pieces and marker indices, in order.
struct Piece {
  std::string literal;
  std::optional<std::size_t> formula;
};

std::vector<Piece> split_markers(const std::string& text) {
  std::vector<Piece> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto open = text.find("{{", pos);
    if (open == std::string::npos) break;
    auto close = text.find("}}", open + 2);
    if (close == std::string::npos) break;
    auto digits = text.substr(open + 2, close - open - 2);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      out.push_back({text.substr(pos, open + 2 - pos), std::nullopt});
      pos = open + 2;
      continue;
    }
    if (open > pos) out.push_back({text.substr(pos, open - pos), std::nullopt});
    out.push_back({"", std::stoul(digits)});
    pos = close + 2;
  }
  if (pos < text.size()) out.push_back({text.substr(pos), std::nullopt});
  return out;
}

}  // namespace

bool block_invariants_hold(const ContentBlock& b) {
  switch (b.kind) {
    case BlockKind::plain_text: {
      const auto pieces = split_markers(b.text);
      return b.formulas.empty() && b.language && !text::trim(b.text).empty() &&
             std::none_of(pieces.begin(), pieces.end(), [](const Piece& p) { return p.formula.has_value(); });
    }
    case BlockKind::display_formula:
      return b.formulas.size() == 1 && b.formulas[0].placement == Placement::display_math && b.text.empty() &&
             !b.language;
    case BlockKind::text_with_inline: {
      if (b.formulas.empty() || !b.language) return false;
      for (const auto& f : b.formulas)
        if (f.placement != Placement::inline_math) return false;
      std::size_t next = 0;
      for (const auto& p : split_markers(b.text)) {
        if (!p.formula) continue;
        if (*p.formula != next) return false;
        ++next;
      }
      return next == b.formulas.size();
    }
  }
  return false;
}

std::vector<GroundTruthFormula> flatten_ground_truth(const std::vector<ContentBlock>& blocks) {
  std::vector<GroundTruthFormula> gt;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    for (const auto& f : blocks[bi].formulas)
      gt.push_back({gt.size(), f.latex, f.placement, f.formula_id, bi});
  }
  return gt;
}

std::string render_block(const ContentBlock& b) {
  switch (b.kind) {
    case BlockKind::plain_text: return escape_tex_text(b.text);
    case BlockKind::display_formula: return "\\[ " + b.formulas.at(0).latex + " \\]";
    case BlockKind::text_with_inline: {
      std::string s;
      for (const auto& p : split_markers(b.text)) {
        if (p.formula) s += "$" + b.formulas.at(*p.formula).latex + "$";
        else s += escape_tex_text(p.literal);
      }
      return s;
    }
  }
  return {};
}

std::string render_document(const LayoutConfig& layout, const std::vector<ContentBlock>& blocks) {
  std::string s = render_preamble(layout);
  for (const auto& b : blocks) {
    s += '\n';
    s += render_block(b);
    s += '\n';
  }
  s += "\n\\end{document}\n";
  return s;
}

FormulaPool::FormulaPool(const corpus::Corpus& c) : corpus_(c) {
  free_.resize(c.records.size());
  for (std::size_t i = 0; i < free_.size(); ++i) free_[i] = i;
}

std::vector<std::size_t> FormulaPool::draw(Rng& rng, std::size_t n) {
  n = std::min(n, free_.size());
  std::vector<std::size_t> picked;
  while (picked.size() < n) {
    auto idx = free_[rng.below(free_.size())];
    if (std::find(picked.begin(), picked.end(), idx) == picked.end()) picked.push_back(idx);
  }
  return picked;
}

void FormulaPool::take(std::size_t idx) {
  auto it = std::lower_bound(free_.begin(), free_.end(), idx);
  if (it != free_.end() && *it == idx) free_.erase(it);
}

void FormulaPool::give_back(std::size_t idx) {
  auto it = std::lower_bound(free_.begin(), free_.end(), idx);
  if (it == free_.end() || *it != idx) free_.insert(it, idx);
}

namespace {

std::vector<std::size_t> indices_of(const ContentBlock& b, const corpus::Corpus& c) {
  std::vector<std::size_t> out;
  for (const auto& f : b.formulas)
    for (std::size_t i = 0; i < c.records.size(); ++i)
      if (c.records[i].content_hash == f.formula_id) {
        out.push_back(i);
        break;
      }
  return out;
}

}  // namespace

bool FormulaPool::is_free(std::size_t idx) const { return std::binary_search(free_.begin(), free_.end(), idx); }

InlineSelector::InlineSelector(FormulaPool& pool, InlineProbe& probe, const LayoutConfig& layout, Rng order_rng,
                               double max_pt, std::size_t chunk)
    : pool_(pool), probe_(probe), layout_(layout), max_pt_(max_pt), chunk_(chunk) {
  order_.resize(pool.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  order_rng.shuffle(order_);
}

void InlineSelector::measure_ahead() {
  std::vector<std::size_t> idx;
  std::vector<std::string> latex;
  for (std::size_t c = cursor_; c < order_.size() && idx.size() < chunk_; ++c) {
    if (!pool_.is_free(order_[c]) || heights_.count(order_[c])) continue;
    idx.push_back(order_[c]);
    latex.push_back(pool_.record(order_[c]).latex);
  }
  auto h = probe_.measure(latex, layout_);
  for (std::size_t i = 0; i < idx.size(); ++i) heights_[idx[i]] = h[i];
}

std::optional<double> InlineSelector::height(std::size_t idx) const {
  auto it = heights_.find(idx);
  return it == heights_.end() ? std::nullopt : it->second;
}

std::optional<std::size_t> InlineSelector::next(int budget, int& attempts) {
  while (attempts < budget && cursor_ < order_.size()) {
    const auto idx = order_[cursor_];
    if (!pool_.is_free(idx)) {
      ++cursor_;
      continue;
    }
    if (!heights_.count(idx)) measure_ahead();
    ++cursor_;
    ++attempts;
    const auto& h = heights_[idx];
    if (h && *h <= max_pt_) return idx;
  }
  return std::nullopt;
}

ContentBlock make_block(BlockKind kind, Rng& rng, FormulaPool& pool, InlineSelector& inline_sel,
                        const GeneratorConfig& cfg) {
  ContentBlock b;
  b.kind = kind;
  if (kind == BlockKind::display_formula) {
    auto d = pool.draw(rng, 1);
    if (d.empty()) throw GenerationError("formula pool exhausted", 0);
    pool.take(d[0]);
    const auto& r = pool.record(d[0]);
    b.formulas.push_back({r.content_hash, r.latex, Placement::display_math});
    return b;
  }

  const Language lang = kLanguages[rng.below(std::size(kLanguages))];
  b.language = lang;
  const auto n_sent = static_cast<std::size_t>(rng.uniform_int(cfg.min_sentences, cfg.max_sentences));
  auto sentences = generate_sentences(rng, lang, n_sent);
  if (kind == BlockKind::plain_text) {
    b.text = text::join(sentences, " ");
    return b;
  }

  // Gaps 0..n_sent are before, between and after sentences.
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(rng.uniform_int(1, cfg.max_inline_per_block)), n_sent + 1);
  std::vector<std::size_t> gaps(n_sent + 1);
  for (std::size_t i = 0; i < gaps.size(); ++i) gaps[i] = i;
  rng.shuffle(gaps);
  gaps.resize(k);
  std::sort(gaps.begin(), gaps.end());

  std::vector<std::size_t> taken;
  for (std::size_t j = 0; j < k; ++j) {
    int attempts = 0;
    auto chosen = inline_sel.next(cfg.inline_attempts, attempts);
    if (!chosen) {
      for (auto t : taken) pool.give_back(t);
      throw GenerationError("no inline formula within " + text::format_fixed(cfg.inline_max_pt, 2) + "pt after " +
                                std::to_string(attempts) + " attempts",
                            attempts);
    }
    pool.take(*chosen);
    taken.push_back(*chosen);
    const auto& r = pool.record(*chosen);
    b.formulas.push_back({r.content_hash, r.latex, Placement::inline_math});
  }

  std::vector<std::string> parts;
  std::size_t next = 0;
  for (std::size_t g = 0; g <= n_sent; ++g) {
    if (next < k && gaps[next] == g) parts.push_back(marker(next++));
    if (g < n_sent) parts.push_back(sentences[g]);
  }
  b.text = text::join(parts, " ");
  return b;
}

ContentBlock next_block(Rng& rng, FormulaPool& pool, InlineSelector& inline_sel, const GeneratorConfig& cfg) {
  const auto kind = static_cast<BlockKind>(rng.below(3));
  return make_block(kind, rng, pool, inline_sel, cfg);
}

std::uint64_t document_seed(std::uint64_t batch_seed, const std::string& doc_id) {
  return derive_seed(batch_seed, "doc/" + doc_id);
}

std::string document_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "doc_%04zu", index);
  return buf;
}

DocumentManifest build_document(const std::string& doc_id, std::uint64_t seed, const corpus::Corpus& corpus,
                                LatexCompiler& compiler, const stdfs::path& out_dir, const GeneratorConfig& cfg) {
  if (corpus.records.empty()) throw PreconditionError("corpus is empty");
  Rng root(seed);
  Rng layout_rng = root.fork("layout");
  Rng block_rng = root.fork("blocks");

  DocumentManifest m;
  m.doc_id = doc_id;
  m.seed = seed;
  m.layout = sample_layout(layout_rng);

  const stdfs::path work = out_dir / ".build";
  stdfs::remove_all(work);
  InlineProbe probe(compiler, work / "probe");
  FormulaPool pool(corpus);
  InlineSelector inline_sel(pool, probe, m.layout, root.fork("inline-order"), cfg.inline_max_pt);
  std::string pdf;
  std::size_t compiles = 0;

  int failed_slots = 0;
  while (failed_slots < cfg.failed_slots_to_stop) {
    bool placed = false;
    int overflows = 0;
    int attempts = 0;
    while (attempts < cfg.attempts_per_slot) {
      ++attempts;
      ContentBlock cand;
      try {
        cand = next_block(block_rng, pool, inline_sel, cfg);
      } catch (const GenerationError&) {
        continue;
      }
      m.blocks.push_back(cand);
      auto report = compile_check(render_document(m.layout, m.blocks), compiler, work / "doc", cfg.warnings);
      ++compiles;
      if (is_clean(report)) {
        placed = true;
        m.compile_report = std::move(report);
        pdf = fs::read_file(work / "doc" / "doc.pdf");
        break;
      }
      m.blocks.pop_back();
      for (auto idx : indices_of(cand, corpus)) pool.give_back(idx);
      if (report.success && report.page_count > 1 && cfg.overflow_rejections_per_slot > 0 &&
          ++overflows >= cfg.overflow_rejections_per_slot)
        break;
    }
    if (placed) {
      failed_slots = 0;
    } else {
      if (m.blocks.empty()) {
        stdfs::remove_all(work);
        throw GenerationError("no block fits on an empty page for " + doc_id, attempts);
      }
      ++failed_slots;
    }
  }

  m.ground_truth = flatten_ground_truth(m.blocks);
  m.pdf_hash = hash::sha256_hex(pdf);
  m.compile_count = compiles + probe.compiles();
  fs::write_file_atomic(out_dir / "doc.tex", render_document(m.layout, m.blocks));
  fs::write_file_atomic(out_dir / "doc.pdf", pdf);
  fs::write_json(out_dir / "manifest.json", to_json(m));
  stdfs::remove_all(work);
  return m;
}

json to_json(const ContentBlock& b) {
  json j{{"kind", to_string(b.kind)}};
  if (b.language) j["language"] = to_string(*b.language);
  if (b.kind != BlockKind::display_formula) j["text"] = b.text;
  json fs = json::array();
  for (const auto& f : b.formulas)
    fs.push_back({{"formula_id", f.formula_id}, {"latex", f.latex}, {"placement", to_string(f.placement)}});
  j["formulas"] = std::move(fs);
  return j;
}

ContentBlock block_from_json(const json& j) {
  ContentBlock b;
  b.kind = block_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("language")) b.language = language_from_string(j.at("language").get<std::string>());
  b.text = j.value("text", std::string());
  for (const auto& f : j.at("formulas"))
    b.formulas.push_back({f.at("formula_id").get<std::string>(), f.at("latex").get<std::string>(),
                          placement_from_string(f.at("placement").get<std::string>())});
  return b;
}

json to_json(const DocumentManifest& m) {
  json blocks = json::array();
  for (const auto& b : m.blocks) blocks.push_back(to_json(b));
  json gt = json::array();
  for (const auto& g : m.ground_truth)
    gt.push_back({{"gt_index", g.gt_index},
                  {"latex", g.latex},
                  {"placement", to_string(g.placement)},
                  {"formula_id", g.formula_id},
                  {"block_index", g.block_index}});
  return json{{"doc_id", m.doc_id},
              {"seed", m.seed},
              {"layout", to_json(m.layout)},
              {"blocks", std::move(blocks)},
              {"ground_truth", std::move(gt)},
              {"pdf_hash", m.pdf_hash},
              {"compile_report", to_json(m.compile_report)},
              {"compile_count", m.compile_count}};
}

DocumentManifest manifest_from_json(const json& j) {
  DocumentManifest m;
  m.doc_id = j.at("doc_id").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.layout = layout_from_json(j.at("layout"));
  for (const auto& b : j.at("blocks")) m.blocks.push_back(block_from_json(b));
  for (const auto& g : j.at("ground_truth"))
    m.ground_truth.push_back({g.at("gt_index").get<std::size_t>(), g.at("latex").get<std::string>(),
                              placement_from_string(g.at("placement").get<std::string>()),
                              g.at("formula_id").get<std::string>(), g.value("block_index", std::size_t{0})});
  m.pdf_hash = j.value("pdf_hash", std::string());
  if (j.contains("compile_report")) m.compile_report = compile_report_from_json(j.at("compile_report"));
  m.compile_count = j.value("compile_count", std::size_t{0});
  return m;
}

BatchResult generate_documents(std::size_t count, std::uint64_t batch_seed, const corpus::Corpus& corpus,
                               LatexCompiler& compiler, const stdfs::path& out_root, const GeneratorConfig& cfg,
                               unsigned workers, bool skip_existing) {
  BatchResult res;
  std::vector<std::optional<DocumentManifest>> built(count);
  std::vector<std::string> errors(count);
  std::vector<char> reused(count, 0);
  parallel_for(count, workers, [&](std::size_t i) {
    const auto id = document_id(i);
    const auto seed = document_seed(batch_seed, id);
    const auto dir = out_root / id;
    if (skip_existing) {
      if (auto m = load_complete_document(dir, seed)) {
        built[i] = std::move(*m);
        reused[i] = 1;
        return;
      }
    }
    try {
      built[i] = build_document(id, seed, corpus, compiler, dir, cfg);
    } catch (const GenerationError& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < count; ++i) {
    if (built[i]) {
      if (reused[i]) res.reused.push_back(built[i]->doc_id);
      res.manifests.push_back(std::move(*built[i]));
    } else {
      res.failures.emplace_back(document_id(i), errors[i]);
    }
  }
  return res;
}

std::optional<DocumentManifest> load_complete_document(const stdfs::path& dir, std::uint64_t seed) {
  std::error_code ec;
  if (!stdfs::exists(dir / "manifest.json", ec) || !stdfs::exists(dir / "doc.tex", ec) ||
      !stdfs::exists(dir / "doc.pdf", ec))
    return std::nullopt;
  try {
    auto m = read_manifest(dir / "manifest.json");
    if (m.seed != seed) return std::nullopt;
    if (hash::sha256_hex(fs::read_file(dir / "doc.pdf")) != m.pdf_hash) return std::nullopt;
    if (!check_manifest(m, fs::read_file(dir / "doc.tex")).empty()) return std::nullopt;
    return m;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

DocumentManifest read_manifest(const stdfs::path& path) { return manifest_from_json(fs::read_json(path)); }

std::vector<std::string> check_manifest(const DocumentManifest& m, const std::string& tex_source) {
  std::vector<std::string> problems;
  if (!within_ranges(m.layout)) problems.push_back("layout outside sampling ranges");
  for (std::size_t i = 0; i < m.blocks.size(); ++i)
    if (!block_invariants_hold(m.blocks[i])) problems.push_back("block " + std::to_string(i) + " violates its kind");
  if (flatten_ground_truth(m.blocks) != m.ground_truth) problems.push_back("ground_truth differs from flattened blocks");
  for (std::size_t i = 0; i < m.ground_truth.size(); ++i) {
    if (m.ground_truth[i].gt_index != i) problems.push_back("gt_index not contiguous at " + std::to_string(i));
    if (tex_source.find(m.ground_truth[i].latex) == std::string::npos)
      problems.push_back("formula " + std::to_string(i) + " not verbatim in source");
  }
  return problems;
}

}  // namespace fbench::synthdoc
