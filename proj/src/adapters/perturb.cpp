#include "fbench/adapters/perturb.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "fbench/errors.hpp"
#include "fbench/util/rng.hpp"

namespace fbench::adapters {

using nlohmann::json;
using synthdoc::BlockKind;
using synthdoc::DocumentManifest;

bool PerturbationSpec::is_identity() const {
  return drop_formula_rate == 0 && strip_delimiter_rate == 0 && merge_adjacent_rate == 0 && !reorder_columns &&
         unicode_substitution_rate == 0 && typo_rate_per_formula == 0 && whitespace_jitter_rate == 0;
}

void PerturbationSpec::validate() const {
  const std::pair<const char*, double> rates[] = {{"drop_formula_rate", drop_formula_rate},
                                                  {"strip_delimiter_rate", strip_delimiter_rate},
                                                  {"merge_adjacent_rate", merge_adjacent_rate},
                                                  {"unicode_substitution_rate", unicode_substitution_rate},
                                                  {"typo_rate_per_formula", typo_rate_per_formula},
                                                  {"whitespace_jitter_rate", whitespace_jitter_rate}};
  for (const auto& [name, v] : rates)
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must be within [0, 1]");
}

json PerturbationSpec::to_json() const {
  return json{{"drop_formula_rate", drop_formula_rate},
              {"strip_delimiter_rate", strip_delimiter_rate},
              {"merge_adjacent_rate", merge_adjacent_rate},
              {"reorder_columns", reorder_columns},
              {"unicode_substitution_rate", unicode_substitution_rate},
              {"typo_rate_per_formula", typo_rate_per_formula},
              {"whitespace_jitter_rate", whitespace_jitter_rate},
              {"seed", seed}};
}

PerturbationSpec PerturbationSpec::from_json(const json& j) {
  static const char* known[] = {"drop_formula_rate",         "strip_delimiter_rate",  "merge_adjacent_rate",
                                "reorder_columns",           "unicode_substitution_rate", "typo_rate_per_formula",
                                "whitespace_jitter_rate",    "seed"};
  if (!j.is_object()) throw ConfigError("perturbation spec must be an object");
  for (const auto& [k, _] : j.items())
    if (std::find(std::begin(known), std::end(known), k) == std::end(known))
      throw ConfigError("unknown perturbation field: " + k);
  PerturbationSpec s;
  try {
    s.drop_formula_rate = j.value("drop_formula_rate", 0.0);
    s.strip_delimiter_rate = j.value("strip_delimiter_rate", 0.0);
    s.merge_adjacent_rate = j.value("merge_adjacent_rate", 0.0);
    s.reorder_columns = j.value("reorder_columns", false);
    s.unicode_substitution_rate = j.value("unicode_substitution_rate", 0.0);
    s.typo_rate_per_formula = j.value("typo_rate_per_formula", 0.0);
    s.whitespace_jitter_rate = j.value("whitespace_jitter_rate", 0.0);
    s.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::type_error& e) {
    throw ConfigError(std::string("perturbation spec: ") + e.what());
  }
  s.validate();
  return s;
}

bool PerturbationLedger::names(std::size_t gt_index) const {
  for (const auto& f : formulas)
    if (f.gt_index == gt_index) return true;
  for (const auto& g : merged_groups)
    if (std::find(g.begin(), g.end(), gt_index) != g.end()) return true;
  return false;
}

std::vector<std::size_t> PerturbationLedger::dropped() const {
  std::vector<std::size_t> out;
  for (const auto& f : formulas)
    if (f.dropped) out.push_back(f.gt_index);
  return out;
}

json PerturbationLedger::to_json() const {
  json fs = json::array();
  for (const auto& f : formulas) {
    json e{{"gt_index", f.gt_index},
           {"dropped", f.dropped},
           {"unicode_substituted", f.unicode_substituted},
           {"whitespace_jittered", f.whitespace_jittered},
           {"delimiters_stripped", f.delimiters_stripped},
           {"emitted", f.emitted}};
    e["typo"] = f.typo ? json{{"pos", f.typo->pos}, {"from", f.typo->from}, {"to", f.typo->to}} : json(nullptr);
    fs.push_back(std::move(e));
  }
  return json{{"formulas", std::move(fs)}, {"merged_groups", merged_groups}, {"paragraph_order", paragraph_order}};
}

PerturbationLedger PerturbationLedger::from_json(const json& j) {
  PerturbationLedger l;
  for (const auto& e : j.at("formulas")) {
    FormulaPerturbation f;
    f.gt_index = e.at("gt_index").get<std::size_t>();
    f.dropped = e.at("dropped").get<bool>();
    f.unicode_substituted = e.at("unicode_substituted").get<bool>();
    f.whitespace_jittered = e.at("whitespace_jittered").get<bool>();
    f.delimiters_stripped = e.at("delimiters_stripped").get<bool>();
    f.emitted = e.at("emitted").get<std::string>();
    if (!e.at("typo").is_null())
      f.typo = Typo{e["typo"].at("pos").get<std::size_t>(), e["typo"].at("from").get<std::string>(),
                    e["typo"].at("to").get<std::string>()};
    l.formulas.push_back(std::move(f));
  }
  l.merged_groups = j.at("merged_groups").get<std::vector<std::vector<std::size_t>>>();
  l.paragraph_order = j.at("paragraph_order").get<std::vector<std::size_t>>();
  return l;
}

std::string unicode_substitute(const std::string& latex) {
  static const std::map<std::string, std::string> glyphs = {
      {"alpha", "α"},   {"beta", "β"},      {"gamma", "γ"},     {"delta", "δ"},   {"epsilon", "ϵ"},
      {"varepsilon", "ε"}, {"theta", "θ"},  {"lambda", "λ"},    {"mu", "μ"},      {"pi", "π"},
      {"rho", "ρ"},     {"sigma", "σ"},     {"tau", "τ"},       {"phi", "ϕ"},     {"varphi", "φ"},
      {"omega", "ω"},   {"Gamma", "Γ"},     {"Delta", "Δ"},     {"Theta", "Θ"},   {"Lambda", "Λ"},
      {"Pi", "Π"},      {"Sigma", "Σ"},     {"Phi", "Φ"},       {"Omega", "Ω"},   {"infty", "∞"},
      {"pm", "±"},      {"mp", "∓"},        {"times", "×"},     {"cdot", "·"},    {"leq", "≤"},
      {"le", "≤"},      {"geq", "≥"},       {"ge", "≥"},        {"neq", "≠"},     {"ne", "≠"},
      {"approx", "≈"},  {"equiv", "≡"},     {"to", "→"},        {"rightarrow", "→"}, {"leftarrow", "←"},
      {"Rightarrow", "⇒"}, {"in", "∈"},     {"notin", "∉"},     {"subset", "⊂"},  {"subseteq", "⊆"},
      {"cup", "∪"},     {"cap", "∩"},       {"partial", "∂"},   {"nabla", "∇"},   {"sum", "∑"},
      {"prod", "∏"},    {"int", "∫"},       {"forall", "∀"},    {"exists", "∃"},  {"ldots", "…"},
      {"cdots", "⋯"},   {"mid", "∣"},       {"emptyset", "∅"},  {"circ", "∘"}};
  std::string out;
  std::size_t i = 0;
  while (i < latex.size()) {
    if (latex[i] == '\\' && i + 1 < latex.size() && std::isalpha(static_cast<unsigned char>(latex[i + 1]))) {
      std::size_t j = i + 1;
      while (j < latex.size() && std::isalpha(static_cast<unsigned char>(latex[j]))) ++j;
      auto it = glyphs.find(latex.substr(i + 1, j - i - 1));
      if (it != glyphs.end()) out += it->second;
      else out.append(latex, i, j - i);
      i = j;
    } else if (latex[i] == '\\' && i + 1 < latex.size()) {
      out.append(latex, i, 2);
      i += 2;
    } else {
      out += latex[i++];
    }
  }
  return out;
}

namespace {

std::optional<Typo> inject_typo(std::string& s, Rng& rng) {
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (std::isalnum(static_cast<unsigned char>(s[i]))) positions.push_back(i);
  if (positions.empty()) return std::nullopt;
  static const std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
  const auto pos = rng.pick(positions);
  char to;
  do {
    to = alphabet[rng.below(alphabet.size())];
  } while (to == s[pos]);
  Typo t{pos, std::string(1, s[pos]), std::string(1, to)};
  s[pos] = to;
  return t;
}

// Removes some spaces not following a letter and adds some after structural characters.
std::string jitter_whitespace(const std::string& s, Rng& rng) {
  static const std::string structural = "{}()+-=,^_";
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == ' ' && !out.empty() && !std::isalpha(static_cast<unsigned char>(out.back())) && rng.bernoulli(0.5))
      continue;
    out += c;
    const bool escaped = i > 0 && s[i - 1] == '\\';
    if (structural.find(c) != std::string::npos && !escaped && i + 1 < s.size() && s[i + 1] != ' ' &&
        rng.bernoulli(0.35))
      out += ' ';
  }
  return out;
}

std::string render_paragraph(const DocumentManifest& m, std::size_t bi,
                             const std::map<std::size_t, const FormulaPerturbation*>& pert,
                             const std::map<std::size_t, std::vector<std::size_t>>& group_at,
                             const std::vector<std::size_t>& gt_of_block_start) {
  const auto& b = m.blocks[bi];
  const std::size_t g0 = gt_of_block_start[bi];
  auto body = [&](std::size_t gi) -> std::pair<std::string, bool> {
    auto it = pert.find(gi);
    if (it == pert.end()) return {m.ground_truth[gi].latex, false};
    return {it->second->emitted, it->second->delimiters_stripped};
  };
  switch (b.kind) {
    case BlockKind::plain_text: return b.text;
    case BlockKind::display_formula: {
      auto git = group_at.find(g0);
      std::vector<std::size_t> members = git != group_at.end() ? git->second : std::vector<std::size_t>{g0};
      std::vector<std::string> bodies;
      for (auto gi : members) bodies.push_back(body(gi).first);
      std::string inner;
      for (std::size_t k = 0; k < bodies.size(); ++k) inner += (k ? " \\\\ " : "") + bodies[k];
      return body(members[0]).second ? inner : "$$" + inner + "$$";
    }
    case BlockKind::text_with_inline: {
      std::string out;
      std::size_t pos = 0;
      const auto& t = b.text;
      while (pos < t.size()) {
        auto open = t.find("{{", pos);
        auto close = open == std::string::npos ? std::string::npos : t.find("}}", open + 2);
        if (close == std::string::npos) break;
        const auto digits = t.substr(open + 2, close - open - 2);
        if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
          out.append(t, pos, open + 2 - pos);
          pos = open + 2;
          continue;
        }
        out.append(t, pos, open - pos);
        const std::size_t gi = g0 + std::stoul(digits);
        pos = close + 2;
        auto it = pert.find(gi);
        if (it != pert.end() && it->second->dropped) {
          // Drop the marker and one of its neighbouring spaces.
          if (!out.empty() && out.back() == ' ' && (pos >= t.size() || t[pos] == ' ')) out.pop_back();
          else if (out.empty() && pos < t.size() && t[pos] == ' ') ++pos;
          continue;
        }
        auto [f, stripped] = body(gi);
        out += stripped ? f : "$" + f + "$";
      }
      if (pos < t.size()) out.append(t, pos);
      return out;
    }
  }
  return {};
}

std::vector<std::size_t> block_gt_starts(const DocumentManifest& m) {
  std::vector<std::size_t> starts(m.blocks.size());
  std::size_t g = 0;
  for (std::size_t bi = 0; bi < m.blocks.size(); ++bi) {
    starts[bi] = g;
    g += m.blocks[bi].formulas.size();
  }
  return starts;
}

// Block indices that start an output paragraph, in document order.
std::vector<std::size_t> paragraph_blocks(const DocumentManifest& m, const std::map<std::size_t, const FormulaPerturbation*>& pert,
                                          const std::map<std::size_t, std::size_t>& group_member_of,
                                          const std::vector<std::size_t>& starts) {
  std::vector<std::size_t> out;
  for (std::size_t bi = 0; bi < m.blocks.size(); ++bi) {
    if (m.blocks[bi].kind == BlockKind::display_formula) {
      const auto gi = starts[bi];
      auto it = pert.find(gi);
      if (it != pert.end() && it->second->dropped) continue;
      auto gm = group_member_of.find(gi);
      if (gm != group_member_of.end() && gm->second != gi) continue;
    }
    out.push_back(bi);
  }
  return out;
}

}  // namespace

std::string apply_ledger(const DocumentManifest& m, const PerturbationLedger& ledger) {
  std::map<std::size_t, const FormulaPerturbation*> pert;
  for (const auto& f : ledger.formulas) pert[f.gt_index] = &f;
  std::map<std::size_t, std::vector<std::size_t>> group_at;
  std::map<std::size_t, std::size_t> member_of;
  for (const auto& g : ledger.merged_groups) {
    if (g.empty()) continue;
    group_at[g.front()] = g;
    for (auto gi : g) member_of[gi] = g.front();
  }
  const auto starts = block_gt_starts(m);
  auto paras = paragraph_blocks(m, pert, member_of, starts);
  if (!ledger.paragraph_order.empty()) paras = ledger.paragraph_order;
  std::string out;
  for (std::size_t k = 0; k < paras.size(); ++k) {
    if (k) out += "\n\n";
    out += render_paragraph(m, paras[k], pert, group_at, starts);
  }
  out += '\n';
  return out;
}

std::string identity_rendering(const DocumentManifest& m) { return apply_ledger(m, PerturbationLedger{}); }

PerturbedText perturb(const DocumentManifest& m, const PerturbationSpec& spec) {
  spec.validate();
  const Rng root(derive_seed(spec.seed, "perturb/" + m.doc_id));
  PerturbationLedger ledger;
  std::vector<FormulaPerturbation> all(m.ground_truth.size());
  for (std::size_t gi = 0; gi < m.ground_truth.size(); ++gi) {
    Rng r = root.fork("formula/" + std::to_string(gi));
    auto& f = all[gi];
    f.gt_index = gi;
    f.emitted = m.ground_truth[gi].latex;
    const bool drop = r.bernoulli(spec.drop_formula_rate);
    const bool uni = r.bernoulli(spec.unicode_substitution_rate);
    const bool typo = r.bernoulli(spec.typo_rate_per_formula);
    const bool jitter = r.bernoulli(spec.whitespace_jitter_rate);
    const bool strip = r.bernoulli(spec.strip_delimiter_rate);
    if (drop) {
      f.dropped = true;
      f.emitted.clear();
      continue;
    }
    if (uni) {
      auto s = unicode_substitute(f.emitted);
      f.unicode_substituted = s != f.emitted;
      f.emitted = std::move(s);
    }
    if (typo) f.typo = inject_typo(f.emitted, r);
    if (jitter) {
      auto s = jitter_whitespace(f.emitted, r);
      f.whitespace_jittered = s != f.emitted;
      f.emitted = std::move(s);
    }
    f.delimiters_stripped = strip;
  }

  // Merge runs of consecutive surviving display blocks.
  const auto starts = block_gt_starts(m);
  std::vector<std::size_t> current;
  auto flush = [&] {
    if (current.size() >= 2) ledger.merged_groups.push_back(current);
    current.clear();
  };
  for (std::size_t bi = 0; bi < m.blocks.size(); ++bi) {
    if (m.blocks[bi].kind != BlockKind::display_formula || all[starts[bi]].dropped) {
      flush();
      continue;
    }
    const auto gi = starts[bi];
    if (current.empty()) {
      current.push_back(gi);
      continue;
    }
    Rng r = root.fork("merge/" + std::to_string(gi));
    if (r.bernoulli(spec.merge_adjacent_rate)) {
      current.push_back(gi);
    } else {
      flush();
      current.push_back(gi);
    }
  }
  flush();
  for (const auto& g : ledger.merged_groups)
    for (auto gi : g) all[gi].delimiters_stripped = all[g.front()].delimiters_stripped;

  for (const auto& f : all)
    if (f.dropped || f.unicode_substituted || f.typo || f.whitespace_jittered || f.delimiters_stripped)
      ledger.formulas.push_back(f);

  if (spec.reorder_columns) {
    std::map<std::size_t, const FormulaPerturbation*> pert;
    for (const auto& f : ledger.formulas) pert[f.gt_index] = &f;
    std::map<std::size_t, std::size_t> member_of;
    for (const auto& g : ledger.merged_groups)
      for (auto gi : g) member_of[gi] = g.front();
    const auto paras = paragraph_blocks(m, pert, member_of, starts);
    const std::size_t half = (paras.size() + 1) / 2;
    for (std::size_t k = 0; k < half; ++k) {
      ledger.paragraph_order.push_back(paras[k]);
      if (half + k < paras.size()) ledger.paragraph_order.push_back(paras[half + k]);
    }
  }

  PerturbedText out;
  out.text = apply_ledger(m, ledger);
  out.ledger = std::move(ledger);
  return out;
}

}  // namespace fbench::adapters
