#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbench/synthdoc/document.hpp"

namespace fbench::adapters {

struct PerturbationSpec {
  double drop_formula_rate = 0.0;
  double strip_delimiter_rate = 0.0;
  double merge_adjacent_rate = 0.0;
  bool reorder_columns = false;
  double unicode_substitution_rate = 0.0;
  double typo_rate_per_formula = 0.0;
  double whitespace_jitter_rate = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const PerturbationSpec&) const = default;
  bool is_identity() const;
  // Throws ConfigError when a rate is outside [0, 1].
  void validate() const;
  nlohmann::json to_json() const;
  static PerturbationSpec from_json(const nlohmann::json& j);
};

struct Typo {
  std::size_t pos = 0;  // byte offset into the formula after earlier edits
  std::string from, to;
  bool operator==(const Typo&) const = default;
};

// Perturbations applied to one ground-truth formula.
struct FormulaPerturbation {
  std::size_t gt_index = 0;
  bool dropped = false;
  bool unicode_substituted = false;
  std::optional<Typo> typo;
  bool whitespace_jittered = false;
  bool delimiters_stripped = false;
  std::string emitted;  // formula body as written to the output

  bool operator==(const FormulaPerturbation&) const = default;
};

struct PerturbationLedger {
  std::vector<FormulaPerturbation> formulas;   // perturbed formulas only, by gt_index
  std::vector<std::vector<std::size_t>> merged_groups;  // consecutive display formulas sharing one environment
  std::vector<std::size_t> paragraph_order;    // block indices in output order; empty when not reordered

  bool operator==(const PerturbationLedger&) const = default;
  bool names(std::size_t gt_index) const;
  std::vector<std::size_t> dropped() const;
  nlohmann::json to_json() const;
  static PerturbationLedger from_json(const nlohmann::json& j);
};

struct PerturbedText {
  std::string text;
  PerturbationLedger ledger;
};

// Mock parser output: blocks joined by blank lines, `$$..$$` display, `$..$` inline.
std::string identity_rendering(const synthdoc::DocumentManifest& m);
PerturbedText perturb(const synthdoc::DocumentManifest& m, const PerturbationSpec& spec);
// Rebuilds the output from the manifest and a ledger alone.
std::string apply_ledger(const synthdoc::DocumentManifest& m, const PerturbationLedger& ledger);

// Replaces whole LaTeX commands with Unicode glyphs (e.g. \alpha -> α).
std::string unicode_substitute(const std::string& latex);

}  // namespace fbench::adapters
