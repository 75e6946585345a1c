#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "fbench/util/rng.hpp"

namespace fbench::synthdoc {

enum class DocumentClass { article, report, book };
enum class FontFamily { computer_modern, cm_sans, cm_dunhill, cm_fibonacci };

struct Margins {
  int top = 72, bottom = 72, left = 72, right = 72;  // points
  bool operator==(const Margins&) const = default;
};

struct LayoutConfig {
  DocumentClass document_class = DocumentClass::article;
  FontFamily font_family = FontFamily::computer_modern;
  Margins margin_pt;
  int font_size_pt = 10;
  double line_spacing = 1.0;
  int paragraph_indent_pt = 0;
  int columns = 1;
  int column_sep_pt = 0;  // 0 when single column

  bool operator==(const LayoutConfig&) const = default;
};

// Sampling ranges.
inline constexpr int kMarginMin = 36, kMarginMax = 85;
inline constexpr double kLineSpacingMin = 1.0, kLineSpacingMax = 1.5;
inline constexpr int kIndents[] = {0, 15, 20};
inline constexpr int kFontSizes[] = {10, 11, 12};
inline constexpr int kColumnSepMin = 10, kColumnSepMax = 30;

LayoutConfig sample_layout(Rng& rng);
bool within_ranges(const LayoutConfig& l);

// Everything up to and including \begin{document}.
std::string render_preamble(const LayoutConfig& l);

std::string to_string(DocumentClass c);
std::string to_string(FontFamily f);
nlohmann::json to_json(const LayoutConfig& l);
LayoutConfig layout_from_json(const nlohmann::json& j);

}  // namespace fbench::synthdoc
