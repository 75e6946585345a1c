#include "fbench/synthdoc/layout.hpp"

#include <cmath>
#include <iterator>
#include <stdexcept>

#include "fbench/util/text.hpp"

namespace fbench::synthdoc {

using nlohmann::json;

LayoutConfig sample_layout(Rng& rng) {
  LayoutConfig l;
  l.document_class = static_cast<DocumentClass>(rng.below(3));
  l.font_family = static_cast<FontFamily>(rng.below(4));
  l.margin_pt.top = static_cast<int>(rng.uniform_int(kMarginMin, kMarginMax));
  l.margin_pt.bottom = static_cast<int>(rng.uniform_int(kMarginMin, kMarginMax));
  l.margin_pt.left = static_cast<int>(rng.uniform_int(kMarginMin, kMarginMax));
  l.margin_pt.right = static_cast<int>(rng.uniform_int(kMarginMin, kMarginMax));
  l.font_size_pt = kFontSizes[rng.below(std::size(kFontSizes))];
  l.line_spacing = static_cast<double>(rng.uniform_int(100, 150)) / 100.0;
  l.paragraph_indent_pt = kIndents[rng.below(std::size(kIndents))];
  l.columns = rng.bernoulli(0.5) ? 2 : 1;
  l.column_sep_pt = l.columns == 2 ? static_cast<int>(rng.uniform_int(kColumnSepMin, kColumnSepMax)) : 0;
  return l;
}

bool within_ranges(const LayoutConfig& l) {
  auto margin_ok = [](int m) { return m >= kMarginMin && m <= kMarginMax; };
  bool indent_ok = false, size_ok = false;
  for (int i : kIndents) indent_ok = indent_ok || i == l.paragraph_indent_pt;
  for (int s : kFontSizes) size_ok = size_ok || s == l.font_size_pt;
  const bool cols_ok = (l.columns == 1 && l.column_sep_pt == 0) ||
                       (l.columns == 2 && l.column_sep_pt >= kColumnSepMin && l.column_sep_pt <= kColumnSepMax);
  return margin_ok(l.margin_pt.top) && margin_ok(l.margin_pt.bottom) && margin_ok(l.margin_pt.left) &&
         margin_ok(l.margin_pt.right) && l.line_spacing >= kLineSpacingMin && l.line_spacing <= kLineSpacingMax &&
         indent_ok && size_ok && cols_ok;
}

std::string to_string(DocumentClass c) {
  switch (c) {
    case DocumentClass::article: return "article";
    case DocumentClass::report: return "report";
    case DocumentClass::book: return "book";
  }
  return "article";
}

std::string to_string(FontFamily f) {
  switch (f) {
    case FontFamily::computer_modern: return "computer_modern";
    case FontFamily::cm_sans: return "cm_sans";
    case FontFamily::cm_dunhill: return "cm_dunhill";
    case FontFamily::cm_fibonacci: return "cm_fibonacci";
  }
  return "computer_modern";
}

namespace {

DocumentClass class_from(const std::string& s) {
  if (s == "article") return DocumentClass::article;
  if (s == "report") return DocumentClass::report;
  if (s == "book") return DocumentClass::book;
  throw std::runtime_error("unknown document_class: " + s);
}

FontFamily family_from(const std::string& s) {
  for (auto f : {FontFamily::computer_modern, FontFamily::cm_sans, FontFamily::cm_dunhill, FontFamily::cm_fibonacci})
    if (to_string(f) == s) return f;
  throw std::runtime_error("unknown font_family: " + s);
}

}  // namespace

std::string render_preamble(const LayoutConfig& l) {
  std::string opts = std::to_string(l.font_size_pt) + "pt";
  if (l.columns == 2) opts += ",twocolumn";
  std::string s;
  s += "\\documentclass[" + opts + "]{" + to_string(l.document_class) + "}\n";
  s += "\\usepackage[utf8]{inputenc}\n";
  s += "\\usepackage{amsmath}\n";
  s += "\\usepackage{amssymb}\n";
  s += "\\usepackage[top=" + std::to_string(l.margin_pt.top) + "pt,bottom=" + std::to_string(l.margin_pt.bottom) +
       "pt,left=" + std::to_string(l.margin_pt.left) + "pt,right=" + std::to_string(l.margin_pt.right) +
       "pt]{geometry}\n";
  switch (l.font_family) {
    case FontFamily::computer_modern: break;
    case FontFamily::cm_sans: s += "\\renewcommand{\\familydefault}{\\sfdefault}\n"; break;
    case FontFamily::cm_dunhill: s += "\\renewcommand{\\rmdefault}{cmdh}\n"; break;
    case FontFamily::cm_fibonacci: s += "\\renewcommand{\\rmdefault}{cmfib}\n"; break;
  }
  s += "\\linespread{" + text::format_fixed(l.line_spacing, 2) + "}\n";
  s += "\\setlength{\\parindent}{" + std::to_string(l.paragraph_indent_pt) + "pt}\n";
  if (l.columns == 2) s += "\\setlength{\\columnsep}{" + std::to_string(l.column_sep_pt) + "pt}\n";
  s += "\\pagestyle{empty}\n";
  s += "\\tracinglostchars=1\n";
  s += "\\begin{document}\n";
  return s;
}

json to_json(const LayoutConfig& l) {
  return json{{"document_class", to_string(l.document_class)},
              {"font_family", to_string(l.font_family)},
              {"margin_pt",
               {{"top", l.margin_pt.top}, {"bottom", l.margin_pt.bottom}, {"left", l.margin_pt.left}, {"right", l.margin_pt.right}}},
              {"font_size_pt", l.font_size_pt},
              {"line_spacing", l.line_spacing},
              {"paragraph_indent_pt", l.paragraph_indent_pt},
              {"columns", l.columns},
              {"column_sep_pt", l.column_sep_pt}};
}

LayoutConfig layout_from_json(const json& j) {
  LayoutConfig l;
  l.document_class = class_from(j.at("document_class").get<std::string>());
  l.font_family = family_from(j.at("font_family").get<std::string>());
  const auto& m = j.at("margin_pt");
  l.margin_pt = {m.at("top").get<int>(), m.at("bottom").get<int>(), m.at("left").get<int>(), m.at("right").get<int>()};
  l.font_size_pt = j.at("font_size_pt").get<int>();
  l.line_spacing = j.at("line_spacing").get<double>();
  l.paragraph_indent_pt = j.at("paragraph_indent_pt").get<int>();
  l.columns = j.at("columns").get<int>();
  l.column_sep_pt = j.at("column_sep_pt").get<int>();
  return l;
}

}  // namespace fbench::synthdoc
