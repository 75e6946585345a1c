#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>

#include "fbench/study/design.hpp"
#include "fbench/synthdoc/compiler.hpp"

namespace fbench::study {

// Shell template with {pdf} and {png} replaced by quoted paths; the command
// rasterizes the first PDF page into the PNG.
struct ImageConverter {
  std::string command;
  std::chrono::seconds timeout{60};
};

// Explicit setting first, then $FBENCH_PDF2PNG.
std::optional<ImageConverter> discover_converter(const std::string& configured = {});

// Cropped single-page document holding the formula in display style.
std::string render_formula_tex(const std::string& latex);

struct RenderOutcome {
  bool rendered = false;  // false = placeholder written
  std::string reason;
};

// Writes `png`; on any failure writes the placeholder instead.
RenderOutcome render_formula_png(const std::string& latex, synthdoc::LatexCompiler& compiler,
                                 const std::optional<ImageConverter>& converter, const std::filesystem::path& png);

struct RenderedPair {
  RenderOutcome gt;
  RenderOutcome extracted;
};

RenderedPair render_pair_images(const StudyPair& pair, synthdoc::LatexCompiler& compiler,
                                const std::optional<ImageConverter>& converter, const std::filesystem::path& image_dir);

// Standard "render failed" image (PNG bytes, deterministic).
std::string placeholder_png();
// Minimal RGB PNG encoder over libpng.
std::string encode_png(unsigned width, unsigned height, const std::vector<unsigned char>& rgb);

}  // namespace fbench::study
