#include "fbench/study/render.hpp"

#include <png.h>

#include <array>
#include <csetjmp>
#include <cstdlib>
#include <map>
#include <stdexcept>

#include "fbench/util/fs.hpp"
#include "fbench/util/subprocess.hpp"
#include "fbench/util/text.hpp"

namespace fbench::study {

namespace stdfs = std::filesystem;

std::optional<ImageConverter> discover_converter(const std::string& configured) {
  if (!text::trim(configured).empty()) return ImageConverter{configured};
  if (const char* env = std::getenv("FBENCH_PDF2PNG"); env && *env) return ImageConverter{env};
  return std::nullopt;
}

std::string render_formula_tex(const std::string& latex) {
  return "\\documentclass{article}\n"
         "\\usepackage[utf8]{inputenc}\n"
         "\\usepackage{amsmath}\n"
         "\\usepackage{amssymb}\n"
         "\\begin{document}\n"
         "\\setbox0=\\hbox{$\\displaystyle\\begin{aligned}" +
         latex +
         "\\end{aligned}$}\n"
         "\\pdfpagewidth=\\dimexpr\\wd0+8pt\\relax\n"
         "\\pdfpageheight=\\dimexpr\\ht0+\\dp0+8pt\\relax\n"
         "\\pdfhorigin=4pt\n"
         "\\pdfvorigin=4pt\n"
         "\\shipout\\box0\n"
         "\\end{document}\n";
}

namespace {

void png_write_to_string(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}

void png_flush_noop(png_structp) {}

// 5x7 glyphs, one row per byte, low 5 bits used.
const std::map<char, std::array<unsigned char, 7>>& glyphs() {
  static const std::map<char, std::array<unsigned char, 7>> g = {
      {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}}, {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
      {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}}, {'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
      {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}}, {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
      {' ', {0, 0, 0, 0, 0, 0, 0}}};
  return g;
}

}  // namespace

std::string encode_png(unsigned width, unsigned height, const std::vector<unsigned char>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) throw std::invalid_argument("encode_png: size mismatch");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::string out;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    throw std::runtime_error("png encoding failed");
  }
  png_set_write_fn(png, &out, png_write_to_string, png_flush_noop);
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (unsigned y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y) * width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

std::string placeholder_png() {
  static const std::string bytes = [] {
    const std::string label = "RENDER FAILED";
    const unsigned scale = 3, pad = 12;
    const unsigned w = pad * 2 + static_cast<unsigned>(label.size()) * 6 * scale - scale;
    const unsigned h = pad * 2 + 7 * scale;
    std::vector<unsigned char> rgb(static_cast<std::size_t>(w) * h * 3, 0);
    auto set = [&](unsigned x, unsigned y, unsigned char r, unsigned char g, unsigned char b) {
      auto* p = &rgb[(static_cast<std::size_t>(y) * w + x) * 3];
      p[0] = r;
      p[1] = g;
      p[2] = b;
    };
    for (unsigned y = 0; y < h; ++y)
      for (unsigned x = 0; x < w; ++x) {
        const bool border = x < 2 || y < 2 || x >= w - 2 || y >= h - 2;
        if (border)
          set(x, y, 0xB0, 0x20, 0x20);
        else
          set(x, y, 0xFB, 0xEE, 0xEE);
      }
    for (std::size_t c = 0; c < label.size(); ++c) {
      const auto& g = glyphs().at(label[c]);
      for (unsigned row = 0; row < 7; ++row)
        for (unsigned col = 0; col < 5; ++col) {
          if (!(g[row] & (0x10 >> col))) continue;
          for (unsigned dy = 0; dy < scale; ++dy)
            for (unsigned dx = 0; dx < scale; ++dx)
              set(pad + static_cast<unsigned>(c) * 6 * scale + col * scale + dx, pad + row * scale + dy, 0xB0, 0x20, 0x20);
        }
    }
    return encode_png(w, h, rgb);
  }();
  return bytes;
}

RenderOutcome render_formula_png(const std::string& latex, synthdoc::LatexCompiler& compiler,
                                 const std::optional<ImageConverter>& converter, const stdfs::path& png) {
  RenderOutcome out;
  auto fail = [&](std::string reason) {
    fs::write_file_atomic(png, placeholder_png());
    out.rendered = false;
    out.reason = std::move(reason);
    return out;
  };
  if (text::trim(latex).empty()) return fail("empty formula");
  if (!converter) return fail("no image converter configured");
  const auto work = fs::make_temp_dir("fbench-render");
  struct Cleanup {
    stdfs::path p;
    ~Cleanup() {
      std::error_code ec;
      stdfs::remove_all(p, ec);
    }
  } cleanup{work};
  synthdoc::CompileRun run;
  try {
    run = compiler.run(render_formula_tex(latex), work, true);
  } catch (const std::exception& e) {
    return fail(std::string("compiler: ") + e.what());
  }
  const auto pdf = work / "doc.pdf";
  if (run.timed_out) return fail("compile timed out");
  if (run.exit_code != 0 || !run.pdf_written || !stdfs::exists(pdf)) return fail("formula does not compile");
  const auto tmp_png = work / "out.png";
  const auto cmd = text::substitute(converter->command, {{"pdf", text::shell_quote(pdf.string())},
                                                         {"png", text::shell_quote(tmp_png.string())}});
  auto res = run_shell(cmd, std::chrono::duration_cast<std::chrono::milliseconds>(converter->timeout), work);
  if (!res.ok() || !stdfs::exists(tmp_png) || stdfs::file_size(tmp_png) == 0)
    return fail("converter failed: " + std::string(text::trim(res.err)));
  fs::write_file_atomic(png, fs::read_file(tmp_png));
  out.rendered = true;
  return out;
}

RenderedPair render_pair_images(const StudyPair& pair, synthdoc::LatexCompiler& compiler,
                                const std::optional<ImageConverter>& converter, const stdfs::path& image_dir) {
  stdfs::create_directories(image_dir);
  RenderedPair r;
  r.gt = render_formula_png(pair.gt_latex, compiler, converter, image_dir / pair.gt_image);
  r.extracted = render_formula_png(pair.extracted_latex, compiler, converter, image_dir / pair.extracted_image);
  return r;
}

}  // namespace fbench::study
