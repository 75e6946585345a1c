#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "fbench/synthdoc/compiler.hpp"
#include "fbench/synthdoc/layout.hpp"

namespace fbench::synthdoc {

inline constexpr double kDefaultInlineMaxPt = 10.0;

// Probe document measuring each formula's inline box height plus depth.
std::string render_probe(const LayoutConfig& layout, const std::vector<std::string>& formulas);
// Extracts `FBPROBE:<i>:<dimen>` measurements from a log.
std::map<std::size_t, double> parse_probe_log(std::string_view log);

// nullopt when the formula does not typeset cleanly.
std::optional<double> measure_inline_height(const std::string& latex, const LayoutConfig& layout,
                                            LatexCompiler& compiler, const std::filesystem::path& workdir);

// Memoizing batch measurer; thread-safe.
class InlineProbe {
 public:
  InlineProbe(LatexCompiler& compiler, std::filesystem::path workdir, std::size_t batch_size = 64)
      : compiler_(compiler), workdir_(std::move(workdir)), batch_size_(batch_size) {}

  std::vector<std::optional<double>> measure(const std::vector<std::string>& formulas, const LayoutConfig& layout);
  std::optional<double> measure(const std::string& formula, const LayoutConfig& layout);
  std::size_t compiles() const;

 private:
  LatexCompiler& compiler_;
  std::filesystem::path workdir_;
  std::size_t batch_size_;
  mutable std::mutex mu_;
  std::mutex run_mu_;  // serializes compiles in workdir_
  std::map<std::string, std::optional<double>> cache_;
  std::size_t compiles_ = 0;
};

}  // namespace fbench::synthdoc
