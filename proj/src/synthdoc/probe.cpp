#include "fbench/synthdoc/probe.hpp"

#include <functional>
#include <regex>

#include "fbench/util/text.hpp"

namespace fbench::synthdoc {

namespace {

bool log_has_trouble(const std::string& log) {
  for (const auto& line : text::split(unwrap_log(log), '\n'))
    if (text::starts_with(line, "! ") || text::starts_with(line, "Missing character:")) return true;
  return false;
}

}  // namespace

std::string render_probe(const LayoutConfig& layout, const std::vector<std::string>& formulas) {
  std::string s = render_preamble(layout);
  s += "\\newbox\\fbprobebox\n";
  for (std::size_t i = 0; i < formulas.size(); ++i) {
    s += "\\setbox\\fbprobebox=\\hbox{$" + formulas[i] + "$}\n";
    s += "\\typeout{FBPROBE:" + std::to_string(i) + ":\\the\\dimexpr\\ht\\fbprobebox+\\dp\\fbprobebox\\relax}\n";
  }
  s += "\\end{document}\n";
  return s;
}

std::map<std::size_t, double> parse_probe_log(std::string_view log) {
  static const std::regex re(R"(FBPROBE:(\d+):(-?[0-9.]+)pt)");
  std::map<std::size_t, double> out;
  const std::string s = unwrap_log(log);
  for (std::sregex_iterator it(s.begin(), s.end(), re), end; it != end; ++it)
    out[std::stoul((*it)[1].str())] = std::stod((*it)[2].str());
  return out;
}

std::optional<double> measure_inline_height(const std::string& latex, const LayoutConfig& layout,
                                            LatexCompiler& compiler, const std::filesystem::path& workdir) {
  auto run = compiler.run(render_probe(layout, {latex}), workdir, true);
  if (run.timed_out || run.exit_code != 0 || log_has_trouble(run.log)) return std::nullopt;
  auto m = parse_probe_log(run.log);
  auto it = m.find(0);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

std::size_t InlineProbe::compiles() const {
  std::lock_guard lock(mu_);
  return compiles_;
}

std::optional<double> InlineProbe::measure(const std::string& formula, const LayoutConfig& layout) {
  return measure(std::vector<std::string>{formula}, layout)[0];
}

std::vector<std::optional<double>> InlineProbe::measure(const std::vector<std::string>& formulas,
                                                        const LayoutConfig& layout) {
  const std::string preamble = render_preamble(layout);
  std::vector<std::optional<double>> out(formulas.size());
  std::vector<std::size_t> todo;
  {
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < formulas.size(); ++i) {
      auto it = cache_.find(preamble + '\x1f' + formulas[i]);
      if (it != cache_.end()) out[i] = it->second;
      else todo.push_back(i);
    }
  }
  std::map<std::string, std::optional<double>> fresh;
  std::size_t runs = 0;
  std::unique_lock run_lock(run_mu_, std::defer_lock);
  if (!todo.empty()) run_lock.lock();
  // Measures a group in one compile; on trouble, bisects down to single formulas.
  std::function<void(const std::vector<std::string>&)> solve = [&](const std::vector<std::string>& group) {
    if (group.size() == 1) {
      fresh[group[0]] = measure_inline_height(group[0], layout, compiler_, workdir_);
      ++runs;
      return;
    }
    auto run = compiler_.run(render_probe(layout, group), workdir_, false);
    ++runs;
    auto m = parse_probe_log(run.log);
    if (!run.timed_out && run.exit_code == 0 && !log_has_trouble(run.log) && m.size() == group.size()) {
      for (std::size_t k = 0; k < group.size(); ++k) fresh[group[k]] = m[k];
      return;
    }
    const auto mid = group.begin() + static_cast<std::ptrdiff_t>(group.size() / 2);
    solve(std::vector<std::string>(group.begin(), mid));
    solve(std::vector<std::string>(mid, group.end()));
  };
  for (std::size_t start = 0; start < todo.size(); start += batch_size_) {
    std::vector<std::string> batch;
    for (std::size_t k = start; k < std::min(todo.size(), start + batch_size_); ++k) batch.push_back(formulas[todo[k]]);
    solve(batch);
  }
  std::lock_guard lock(mu_);
  compiles_ += runs;
  for (auto& [f, v] : fresh) cache_[preamble + '\x1f' + f] = v;
  for (std::size_t i : todo) out[i] = fresh[formulas[i]];
  return out;
}

}  // namespace fbench::synthdoc
