#include "fbench/metrics/text_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "fbench/util/utf8.hpp"

namespace fbench::metrics {

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  return levenshtein(utf8::decode(a), utf8::decode(b));
}

double lev_similarity(std::string_view a, std::string_view b) {
  auto ua = utf8::decode(a), ub = utf8::decode(b);
  const std::size_t m = std::max(ua.size(), ub.size());
  if (m == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(ua, ub)) / static_cast<double>(m);
}

namespace {

bool ascii_letter(char32_t c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool ascii_digit(char32_t c) { return c >= '0' && c <= '9'; }

}  // namespace

std::vector<std::string> tokenize_latex(std::string_view s) {
  const std::u32string u = utf8::decode(s);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < u.size();) {
    const char32_t c = u[i];
    const std::size_t start = i;
    if (c == '\\') {
      ++i;
      if (i < u.size() && ascii_letter(u[i])) {
        while (i < u.size() && ascii_letter(u[i])) ++i;
      } else if (i < u.size()) {
        ++i;
      }
    } else if (utf8::is_space(c)) {
      ++i;
      continue;
    } else if (ascii_digit(c)) {
      while (i < u.size() && ascii_digit(u[i])) ++i;
    } else {
      ++i;
    }
    out.push_back(utf8::encode(u.substr(start, i - start)));
  }
  return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

double bleu_tokens(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  constexpr int kMaxN = 4;
  double log_sum = 0.0;
  for (int n = 1; n <= kMaxN; ++n) {
    std::map<std::vector<std::string>, std::size_t> ref_counts, cand_counts;
    for (std::size_t i = 0; i + n <= ref.size(); ++i)
      ++ref_counts[std::vector<std::string>(ref.begin() + i, ref.begin() + i + n)];
    for (std::size_t i = 0; i + n <= cand.size(); ++i)
      ++cand_counts[std::vector<std::string>(cand.begin() + i, cand.begin() + i + n)];
    std::size_t total = cand.size() >= static_cast<std::size_t>(n) ? cand.size() - n + 1 : 0;
    std::size_t matched = 0;
    for (const auto& [gram, count] : cand_counts) {
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matched += std::min(count, it->second);
    }
    double p;
    if (n == 1) {
      if (matched == 0) return 0.0;
      p = static_cast<double>(matched) / static_cast<double>(total);
    } else {
      p = (static_cast<double>(matched) + 1.0) / (static_cast<double>(total) + 1.0);
    }
    log_sum += std::log(p);
  }
  const double c = static_cast<double>(cand.size()), r = static_cast<double>(ref.size());
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return std::clamp(bp * std::exp(log_sum / kMaxN), 0.0, 1.0);
}

double bleu_latex(std::string_view candidate, std::string_view reference) {
  return bleu_tokens(tokenize_latex(candidate), tokenize_latex(reference));
}

}  // namespace fbench::metrics
