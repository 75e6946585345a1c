#include "fbench/matching/fuzzy.hpp"

#include <algorithm>
#include <limits>

#include "fbench/errors.hpp"
#include "fbench/util/text.hpp"
#include "fbench/util/utf8.hpp"

namespace fbench::matching {

namespace {

bool removed(char32_t c) { return c == U'\\' || utf8::is_space(c); }

bool span_blocked(const Span& s, const std::vector<Span>& blocked) {
  return std::any_of(blocked.begin(), blocked.end(), [&](const Span& b) { return b.overlaps(s); });
}

bool is_blocked_offset(std::size_t off, const std::vector<Span>& blocked) {
  return std::any_of(blocked.begin(), blocked.end(),
                     [&](const Span& b) { return off >= b.begin && off < b.end; });
}

std::optional<LocateResult> exact_search(std::string_view needle, std::string_view hay,
                                         const std::vector<Span>& blocked) {
  std::size_t from = 0;
  while (true) {
    auto pos = hay.find(needle, from);
    if (pos == std::string_view::npos) return std::nullopt;
    Span s{pos, pos + needle.size()};
    if (!span_blocked(s, blocked)) return LocateResult{s, 0.0, 0, true};
    from = pos + 1;
  }
}

struct Candidate {
  std::size_t start = 0, len = 0, dist = 0;
  double ratio = std::numeric_limits<double>::infinity();
};

bool better(const Candidate& a, const Candidate& b, std::size_t n) {
  if (a.ratio != b.ratio) return a.ratio < b.ratio;
  if (a.dist != b.dist) return a.dist < b.dist;
  auto da = a.len > n ? a.len - n : n - a.len;
  auto db = b.len > n ? b.len - n : n - b.len;
  if (da != db) return da < db;
  return a.start < b.start;
}

}  // namespace

std::string normalize(std::string_view text) {
  std::u32string out;
  for (char32_t c : utf8::decode(text))
    if (!removed(c)) out.push_back(c);
  return utf8::encode(out);
}

NormalizedText normalize_indexed(std::string_view raw) {
  std::vector<std::size_t> offsets;
  auto u = utf8::decode(raw, offsets);
  NormalizedText nt;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (removed(u[i])) continue;
    nt.chars.push_back(u[i]);
    nt.begin.push_back(offsets[i]);
    nt.end.push_back(offsets[i + 1]);
  }
  return nt;
}

std::optional<LocateResult> best_window(std::string_view needle, std::string_view haystack,
                                        const std::vector<Span>& blocked) {
  if (text::trim(needle).empty()) throw PreconditionError("fuzzy_locate: empty needle");
  if (auto hit = exact_search(needle, haystack, blocked)) return hit;

  const std::u32string nn = utf8::decode(normalize(needle));
  const NormalizedText h = normalize_indexed(haystack);
  const std::size_t n = nn.size(), m = h.chars.size();
  if (n == 0 || m == 0) return std::nullopt;

  // Every window length up to hi is scored; lengths below n - n/5 have ratio > 0.2.
  const std::size_t hi = std::clamp<std::size_t>(n + n / 5, 1, m);

  // next_block[s]: first blocked normalized index >= s (m when none).
  std::vector<std::size_t> next_block(m + 1, m);
  for (std::size_t k = m; k-- > 0;)
    next_block[k] = is_blocked_offset(h.begin[k], blocked) ? k : next_block[k + 1];

  Candidate best;
  std::vector<std::size_t> col(n + 1);
  for (std::size_t s = 0; s < m; ++s) {
    const std::size_t max_len = std::min({hi, m - s, next_block[s] - s});
    if (max_len == 0) continue;
    for (std::size_t i = 0; i <= n; ++i) col[i] = i;
    for (std::size_t len = 1; len <= max_len; ++len) {
      const char32_t c = h.chars[s + len - 1];
      std::size_t diag = col[0];
      col[0] = len;
      for (std::size_t i = 1; i <= n; ++i) {
        std::size_t up = col[i];
        col[i] = std::min({col[i] + 1, col[i - 1] + 1, diag + (nn[i - 1] == c ? 0 : 1)});
        diag = up;
      }
      Candidate cand{s, len, col[n], static_cast<double>(col[n]) / static_cast<double>(std::max(n, len))};
      if (better(cand, best, n)) best = cand;
    }
  }
  if (best.len == 0) return std::nullopt;

  Span span{h.begin[best.start], h.end[best.start + best.len - 1]};
  const std::string_view trimmed = text::trim(needle);
  if (trimmed.front() == '\\') {
    while (span.begin > 0 && haystack[span.begin - 1] == '\\' &&
           !is_blocked_offset(span.begin - 1, blocked))
      --span.begin;
  }
  if (trimmed.back() == '\\') {
    while (span.end < haystack.size() && haystack[span.end] == '\\' &&
           !is_blocked_offset(span.end, blocked))
      ++span.end;
  }
  return LocateResult{span, best.ratio, best.dist, false};
}

std::optional<LocateResult> fuzzy_locate(std::string_view needle, std::string_view haystack,
                                         double max_ratio, const std::vector<Span>& blocked) {
  auto r = best_window(needle, haystack, blocked);
  if (!r || r->edit_ratio > max_ratio) return std::nullopt;
  return r;
}

SplitResult split_grouped(std::string_view merged, const std::vector<std::string>& parts) {
  if (parts.size() < 2) throw PreconditionError("split_grouped needs at least two parts");
  const NormalizedText mt = normalize_indexed(merged);
  const std::size_t m = mt.chars.size(), k_parts = parts.size();
  constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max() / 4;

  // cost[k][j]: best total for the first k parts covering mt.chars[0, j).
  std::vector<std::vector<std::size_t>> cost(k_parts + 1, std::vector<std::size_t>(m + 1, kInf));
  std::vector<std::vector<std::size_t>> from(k_parts + 1, std::vector<std::size_t>(m + 1, 0));
  cost[0][0] = 0;
  std::vector<std::size_t> col;
  for (std::size_t k = 1; k <= k_parts; ++k) {
    const std::u32string p = utf8::decode(normalize(parts[k - 1]));
    const std::size_t n = p.size();
    col.assign(n + 1, 0);
    for (std::size_t i = 0; i <= m; ++i) {
      if (cost[k - 1][i] >= kInf) continue;
      for (std::size_t t = 0; t <= n; ++t) col[t] = t;
      for (std::size_t j = i;; ++j) {
        // col[n] = distance(mt.chars[i, j), p)
        const std::size_t total = cost[k - 1][i] + col[n];
        if (total <= cost[k][j]) {
          cost[k][j] = total;
          from[k][j] = i;
        }
        if (j == m) break;
        const char32_t c = mt.chars[j];
        std::size_t diag = col[0];
        col[0] = j - i + 1;
        for (std::size_t t = 1; t <= n; ++t) {
          std::size_t up = col[t];
          col[t] = std::min({col[t] + 1, col[t - 1] + 1, diag + (p[t - 1] == c ? 0 : 1)});
          diag = up;
        }
      }
    }
  }

  // Recover normalized cut points.
  std::vector<std::size_t> cuts(k_parts + 1);
  cuts[k_parts] = m;
  for (std::size_t k = k_parts; k > 0; --k) cuts[k - 1] = from[k][cuts[k]];

  // Map cuts to raw offsets. Removed characters between two kept ones go to
  // the left segment, except a backslash that escapes the next character.
  auto raw_cut = [&](std::size_t j) -> std::size_t {
    if (j == 0) return 0;
    if (j >= m) return merged.size();
    std::size_t b = mt.begin[j];
    std::size_t run = 0;
    while (run < b - mt.end[j - 1] && merged[b - 1 - run] == '\\') ++run;
    if (run % 2 == 1) --b;
    return b;
  };
  std::vector<std::size_t> raw(k_parts + 1);
  for (std::size_t k = 0; k <= k_parts; ++k) raw[k] = raw_cut(cuts[k]);
  raw[0] = 0;
  raw[k_parts] = merged.size();

  // Leading `,` or `;` (after whitespace) of a right segment attach to the left.
  for (std::size_t k = 1; k < k_parts; ++k) {
    std::size_t p = raw[k];
    while (p < raw[k + 1]) {
      char c = merged[p];
      if (text::is_ascii_space(c) || c == ',' || c == ';') {
        ++p;
        continue;
      }
      if (c == '\\' && p + 1 < raw[k + 1] && merged[p + 1] == '\\') {
        p += 2;
        continue;
      }
      break;
    }
    raw[k] = p;
  }

  SplitResult res;
  for (std::size_t k = 0; k < k_parts; ++k) {
    std::size_t b = raw[k], e = std::max(raw[k], raw[k + 1]);
    while (b < e && text::is_ascii_space(merged[b])) ++b;
    while (e > b && text::is_ascii_space(merged[e - 1])) --e;
    res.spans.push_back({b, e});
    res.segments.emplace_back(merged.substr(b, e - b));
    if (b == e) res.degenerate = true;
  }
  return res;
}

}  // namespace fbench::matching
