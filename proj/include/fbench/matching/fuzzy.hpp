#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fbench::matching {

// Half-open byte range into a raw string.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  bool overlaps(const Span& o) const { return begin < o.end && o.begin < end; }
  bool operator==(const Span&) const = default;
};

// Removes all Unicode whitespace and all backslashes.
std::string normalize(std::string_view text);

// Normalized code points with the raw byte offset of each one.
struct NormalizedText {
  std::u32string chars;
  std::vector<std::size_t> begin;  // raw offset of chars[i]
  std::vector<std::size_t> end;    // raw offset one past chars[i]
};
NormalizedText normalize_indexed(std::string_view raw);

struct LocateResult {
  Span span;
  double edit_ratio = 0.0;
  std::size_t distance = 0;
  bool exact_raw = false;
};

constexpr double kDefaultMaxRatio = 0.15;

// Exact raw search first, then a sliding window over the normalized haystack.
// Windows overlapping any `blocked` span are not considered.
std::optional<LocateResult> fuzzy_locate(std::string_view needle, std::string_view haystack,
                                         double max_ratio = kDefaultMaxRatio,
                                         const std::vector<Span>& blocked = {});

// Best window regardless of threshold (nullopt only when no window exists).
std::optional<LocateResult> best_window(std::string_view needle, std::string_view haystack,
                                        const std::vector<Span>& blocked = {});

struct SplitResult {
  std::vector<std::string> segments;
  std::vector<Span> spans;  // into `merged`
  bool degenerate = false;  // some segment is empty
};

// Partitions `merged` into |parts| contiguous segments minimising the summed
// edit distance between normalized segment and normalized part.
SplitResult split_grouped(std::string_view merged, const std::vector<std::string>& parts);

}  // namespace fbench::matching
