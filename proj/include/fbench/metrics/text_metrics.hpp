#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace fbench::metrics {

// Unit-cost edit distance over Unicode code points.
std::size_t levenshtein(std::string_view a, std::string_view b);
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);
// 1 - d / max(|a|, |b|); 1 when both are empty.
double lev_similarity(std::string_view a, std::string_view b);

std::vector<std::string> tokenize_latex(std::string_view s);
// Joins tokens with single spaces; tokenize_latex(detokenize(t)) == t.
std::string detokenize(const std::vector<std::string>& tokens);

// Sentence BLEU on LaTeX tokens: n <= 4, uniform weights, brevity penalty,
// add-one smoothing for n >= 2. 0 for an empty candidate.
double bleu_latex(std::string_view candidate, std::string_view reference);
double bleu_tokens(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);

}  // namespace fbench::metrics
