#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "fbench/util/rng.hpp"

namespace fbench::synthdoc {

enum class Language { en, de, fr, es };

inline constexpr Language kLanguages[] = {Language::en, Language::de, Language::fr, Language::es};

std::string to_string(Language l);
Language language_from_string(std::string_view s);

// Bundled word list for a language, loaded once.
const std::vector<std::string>& lexicon(Language l);

// One sentence: capitalized, 5-14 words, optional comma, terminal punctuation.
std::string generate_sentence(Rng& rng, Language l);
std::vector<std::string> generate_sentences(Rng& rng, Language l, std::size_t count);

// Escapes TeX special characters in running text.
std::string escape_tex_text(std::string_view s);

}  // namespace fbench::synthdoc
