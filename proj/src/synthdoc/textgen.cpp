#include "fbench/synthdoc/textgen.hpp"

#include <array>
#include <cctype>
#include <mutex>
#include <stdexcept>

#include "fbench/util/assets.hpp"
#include "fbench/util/text.hpp"

namespace fbench::synthdoc {

std::string to_string(Language l) {
  switch (l) {
    case Language::en: return "en";
    case Language::de: return "de";
    case Language::fr: return "fr";
    case Language::es: return "es";
  }
  return "en";
}

Language language_from_string(std::string_view s) {
  for (auto l : kLanguages)
    if (to_string(l) == s) return l;
  throw std::invalid_argument("unknown language: " + std::string(s));
}

const std::vector<std::string>& lexicon(Language l) {
  static std::array<std::vector<std::string>, 4> cache;
  static std::once_flag once;
  std::call_once(once, [] {
    for (auto lang : kLanguages) {
      auto& words = cache[static_cast<std::size_t>(lang)];
      for (auto& line : text::split(assets::get("lexicon/" + to_string(lang) + ".txt"), '\n')) {
        auto w = text::trim(line);
        if (!w.empty()) words.emplace_back(w);
      }
    }
  });
  return cache[static_cast<std::size_t>(l)];
}

std::string generate_sentence(Rng& rng, Language l) {
  const auto& words = lexicon(l);
  const auto n = static_cast<std::size_t>(rng.uniform_int(5, 14));
  const std::size_t comma_after = rng.bernoulli(0.3) ? static_cast<std::size_t>(rng.uniform_int(2, n - 2)) : 0;
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    std::string w = rng.pick(words);
    if (i == 0 && !w.empty() && std::islower(static_cast<unsigned char>(w[0])))
      w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    s += w;
    if (comma_after && i + 1 == comma_after) s += ',';
  }
  const double p = rng.uniform01();
  s += p < 0.85 ? "." : (p < 0.95 ? "?" : "!");
  return s;
}

std::vector<std::string> generate_sentences(Rng& rng, Language l, std::size_t count) {
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_sentence(rng, l));
  return out;
}

std::string escape_tex_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\textbackslash{}"; break;
      case '{': out += "\\{"; break;
      case '}': out += "\\}"; break;
      case '$': out += "\\$"; break;
      case '&': out += "\\&"; break;
      case '#': out += "\\#"; break;
      case '%': out += "\\%"; break;
      case '_': out += "\\_"; break;
      case '~': out += "\\textasciitilde{}"; break;
      case '^': out += "\\textasciicircum{}"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace fbench::synthdoc
