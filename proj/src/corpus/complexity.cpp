#include "fbench/corpus.hpp"

#include "fbench/util/hash.hpp"
#include "fbench/util/text.hpp"
#include "fbench/util/utf8.hpp"

namespace fbench::corpus {

namespace {

bool ascii_letter(char32_t c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

bool counted_symbol(char32_t c) {
  switch (c) {
    // operators
    case '+': case '-': case '*': case '/': case '=': case '<': case '>':
    case U'±': case U'·': case U'×':
    // brackets
    case '(': case ')': case '[': case ']': case '|':
    // punctuation
    case ',': case ';': case '.': case ':': case '!': case '?':
    // sub/superscript markers
    case '_': case '^':
      return true;
    default:
      return false;
  }
}

}  // namespace

std::uint64_t complexity_score(std::string_view latex) {
  const std::u32string s = utf8::decode(latex);
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < s.size();) {
    const char32_t c = s[i];
    if (c == '\\') {
      ++n;
      ++i;
      if (i < s.size() && ascii_letter(s[i])) {
        while (i < s.size() && ascii_letter(s[i])) ++i;
      } else if (i < s.size()) {
        ++i;
      }
      continue;
    }
    if (ascii_letter(c) || (c >= '0' && c <= '9') || counted_symbol(c)) ++n;
    ++i;
  }
  return n;
}

std::string content_hash(std::string_view latex) { return hash::sha256_hex(text::trim(latex)); }

FormulaRecord make_record(std::string_view latex, std::string source_id) {
  FormulaRecord r;
  r.latex = std::string(text::trim(latex));
  r.complexity = complexity_score(r.latex);
  r.source_id = std::move(source_id);
  r.content_hash = content_hash(r.latex);
  return r;
}

}  // namespace fbench::corpus
