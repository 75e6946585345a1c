#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <optional>
#include <stdexcept>

#include "fbench/corpus.hpp"
#include "fbench/util/fs.hpp"
#include "fbench/util/text.hpp"
#include "fbench/util/utf8.hpp"

namespace fbench::corpus {

namespace {

namespace stdfs = std::filesystem;

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

std::size_t ifind(std::string_view hay, std::string_view needle, std::size_t from) {
  if (needle.empty() || hay.size() < needle.size()) return std::string_view::npos;
  for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
    std::size_t k = 0;
    while (k < needle.size() && lower(hay[i + k]) == needle[k]) ++k;
    if (k == needle.size()) return i;
  }
  return std::string_view::npos;
}

bool name_boundary(std::string_view s, std::size_t pos) {
  if (pos >= s.size()) return true;
  char c = s[pos];
  return c == '>' || c == '/' || text::is_ascii_space(c);
}

// Finds `<tag` at or after `from` where the tag name ends at a boundary.
std::size_t find_open_tag(std::string_view html, std::string_view tag, std::size_t from) {
  std::string pat = "<" + std::string(tag);
  while (true) {
    auto p = ifind(html, pat, from);
    if (p == std::string_view::npos) return p;
    if (name_boundary(html, p + pat.size())) return p;
    from = p + 1;
  }
}

// End of a start tag (index of '>'), honouring quoted attribute values.
std::size_t tag_end(std::string_view html, std::size_t lt) {
  char quote = 0;
  for (std::size_t i = lt + 1; i < html.size(); ++i) {
    char c = html[i];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '>') {
      return i;
    } else if (c == '<') {
      return std::string_view::npos;
    }
  }
  return std::string_view::npos;
}

std::optional<std::string> attribute(std::string_view start_tag, std::string_view name) {
  std::size_t i = 1;
  while (i < start_tag.size() && !text::is_ascii_space(start_tag[i]) && start_tag[i] != '>') ++i;
  while (i < start_tag.size()) {
    while (i < start_tag.size() && (text::is_ascii_space(start_tag[i]) || start_tag[i] == '/')) ++i;
    std::size_t ks = i;
    while (i < start_tag.size() && start_tag[i] != '=' && start_tag[i] != '>' &&
           !text::is_ascii_space(start_tag[i]))
      ++i;
    std::string key(start_tag.substr(ks, i - ks));
    std::transform(key.begin(), key.end(), key.begin(), lower);
    while (i < start_tag.size() && text::is_ascii_space(start_tag[i])) ++i;
    std::string value;
    if (i < start_tag.size() && start_tag[i] == '=') {
      ++i;
      while (i < start_tag.size() && text::is_ascii_space(start_tag[i])) ++i;
      if (i < start_tag.size() && (start_tag[i] == '"' || start_tag[i] == '\'')) {
        char q = start_tag[i++];
        std::size_t vs = i;
        while (i < start_tag.size() && start_tag[i] != q) ++i;
        value = std::string(start_tag.substr(vs, i - vs));
        ++i;
      } else {
        std::size_t vs = i;
        while (i < start_tag.size() && !text::is_ascii_space(start_tag[i]) && start_tag[i] != '>')
          ++i;
        value = std::string(start_tag.substr(vs, i - vs));
      }
    }
    if (key.empty()) {
      ++i;
      continue;
    }
    if (key == name) return value;
  }
  return std::nullopt;
}

std::optional<std::string> tex_annotation(std::string_view element) {
  std::size_t from = 0;
  while (true) {
    auto lt = find_open_tag(element, "annotation", from);
    if (lt == std::string_view::npos) return std::nullopt;
    auto gt = tag_end(element, lt);
    if (gt == std::string_view::npos) return std::nullopt;
    auto enc = attribute(element.substr(lt, gt - lt + 1), "encoding");
    auto close = ifind(element, "</annotation", gt + 1);
    if (close == std::string_view::npos) return std::nullopt;
    if (enc) {
      std::string e = *enc;
      std::transform(e.begin(), e.end(), e.begin(), lower);
      if (e == "application/x-tex" || e == "application/x-latex" || e == "tex")
        return std::string(element.substr(gt + 1, close - gt - 1));
    }
    from = close + 1;
  }
}

struct TarEntry {
  std::string name;
  std::string data;
};

std::string read_maybe_gzip(const stdfs::path& p) {
  gzFile f = gzopen(p.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open " + p.string());
  std::string out;
  char buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
  int err = 0;
  const char* msg = gzerror(f, &err);
  gzclose(f);
  if (n < 0 || err < 0) throw std::runtime_error(p.string() + ": " + (msg ? msg : "gzip error"));
  return out;
}

std::vector<TarEntry> read_tar(const std::string& bytes) {
  std::vector<TarEntry> out;
  std::size_t off = 0;
  std::string long_name;
  while (off + 512 <= bytes.size()) {
    const char* h = bytes.data() + off;
    if (std::all_of(h, h + 512, [](char c) { return c == 0; })) break;
    std::string name(h, strnlen(h, 100));
    std::string prefix(h + 345, strnlen(h + 345, 155));
    std::uint64_t size = std::strtoull(std::string(h + 124, 12).c_str(), nullptr, 8);
    char type = h[156];
    off += 512;
    if (off + size > bytes.size()) throw std::runtime_error("truncated tar archive");
    std::string data = bytes.substr(off, size);
    off += (size + 511) / 512 * 512;
    if (type == 'L') {
      long_name = std::string(data.c_str());
      continue;
    }
    if (type != '0' && type != 0) {
      long_name.clear();
      continue;
    }
    std::string full = !long_name.empty() ? long_name : (prefix.empty() ? name : prefix + "/" + name);
    long_name.clear();
    out.push_back({full, std::move(data)});
  }
  return out;
}

bool is_html_name(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(), lower);
  return n.ends_with(".html") || n.ends_with(".htm");
}

void append(ExtractionResult& into, ExtractionResult&& page) {
  into.records.insert(into.records.end(), std::make_move_iterator(page.records.begin()),
                      std::make_move_iterator(page.records.end()));
  into.skipped += page.skipped;
  into.pages += 1;
}

std::string stem_of(const std::string& name) {
  auto base = stdfs::path(name).filename().string();
  auto dot = base.find('.');
  return dot == std::string::npos ? base : base.substr(0, dot);
}

}  // namespace

std::string decode_html_entities(std::string_view s) {
  static const std::pair<std::string_view, char32_t> kNamed[] = {
      {"amp", '&'},   {"lt", '<'},      {"gt", '>'},       {"quot", '"'},
      {"apos", '\''}, {"nbsp", 0xA0},   {"minus", 0x2212}, {"times", 0xD7},
      {"middot", 0xB7}, {"plusmn", 0xB1}, {"thinsp", 0x2009}};
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s[i] != '&') {
      out += s[i++];
      continue;
    }
    auto semi = s.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 12) {
      out += s[i++];
      continue;
    }
    std::string_view ent = s.substr(i + 1, semi - i - 1);
    std::optional<char32_t> cp;
    if (ent.size() > 1 && ent[0] == '#') {
      const bool hex = ent[1] == 'x' || ent[1] == 'X';
      std::string digits(ent.substr(hex ? 2 : 1));
      char* end = nullptr;
      unsigned long v = digits.empty() ? 0 : std::strtoul(digits.c_str(), &end, hex ? 16 : 10);
      if (!digits.empty() && end && *end == 0 && v > 0 && v <= 0x10FFFF) cp = static_cast<char32_t>(v);
    } else {
      for (const auto& [name, value] : kNamed)
        if (name == ent) cp = value;
    }
    if (!cp) {
      out += s[i++];
      continue;
    }
    utf8::append(out, *cp);
    i = semi + 1;
  }
  return out;
}

std::string strip_displaystyle(std::string_view latex) {
  std::string_view t = text::trim(latex);
  constexpr std::string_view kOpen = "{\\displaystyle";
  if (!t.starts_with(kOpen) || t.size() < kOpen.size() + 1 || t.back() != '}') return std::string(t);
  if (t.size() > kOpen.size() && std::isalpha(static_cast<unsigned char>(t[kOpen.size()])))
    return std::string(t);
  // The brace opened at t[0] must close at the last character.
  int depth = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] == '\\') {
      ++i;
      continue;
    }
    if (t[i] == '{') ++depth;
    if (t[i] == '}' && --depth == 0 && i != t.size() - 1) return std::string(t);
  }
  if (depth != 0) return std::string(t);
  return std::string(text::trim(t.substr(kOpen.size(), t.size() - kOpen.size() - 1)));
}

ExtractionResult extract_formulas(std::string_view html, std::string_view source_id) {
  ExtractionResult res;
  std::size_t from = 0;
  while (true) {
    auto lt = find_open_tag(html, "math", from);
    if (lt == std::string_view::npos) break;
    auto gt = tag_end(html, lt);
    if (gt == std::string_view::npos) {
      ++res.skipped;
      from = lt + 1;
      continue;
    }
    std::string_view start_tag = html.substr(lt, gt - lt + 1);
    std::optional<std::string> payload;
    std::size_t next = gt + 1;
    if (!start_tag.ends_with("/>")) {
      auto close = ifind(html, "</math", gt + 1);
      auto nested = find_open_tag(html, "math", gt + 1);
      if (close == std::string_view::npos || (nested != std::string_view::npos && nested < close)) {
        ++res.skipped;
        from = gt + 1;
        continue;
      }
      payload = tex_annotation(html.substr(gt + 1, close - gt - 1));
      next = close + 1;
    }
    if (!payload) payload = attribute(start_tag, "alttext");
    from = next;
    if (!payload) {
      ++res.skipped;
      continue;
    }
    std::string latex = strip_displaystyle(decode_html_entities(*payload));
    if (text::trim(latex).empty()) {
      ++res.skipped;
      continue;
    }
    res.records.push_back(make_record(latex, std::string(source_id)));
  }
  return res;
}

ExtractionResult extract_from_source(const stdfs::path& source) {
  ExtractionResult all;
  if (stdfs::is_directory(source)) {
    for (const auto& p : fs::list_files(source)) {
      if (!is_html_name(p.string())) continue;
      append(all, extract_formulas(fs::read_file(p), stem_of(p.filename().string())));
    }
    return all;
  }
  const std::string name = source.filename().string();
  if (name.ends_with(".tar") || name.ends_with(".tar.gz") || name.ends_with(".tgz")) {
    auto entries = read_tar(read_maybe_gzip(source));
    std::sort(entries.begin(), entries.end(),
              [](const TarEntry& a, const TarEntry& b) { return a.name < b.name; });
    for (auto& e : entries) {
      if (!is_html_name(e.name)) continue;
      append(all, extract_formulas(e.data, stem_of(e.name)));
    }
    return all;
  }
  if (!stdfs::exists(source)) throw std::runtime_error("source not found: " + source.string());
  append(all, extract_formulas(read_maybe_gzip(source), stem_of(name)));
  return all;
}

}  // namespace fbench::corpus
