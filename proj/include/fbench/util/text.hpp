#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fbench::text {

std::string_view trim(std::string_view s);
bool is_ascii_space(char c);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string replace_all(std::string_view s, std::string_view from, std::string_view to);
bool starts_with(std::string_view s, std::string_view prefix);
bool ends_with(std::string_view s, std::string_view suffix);
// Last `max_bytes` bytes of `s`, not splitting a UTF-8 sequence.
std::string tail(std::string_view s, std::size_t max_bytes);
std::string shell_quote(std::string_view s);
// Replaces every `{key}` in `tmpl`; unknown placeholders are left untouched.
std::string substitute(std::string_view tmpl,
                       const std::vector<std::pair<std::string, std::string>>& values);
std::string format_fixed(double v, int decimals);

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/' or is empty
};
// nullopt when `url` has no scheme.
std::optional<UrlParts> split_url(std::string_view url);

}  // namespace fbench::text
