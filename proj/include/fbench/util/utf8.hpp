#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fbench::utf8 {

// Invalid bytes decode to U+FFFD one byte at a time, so decoding never fails.
std::u32string decode(std::string_view s);
// Like decode, also returning the byte offset of every code point plus a final
// entry equal to s.size().
std::u32string decode(std::string_view s, std::vector<std::size_t>& offsets);
std::string encode(std::u32string_view s);
void append(std::string& out, char32_t cp);
bool is_space(char32_t cp);

}  // namespace fbench::utf8
