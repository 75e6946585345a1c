#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace fbench::hash {

std::string sha256_hex(std::string_view data);
// First 8 bytes of SHA-256, big-endian.
std::uint64_t sha256_u64(std::string_view data);

}  // namespace fbench::hash
