#include "fbench/util/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace fbench::hash {

namespace {

std::array<unsigned char, 32> digest(std::string_view data) {
  std::array<unsigned char, 32> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != md.size())
    throw std::runtime_error("sha256 failed");
  return md;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  static constexpr char kHex[] = "0123456789abcdef";
  auto md = digest(data);
  std::string out;
  out.reserve(64);
  for (unsigned char b : md) {
    out += kHex[b >> 4];
    out += kHex[b & 15];
  }
  return out;
}

std::uint64_t sha256_u64(std::string_view data) {
  auto md = digest(data);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | md[i];
  return v;
}

}  // namespace fbench::hash
