#include "isobench/digest.hpp"

#include <openssl/sha.h>

#include <array>

namespace isobench {

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, SHA256_DIGEST_LENGTH> md{};
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), md.data());
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(md.size() * 2);
  for (unsigned char b : md) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xF]);
  }
  return out;
}

std::string short_digest(std::string_view data, std::size_t n) { return sha256_hex(data).substr(0, n); }

}  // namespace isobench
