#pragma once

#include <string>
#include <string_view>

namespace isobench {

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// First `n` hex digits of the SHA-256; used for short stable keys.
std::string short_digest(std::string_view data, std::size_t n = 10);

}  // namespace isobench
