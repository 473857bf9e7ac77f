#pragma once

#include <string>
#include <string_view>

namespace auditbot {

// Lowercase-hex SHA-256.
std::string sha256_hex(std::string_view bytes);

inline const std::string kZeroHash(64, '0');

bool is_hex_digest(std::string_view s);

}  // namespace auditbot
