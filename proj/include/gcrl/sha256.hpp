#pragma once

#include <string>

namespace gcrl {

// Lowercase hex SHA-256 digest; used for the artifact manifest.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file_hex(const std::string& path);

} // namespace gcrl
