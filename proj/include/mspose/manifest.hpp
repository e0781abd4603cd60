#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mspose {

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(const std::string& bytes);

// Writes <dir>/manifest.txt: the given status lines, then "<digest>  <path>"
// for every other regular file below dir, sorted by relative path.
void write_manifest(const std::filesystem::path& dir, const std::vector<std::string>& status);

}  // namespace mspose
