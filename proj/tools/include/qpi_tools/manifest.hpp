#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace qpi::cli {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

/// "<sha256>  <relative path>" for every regular file under `root` except
/// manifest.txt itself, sorted by path.
std::string build_manifest(const std::filesystem::path& root);

} // namespace qpi::cli
