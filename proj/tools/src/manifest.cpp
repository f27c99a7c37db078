#include "qpi_tools/manifest.hpp"

#include <algorithm>
#include <vector>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "qpi/error.hpp"
#include "qpi/io.hpp"

namespace qpi::cli {

std::string sha256_hex(std::string_view bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw DataError("SHA-256 computation failed");
    std::string hex;
    hex.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i)
        hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

std::string build_manifest(const std::filesystem::path& root)
{
    std::vector<std::string> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (!e.is_regular_file())
            continue;
        const auto rel = std::filesystem::relative(e.path(), root).generic_string();
        if (rel != "manifest.txt")
            files.push_back(rel);
    }
    std::sort(files.begin(), files.end());
    std::string out;
    for (const auto& f : files)
        out += fmt::format("{}  {}\n", sha256_hex(io::read_file(root / f)), f);
    return out;
}

} // namespace qpi::cli
