#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qpi {

/// Line-based "key = value" text with '#' comments, as used by meta.txt,
/// calib.txt and run configurations.
class KeyValueFile {
public:
    struct Entry {
        std::string key;
        std::string value;
        int line = 0;
    };

    /// Throws DataError naming `source` and the line on malformed or duplicate entries.
    static KeyValueFile parse(std::string_view text, std::string source = "<text>");
    static KeyValueFile load(const std::filesystem::path& path);

    const std::string& source() const { return source_; }
    const std::vector<Entry>& entries() const { return entries_; }

    bool contains(std::string_view key) const { return find(key) != nullptr; }
    std::optional<std::string> get(std::string_view key) const;

    std::string require(std::string_view key) const;
    double require_double(std::string_view key) const;
    std::optional<double> get_double(std::string_view key) const;

    /// Whitespace-separated list of exactly `count` numbers.
    std::vector<double> require_doubles(std::string_view key, std::size_t count) const;

    /// Throws DataError on the first key not in `known`.
    void reject_unknown(const std::vector<std::string_view>& known) const;

private:
    const Entry* find(std::string_view key) const;
    [[noreturn]] void fail(const Entry& e, const std::string& what) const;

    std::string source_;
    std::vector<Entry> entries_;
};

/// 17 significant digits, '.' decimal point; parses back to the same double.
std::string format_double(double v);

/// Locale-independent parse of a full string; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_integer(std::string_view s);

/// Splits on ASCII whitespace.
std::vector<std::string_view> split_words(std::string_view s);

} // namespace qpi
