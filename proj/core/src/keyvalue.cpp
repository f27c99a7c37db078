#include "qpi/keyvalue.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "qpi/error.hpp"

namespace qpi {
namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

} // namespace

KeyValueFile KeyValueFile::parse(std::string_view text, std::string source)
{
    KeyValueFile kv;
    kv.source_ = std::move(source);
    int line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;

        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw DataError(fmt::format("{}:{}: expected 'key = value'", kv.source_, line_no));
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty() || key.find_first_of(" \t") != std::string_view::npos)
            throw DataError(fmt::format("{}:{}: malformed key", kv.source_, line_no));
        if (kv.find(key) != nullptr)
            throw DataError(fmt::format("{}:{}: duplicate key '{}'", kv.source_, line_no, key));
        kv.entries_.push_back({std::string(key), std::string(value), line_no});
    }
    return kv;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

const KeyValueFile::Entry* KeyValueFile::find(std::string_view key) const
{
    const auto it = std::find_if(entries_.begin(), entries_.end(),
                                 [&](const Entry& e) { return e.key == key; });
    return it == entries_.end() ? nullptr : &*it;
}

void KeyValueFile::fail(const Entry& e, const std::string& what) const
{
    throw DataError(fmt::format("{}:{}: {}", source_, e.line, what));
}

std::optional<std::string> KeyValueFile::get(std::string_view key) const
{
    if (const Entry* e = find(key))
        return e->value;
    return std::nullopt;
}

std::string KeyValueFile::require(std::string_view key) const
{
    if (const Entry* e = find(key))
        return e->value;
    throw DataError(fmt::format("{}: missing key '{}'", source_, key));
}

std::optional<double> KeyValueFile::get_double(std::string_view key) const
{
    const Entry* e = find(key);
    if (!e)
        return std::nullopt;
    const auto v = parse_double(e->value);
    if (!v)
        fail(*e, fmt::format("'{}' is not a number: '{}'", key, e->value));
    return v;
}

double KeyValueFile::require_double(std::string_view key) const
{
    if (auto v = get_double(key))
        return *v;
    throw DataError(fmt::format("{}: missing key '{}'", source_, key));
}

std::vector<double> KeyValueFile::require_doubles(std::string_view key, std::size_t count) const
{
    const Entry* e = find(key);
    if (!e)
        throw DataError(fmt::format("{}: missing key '{}'", source_, key));
    std::vector<double> out;
    for (auto word : split_words(e->value)) {
        const auto v = parse_double(word);
        if (!v)
            fail(*e, fmt::format("'{}' contains a non-number '{}'", key, word));
        out.push_back(*v);
    }
    if (out.size() != count)
        fail(*e, fmt::format("'{}' needs {} numbers, got {}", key, count, out.size()));
    return out;
}

void KeyValueFile::reject_unknown(const std::vector<std::string_view>& known) const
{
    for (const auto& e : entries_)
        if (std::find(known.begin(), known.end(), e.key) == known.end())
            fail(e, fmt::format("unknown key '{}'", e.key));
}

std::string format_double(double v)
{
    return fmt::format("{:.17g}", v);
}

std::optional<double> parse_double(std::string_view s)
{
    s = trim(s);
    if (!s.empty() && s.front() == '+')
        s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
        return std::nullopt;
    return v;
}

std::optional<long long> parse_integer(std::string_view s)
{
    s = trim(s);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
        return std::nullopt;
    return v;
}

std::vector<std::string_view> split_words(std::string_view s)
{
    std::vector<std::string_view> words;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r' || s[i] == '\n'))
            ++i;
        std::size_t j = i;
        while (j < s.size() && !(s[j] == ' ' || s[j] == '\t' || s[j] == '\r' || s[j] == '\n'))
            ++j;
        if (j > i)
            words.push_back(s.substr(i, j - i));
        i = j;
    }
    return words;
}

} // namespace qpi
