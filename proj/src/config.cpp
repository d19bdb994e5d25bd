#include "nnreach/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace nnreach {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s, char sep)
{
    std::vector<std::string> out;
    if (trim(s).empty())
        return out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

double parse_double(std::string_view s)
{
    const std::string t = trim(s);
    double v = 0.0;
    const char* first = t.data();
    if (!t.empty() && t[0] == '+')
        ++first;
    auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw std::invalid_argument("not a number: '" + t + "'");
    return v;
}

long parse_long(std::string_view s)
{
    const std::string t = trim(s);
    long v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw std::invalid_argument("not an integer: '" + t + "'");
    return v;
}

KeyValueFile KeyValueFile::parse(std::string_view text)
{
    KeyValueFile f;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos)
            end = text.size();
        ++line_no;
        const std::string line = trim(text.substr(start, end - start));
        start = end + 1;
        if (line.empty() || line[0] == '#')
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(line_no, "expected 'key = value'");
        std::string key = trim(std::string_view(line).substr(0, eq));
        if (key.empty())
            throw ConfigError(line_no, "empty key");
        if (f.contains(key))
            throw ConfigError(line_no, "duplicate key '" + key + "'");
        f.entries_.push_back({std::move(key), trim(std::string_view(line).substr(eq + 1)), line_no});
    }
    return f;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) { return parse(read_file(path)); }

void KeyValueFile::set(std::string key, std::string value)
{
    for (auto& e : entries_)
        if (e.key == key) {
            e.value = std::move(value);
            return;
        }
    entries_.push_back({std::move(key), std::move(value), 0});
}

std::optional<std::string> KeyValueFile::get(std::string_view key) const
{
    for (const auto& e : entries_)
        if (e.key == key)
            return e.value;
    return std::nullopt;
}

const std::string& KeyValueFile::require(std::string_view key) const
{
    for (const auto& e : entries_)
        if (e.key == key)
            return e.value;
    throw ConfigError(0, "missing key '" + std::string(key) + "'");
}

std::vector<KeyValueFile::Entry> KeyValueFile::with_prefix(std::string_view prefix) const
{
    std::vector<Entry> out;
    for (const auto& e : entries_)
        if (e.key.compare(0, prefix.size(), prefix) == 0)
            out.push_back(e);
    return out;
}

std::string KeyValueFile::dump() const
{
    std::string out;
    for (const auto& e : entries_) {
        out += e.key;
        out += " = ";
        out += e.value;
        out += '\n';
    }
    return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os)
            throw std::runtime_error("cannot write " + tmp.string());
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!os)
            throw std::runtime_error("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw std::runtime_error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace nnreach
