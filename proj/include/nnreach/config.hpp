#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nnreach {

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::size_t line, const std::string& reason)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + reason : reason), line_(line)
    {
    }
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Ordered `key = value` entries. Lines starting with `#` are comments.
class KeyValueFile {
public:
    struct Entry {
        std::string key;
        std::string value;
        std::size_t line = 0;
    };

    static KeyValueFile parse(std::string_view text);
    static KeyValueFile load(const std::filesystem::path& path);

    void set(std::string key, std::string value);
    std::optional<std::string> get(std::string_view key) const;
    const std::string& require(std::string_view key) const;
    bool contains(std::string_view key) const { return get(key).has_value(); }
    /// Entries whose key starts with `prefix`, in file order.
    std::vector<Entry> with_prefix(std::string_view prefix) const;
    const std::vector<Entry>& entries() const { return entries_; }

    std::string dump() const;

private:
    std::vector<Entry> entries_;
};

std::string trim(std::string_view s);
std::vector<std::string> split_list(std::string_view s, char sep = ',');
double parse_double(std::string_view s);
long parse_long(std::string_view s);

/// Write to a sibling temporary file, then rename over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

} // namespace nnreach
