#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ldosim {

/// Flat `key = value` text with optional `[section]` headers and `#`
/// comments. Used for parameter files and run configs alike.
class KvFile {
public:
    struct Entry {
        std::string section;  ///< empty before the first header
        std::string key;
        std::string value;
        int line = 0;
    };

    /// Throws ParseError on malformed lines or a key repeated within a section.
    static KvFile parse(std::string_view text);
    static KvFile load(const std::string& path);

    [[nodiscard]] const std::vector<Entry>& entries() const noexcept { return entries_; }
    [[nodiscard]] const Entry* find(std::string_view section, std::string_view key) const;
    [[nodiscard]] std::optional<std::string> text(std::string_view section, std::string_view key) const;
    /// SI-suffixed number; throws ParseError (with line) when present but not numeric.
    [[nodiscard]] std::optional<double> number(std::string_view section, std::string_view key) const;
    [[nodiscard]] std::vector<std::string> sections() const;

private:
    std::vector<Entry> entries_;
};

/// Whole file as a string; throws ConfigError when it cannot be read.
std::string read_file(const std::string& path);

}  // namespace ldosim
