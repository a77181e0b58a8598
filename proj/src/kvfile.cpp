#include "ldosim/kvfile.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ldosim/errors.hpp"
#include "ldosim/units.hpp"

namespace ldosim {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

KvFile KvFile::parse(std::string_view text) {
    KvFile file;
    std::string section;
    int lineNo = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++lineNo;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) throw ParseError("malformed section header", lineNo);
            section = std::string(trim(line.substr(1, line.size() - 2)));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected key = value", lineNo);
        Entry e{section, std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))), lineNo};
        if (e.key.empty()) throw ParseError("empty key", lineNo);
        if (file.find(e.section, e.key))
            throw ParseError("duplicate key '" + e.key + "'" + (section.empty() ? "" : " in [" + section + "]"), lineNo);
        file.entries_.push_back(std::move(e));
    }
    return file;
}

KvFile KvFile::load(const std::string& path) {
    const std::string text = read_file(path);
    try {
        return parse(text);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), e.line());
    }
}

const KvFile::Entry* KvFile::find(std::string_view section, std::string_view key) const {
    for (const auto& e : entries_)
        if (e.section == section && e.key == key) return &e;
    return nullptr;
}

std::optional<std::string> KvFile::text(std::string_view section, std::string_view key) const {
    if (const auto* e = find(section, key)) return e->value;
    return std::nullopt;
}

std::optional<double> KvFile::number(std::string_view section, std::string_view key) const {
    const auto* e = find(section, key);
    if (!e) return std::nullopt;
    auto v = parse_si(e->value);
    if (!v) throw ParseError("'" + e->key + "' is not a number: " + e->value, e->line);
    return v;
}

std::vector<std::string> KvFile::sections() const {
    std::vector<std::string> out;
    for (const auto& e : entries_)
        if (std::find(out.begin(), out.end(), e.section) == out.end()) out.push_back(e.section);
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace ldosim
