#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cdk {

/// Flat `key = value` configuration with `[section]` headers and `#`
/// comments. Keys before any header live in the "" section. Lookups use
/// "section.key" paths. Unknown keys are rejected by validate_known.
class Config {
public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& path) const;
    std::string get_str(const std::string& path) const;
    std::string get_str(const std::string& path, const std::string& fallback) const;
    double get_num(const std::string& path) const;
    double get_num(const std::string& path, double fallback) const;
    int get_int(const std::string& path) const;
    int get_int(const std::string& path, int fallback) const;
    std::uint64_t get_u64(const std::string& path, std::uint64_t fallback) const;
    bool get_bool(const std::string& path, bool fallback) const;

    /// Comma-separated list of numbers.
    std::vector<double> get_num_list(const std::string& path) const;
    std::vector<int> get_int_list(const std::string& path) const;

    /// Sections named prefix + N, returned in increasing N order starting
    /// at 1; throws if the numbering has gaps.
    std::vector<std::string> numbered_sections(const std::string& prefix) const;

    /// Throws ConfigError when a key exists that is not listed in `allowed`
    /// ("section.key" paths; "section.*" admits a whole section and
    /// "prefixN.key" entries match "prefix*.key").
    void validate_known(const std::vector<std::string>& allowed) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::string require(const std::string& path) const;

    std::map<std::string, std::string> entries_;  // "section.key" -> value
    std::string origin_;
};

}  // namespace cdk
