#include "cdk/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cdk/errors.hpp"

namespace cdk {

namespace {
std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}
}  // namespace

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

Config Config::parse_string(const std::string& text, const std::string& origin) {
    Config cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": bad section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        const std::string path = section.empty() ? key : section + "." + key;
        if (cfg.entries_.count(path))
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key " + path);
        cfg.entries_[path] = value;
    }
    return cfg;
}

bool Config::has(const std::string& path) const { return entries_.count(path) != 0; }

std::string Config::require(const std::string& path) const {
    const auto it = entries_.find(path);
    if (it == entries_.end()) throw ConfigError(origin_ + ": missing key " + path);
    return it->second;
}

std::string Config::get_str(const std::string& path) const { return require(path); }

std::string Config::get_str(const std::string& path, const std::string& fallback) const {
    const auto it = entries_.find(path);
    return it == entries_.end() ? fallback : it->second;
}

double Config::get_num(const std::string& path) const {
    const std::string v = require(path);
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(origin_ + ": key " + path + " is not a number: " + v);
    }
}

double Config::get_num(const std::string& path, double fallback) const {
    return has(path) ? get_num(path) : fallback;
}

int Config::get_int(const std::string& path) const {
    const double d = get_num(path);
    const int i = static_cast<int>(d);
    if (static_cast<double>(i) != d)
        throw ConfigError(origin_ + ": key " + path + " is not an integer");
    return i;
}

int Config::get_int(const std::string& path, int fallback) const {
    return has(path) ? get_int(path) : fallback;
}

std::uint64_t Config::get_u64(const std::string& path, std::uint64_t fallback) const {
    if (!has(path)) return fallback;
    const std::string v = require(path);
    try {
        std::size_t used = 0;
        const std::uint64_t r = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError(origin_ + ": key " + path + " is not an unsigned integer: " + v);
    }
}

bool Config::get_bool(const std::string& path, bool fallback) const {
    if (!has(path)) return fallback;
    const std::string v = require(path);
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError(origin_ + ": key " + path + " is not a boolean: " + v);
}

std::vector<double> Config::get_num_list(const std::string& path) const {
    const std::string v = require(path);
    std::vector<double> out;
    std::istringstream is(v);
    std::string item;
    while (std::getline(is, item, ',')) {
        const std::string s = trim(item);
        if (s.empty()) continue;
        try {
            out.push_back(std::stod(s));
        } catch (const std::exception&) {
            throw ConfigError(origin_ + ": key " + path + " has a bad number: " + s);
        }
    }
    if (out.empty()) throw ConfigError(origin_ + ": key " + path + " is an empty list");
    return out;
}

std::vector<int> Config::get_int_list(const std::string& path) const {
    std::vector<int> out;
    for (const double d : get_num_list(path)) {
        const int i = static_cast<int>(d);
        if (static_cast<double>(i) != d)
            throw ConfigError(origin_ + ": key " + path + " has a non-integer entry");
        out.push_back(i);
    }
    return out;
}

std::vector<std::string> Config::numbered_sections(const std::string& prefix) const {
    std::vector<std::string> out;
    for (int n = 1;; ++n) {
        const std::string name = prefix + std::to_string(n);
        bool found = false;
        for (const auto& [path, value] : entries_)
            if (path.rfind(name + ".", 0) == 0) { found = true; break; }
        if (!found) break;
        out.push_back(name);
    }
    // Reject gaps: any higher-numbered section beyond the contiguous run.
    for (const auto& [path, value] : entries_) {
        if (path.rfind(prefix, 0) != 0) continue;
        const std::size_t dot = path.find('.', prefix.size());
        if (dot == std::string::npos) continue;
        const std::string tail = path.substr(prefix.size(), dot - prefix.size());
        if (tail.empty() || tail.find_first_not_of("0123456789") != std::string::npos) continue;
        const int n = std::stoi(tail);
        if (n < 1 || n > static_cast<int>(out.size()))
            throw ConfigError(origin_ + ": section " + prefix + tail +
                              " breaks the contiguous numbering from 1");
    }
    return out;
}

void Config::validate_known(const std::vector<std::string>& allowed) const {
    for (const auto& [path, value] : entries_) {
        bool ok = false;
        for (const auto& pattern : allowed) {
            if (pattern == path) { ok = true; break; }
            const std::size_t star = pattern.find('*');
            if (star == std::string::npos) continue;
            const std::string pre = pattern.substr(0, star);
            const std::string post = pattern.substr(star + 1);
            if (path.size() >= pre.size() + post.size() && path.rfind(pre, 0) == 0 &&
                path.compare(path.size() - post.size(), post.size(), post) == 0) {
                ok = true;
                break;
            }
        }
        if (!ok) throw ConfigError(origin_ + ": unknown key " + path);
    }
}

}  // namespace cdk
