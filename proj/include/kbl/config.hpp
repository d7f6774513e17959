#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace kbl {

/// Raised for malformed or invalid configuration input.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/**
 * Flat key-value configuration with dotted sections.
 *
 * Grammar, one entry per line:
 *   # comment                   ignored
 *   [section]                   keys below are prefixed "section."
 *   key = value                 value is the rest of the line, trimmed
 *
 * Keys keep insertion order so a parsed file serializes back to a
 * canonical snapshot. Values are strings; typed getters parse on access.
 */
class Config {
public:
    Config() = default;

    static Config parse(const std::string& text) {
        Config cfg;
        std::istringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string s = trim(line);
            if (s.empty() || s[0] == '#') continue;
            if (s.front() == '[') {
                if (s.back() != ']')
                    throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section header");
                section = trim(s.substr(1, s.size() - 2));
                continue;
            }
            auto eq = s.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
            std::string key = trim(s.substr(0, eq));
            std::string value = trim(s.substr(eq + 1));
            if (key.empty())
                throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
            if (!section.empty()) key = section + "." + key;
            cfg.set(key, value);
        }
        return cfg;
    }

    static Config load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw ConfigError("cannot open config file: " + path);
        std::ostringstream ss;
        ss << f.rdbuf();
        return parse(ss.str());
    }

    void set(const std::string& key, const std::string& value) {
        auto it = index_.find(key);
        if (it == index_.end()) {
            index_[key] = entries_.size();
            entries_.push_back({key, value});
        } else {
            entries_[it->second].second = value;
        }
    }

    bool has(const std::string& key) const { return index_.count(key) > 0; }

    std::string get_str(const std::string& key) const {
        auto it = index_.find(key);
        if (it == index_.end()) throw ConfigError("missing config key: " + key);
        return entries_[it->second].second;
    }

    std::string get_str(const std::string& key, const std::string& fallback) const {
        return has(key) ? get_str(key) : fallback;
    }

    double get_double(const std::string& key) const { return parse_double(key, get_str(key)); }
    double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    long get_int(const std::string& key) const {
        const std::string v = get_str(key);
        try {
            std::size_t pos = 0;
            long x = std::stol(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return x;
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': not an integer: " + v);
        }
    }
    long get_int(const std::string& key, long fallback) const {
        return has(key) ? get_int(key) : fallback;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string v = get_str(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError("config key '" + key + "': not a boolean: " + v);
    }

    std::vector<double> get_doubles(const std::string& key) const {
        std::istringstream in(get_str(key));
        std::vector<double> out;
        std::string tok;
        while (in >> tok) out.push_back(parse_double(key, tok));
        return out;
    }

    /// Rejects keys outside the allowed set; the error names every
    /// offending key and the full list of valid ones.
    void validate_keys(const std::vector<std::string>& allowed) const {
        std::vector<std::string> bad;
        for (const auto& [k, v] : entries_) {
            (void)v;
            bool ok = false;
            for (const auto& a : allowed) {
                if (k == a || (a.back() == '*' && k.rfind(a.substr(0, a.size() - 1), 0) == 0)) {
                    ok = true;
                    break;
                }
            }
            if (!ok) bad.push_back(k);
        }
        if (!bad.empty()) {
            std::string msg = "invalid config key(s):";
            for (const auto& k : bad) msg += " " + k;
            msg += "; valid keys:";
            for (const auto& a : allowed) msg += " " + a;
            throw ConfigError(msg);
        }
    }

    /// Canonical snapshot, one "key = value" per line in insertion order.
    std::string serialize() const {
        std::string out;
        for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
        return out;
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

private:
    static std::string trim(const std::string& s) {
        auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    static double parse_double(const std::string& key, const std::string& v) {
        try {
            std::size_t pos = 0;
            double x = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return x;
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': not a number: " + v);
        }
    }

    std::vector<std::pair<std::string, std::string>> entries_;
    std::map<std::string, std::size_t> index_;
};

/// FNV-1a 64-bit hash, used for input manifests.
inline std::uint64_t fnv1a(const std::string& data, std::uint64_t h = 0xCBF29CE484222325ULL) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace kbl
