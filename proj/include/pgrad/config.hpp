#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pgrad {

/// Flat key-value configuration document:
///   key = value            scalars and strings
///   key = [v1, v2, ...]    arrays
/// '#' starts a comment. Keys are case-sensitive.
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("config: cannot open " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    static KeyValueConfig parse(const std::string& text) {
        KeyValueConfig cfg;
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("config: line " + std::to_string(lineno) +
                                         ": expected 'key = value'");
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty())
                throw std::runtime_error("config: line " + std::to_string(lineno) + ": empty key");
            cfg.values_[key] = value;
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key) const { return raw(key); }
    std::string get_string(const std::string& key, const std::string& fallback) const {
        return has(key) ? raw(key) : fallback;
    }

    double get_double(const std::string& key) const { return to_double(raw(key), key); }
    double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    std::int64_t get_int(const std::string& key) const {
        const std::string v = raw(key);
        try {
            std::size_t pos = 0;
            const std::int64_t r = std::stoll(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("");
            return r;
        } catch (...) {
            throw std::runtime_error("config: key '" + key + "': not an integer: " + v);
        }
    }
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
        return has(key) ? get_int(key) : fallback;
    }

    std::vector<double> get_array(const std::string& key) const {
        const std::string v = raw(key);
        if (v.size() < 2 || v.front() != '[' || v.back() != ']')
            throw std::runtime_error("config: key '" + key + "': expected [ ... ]");
        std::vector<double> out;
        std::string body = v.substr(1, v.size() - 2);
        std::istringstream in(body);
        std::string item;
        while (std::getline(in, item, ',')) {
            const std::string t = trim(item);
            if (t.empty()) continue;
            out.push_back(to_double(t, key));
        }
        return out;
    }
    std::vector<double> get_array(const std::string& key, std::vector<double> fallback) const {
        return has(key) ? get_array(key) : std::move(fallback);
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;

    const std::string& raw(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw std::runtime_error("config: missing key '" + key + "'");
        return it->second;
    }

    static double to_double(const std::string& v, const std::string& key) {
        try {
            std::size_t pos = 0;
            const double r = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("");
            return r;
        } catch (...) {
            throw std::runtime_error("config: key '" + key + "': not a number: " + v);
        }
    }

    static std::string trim(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }
};

}  // namespace pgrad
