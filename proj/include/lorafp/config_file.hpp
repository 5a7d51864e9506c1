#pragma once

#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Minimal INI-style key/value format used for plan files and population
// files:
//
//   # comment
//   [section name]
//   key = value
//
// Section names and key order are preserved, so a parsed file serializes back
// deterministically.

namespace lorafp {

struct ConfigSection {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;

    const std::string* find(const std::string& key) const {
        for (const auto& [k, v] : entries)
            if (k == key) return &v;
        return nullptr;
    }
    bool has(const std::string& key) const { return find(key) != nullptr; }

    std::string get_string(const std::string& key) const {
        const std::string* v = find(key);
        if (!v) throw std::invalid_argument("config: [" + name + "] missing key '" + key + "'");
        return *v;
    }
    std::string get_string(const std::string& key, const std::string& fallback) const {
        const std::string* v = find(key);
        return v ? *v : fallback;
    }
    double get_double(const std::string& key) const { return parse_double(get_string(key), key); }
    double get_double(const std::string& key, double fallback) const {
        const std::string* v = find(key);
        return v ? parse_double(*v, key) : fallback;
    }
    long long get_int(const std::string& key) const { return parse_int(get_string(key), key); }
    long long get_int(const std::string& key, long long fallback) const {
        const std::string* v = find(key);
        return v ? parse_int(*v, key) : fallback;
    }
    std::uint64_t get_u64(const std::string& key) const {
        return static_cast<std::uint64_t>(parse_int(get_string(key), key));
    }
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        const std::string* v = find(key);
        return v ? static_cast<std::uint64_t>(parse_int(*v, key)) : fallback;
    }

    void set(const std::string& key, const std::string& value) {
        for (auto& [k, v] : entries)
            if (k == key) {
                v = value;
                return;
            }
        entries.emplace_back(key, value);
    }

private:
    double parse_double(const std::string& s, const std::string& key) const {
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            if (s == "inf") return std::numeric_limits<double>::infinity();
            throw std::invalid_argument("config: [" + name + "] key '" + key +
                                        "' is not a number: " + s);
        }
    }
    long long parse_int(const std::string& s, const std::string& key) const {
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw std::invalid_argument("config: [" + name + "] key '" + key +
                                        "' is not an integer: " + s);
        }
    }
};

struct ConfigFile {
    std::vector<ConfigSection> sections;

    const ConfigSection* find(const std::string& name) const {
        for (const auto& s : sections)
            if (s.name == name) return &s;
        return nullptr;
    }
    const ConfigSection& get(const std::string& name) const {
        const ConfigSection* s = find(name);
        if (!s) throw std::invalid_argument("config: missing section [" + name + "]");
        return *s;
    }
    ConfigSection& get_or_add(const std::string& name) {
        for (auto& s : sections)
            if (s.name == name) return s;
        sections.push_back({name, {}});
        return sections.back();
    }
    // All sections whose name starts with "prefix " (e.g. "scenario day1").
    std::vector<const ConfigSection*> with_prefix(const std::string& prefix) const {
        std::vector<const ConfigSection*> out;
        for (const auto& s : sections)
            if (s.name.rfind(prefix + " ", 0) == 0) out.push_back(&s);
        return out;
    }

    std::string serialize() const {
        std::ostringstream out;
        for (const auto& s : sections) {
            out << "[" << s.name << "]\n";
            for (const auto& [k, v] : s.entries) out << k << " = " << v << "\n";
            out << "\n";
        }
        return out.str();
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw std::runtime_error("config: cannot open " + path + " for writing");
        out << serialize();
    }

    static ConfigFile parse(std::istream& in) {
        ConfigFile cfg;
        ConfigSection* current = nullptr;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string trimmed = trim(line);
            if (trimmed.empty() || trimmed[0] == '#' || trimmed[0] == ';') continue;
            if (trimmed.front() == '[') {
                if (trimmed.back() != ']')
                    throw std::invalid_argument("config: malformed section header at line " +
                                                std::to_string(lineno));
                cfg.sections.push_back({trim(trimmed.substr(1, trimmed.size() - 2)), {}});
                current = &cfg.sections.back();
                continue;
            }
            const std::size_t eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("config: expected 'key = value' at line " +
                                            std::to_string(lineno));
            if (!current)
                throw std::invalid_argument("config: key outside any section at line " +
                                            std::to_string(lineno));
            current->entries.emplace_back(trim(trimmed.substr(0, eq)),
                                          trim(trimmed.substr(eq + 1)));
        }
        return cfg;
    }

    static ConfigFile load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("config: cannot open " + path);
        return parse(in);
    }

private:
    static std::string trim(const std::string& s) {
        const auto begin = s.find_first_not_of(" \t\r\n");
        if (begin == std::string::npos) return "";
        const auto end = s.find_last_not_of(" \t\r\n");
        return s.substr(begin, end - begin + 1);
    }
};

}  // namespace lorafp
