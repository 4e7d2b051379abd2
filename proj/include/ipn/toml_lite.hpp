#pragma once

// Minimal TOML reader covering the configuration dialect used here:
// [table] and [[array-of-table]] headers (dotted paths allowed), and
// key = value lines with strings, booleans, numbers, and single-line
// (possibly nested) arrays.  Parses into an nlohmann::json tree.

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ipn/errors.hpp"

namespace ipn::toml_lite {

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// Strip a trailing comment that is not inside a string literal.
inline std::string strip_comment(const std::string& s) {
    bool in_str = false;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') in_str = !in_str;
        if (s[i] == '#' && !in_str) return s.substr(0, i);
    }
    return s;
}

inline nlohmann::json parse_value(const std::string& text, size_t& pos);

inline void skip_ws(const std::string& t, size_t& pos) {
    while (pos < t.size() && std::isspace(static_cast<unsigned char>(t[pos]))) ++pos;
}

inline nlohmann::json parse_array(const std::string& t, size_t& pos) {
    nlohmann::json arr = nlohmann::json::array();
    ++pos;  // '['
    skip_ws(t, pos);
    if (pos < t.size() && t[pos] == ']') {
        ++pos;
        return arr;
    }
    while (true) {
        arr.push_back(parse_value(t, pos));
        skip_ws(t, pos);
        if (pos >= t.size()) throw ConfigError("toml: unterminated array");
        if (t[pos] == ',') {
            ++pos;
            skip_ws(t, pos);
            continue;
        }
        if (t[pos] == ']') {
            ++pos;
            return arr;
        }
        throw ConfigError("toml: expected ',' or ']' in array");
    }
}

inline nlohmann::json parse_value(const std::string& t, size_t& pos) {
    skip_ws(t, pos);
    if (pos >= t.size()) throw ConfigError("toml: missing value");
    if (t[pos] == '[') return parse_array(t, pos);
    if (t[pos] == '"') {
        const size_t end = t.find('"', pos + 1);
        if (end == std::string::npos) throw ConfigError("toml: unterminated string");
        std::string s = t.substr(pos + 1, end - pos - 1);
        pos = end + 1;
        return s;
    }
    size_t end = pos;
    while (end < t.size() && t[end] != ',' && t[end] != ']') ++end;
    const std::string tok = trim(t.substr(pos, end - pos));
    pos = end;
    if (tok == "true") return true;
    if (tok == "false") return false;
    try {
        size_t used = 0;
        if (tok.find('.') == std::string::npos && tok.find('e') == std::string::npos &&
            tok.find('E') == std::string::npos) {
            const long long v = std::stoll(tok, &used);
            if (used == tok.size()) return v;
        }
        const double v = std::stod(tok, &used);
        if (used == tok.size()) return v;
    } catch (...) {
    }
    throw ConfigError("toml: cannot parse value '" + tok + "'");
}

inline nlohmann::json* navigate(nlohmann::json& root, const std::string& dotted, bool as_array) {
    nlohmann::json* cur = &root;
    std::stringstream ss(dotted);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(trim(part));
    for (size_t i = 0; i < parts.size(); ++i) {
        const bool last = i + 1 == parts.size();
        nlohmann::json& slot = (*cur)[parts[i]];
        if (last && as_array) {
            if (slot.is_null()) slot = nlohmann::json::array();
            if (!slot.is_array()) throw ConfigError("toml: " + dotted + " is not an array of tables");
            slot.push_back(nlohmann::json::object());
            return &slot.back();
        }
        if (slot.is_null()) slot = nlohmann::json::object();
        if (slot.is_array()) {
            if (slot.empty()) throw ConfigError("toml: empty table array " + parts[i]);
            cur = &slot.back();
        } else {
            cur = &slot;
        }
    }
    return cur;
}

}  // namespace detail

inline nlohmann::json parse(const std::string& text) {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* cur = &root;
    std::stringstream ss(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(ss, raw)) {
        ++lineno;
        const std::string line = detail::trim(detail::strip_comment(raw));
        if (line.empty()) continue;
        try {
            if (line.front() == '[') {
                const bool arr = line.size() > 1 && line[1] == '[';
                const size_t close = line.find(arr ? "]]" : "]");
                if (close == std::string::npos) throw ConfigError("toml: bad table header");
                const std::string name =
                    detail::trim(line.substr(arr ? 2 : 1, close - (arr ? 2 : 1)));
                cur = detail::navigate(root, name, arr);
                continue;
            }
            const size_t eq = line.find('=');
            if (eq == std::string::npos) throw ConfigError("toml: expected key = value");
            const std::string key = detail::trim(line.substr(0, eq));
            std::string rest = detail::trim(line.substr(eq + 1));
            size_t pos = 0;
            (*cur)[key] = detail::parse_value(rest, pos);
            detail::skip_ws(rest, pos);
            if (pos != rest.size()) throw ConfigError("toml: trailing characters after value");
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(e.what()) + " (line " + std::to_string(lineno) + ")");
        }
    }
    return root;
}

inline nlohmann::json parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

}  // namespace ipn::toml_lite
