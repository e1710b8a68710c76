#include "npx/config.hpp"

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace npx {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open config file: " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

double parse_double(const std::string& key, const std::string& value) {
    char* end = nullptr;
    double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0')
        throw ConfigError("config key '" + key + "': not a number: '" + value + "'");
    return v;
}

}  // namespace

Config Config::load(const std::string& path) {
    Config cfg;
    cfg.base_dir_ = std::filesystem::path(path).parent_path().string();
    cfg.parse_text(read_file(path), path, 0);
    return cfg;
}

Config Config::from_string(const std::string& text, const std::string& origin) {
    Config cfg;
    cfg.parse_text(text, origin, 0);
    return cfg;
}

void Config::parse_text(const std::string& text, const std::string& origin, int depth) {
    if (depth > 16)
        throw ConfigError("include depth exceeded at " + origin + " (include cycle?)");
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    const std::string dir = std::filesystem::path(origin).parent_path().string();
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        if (line.rfind("include", 0) == 0 &&
            (line.size() == 7 || std::isspace(static_cast<unsigned char>(line[7])))) {
            std::string target = trim(line.substr(7));
            if (target.size() >= 2 && target.front() == '"' && target.back() == '"')
                target = target.substr(1, target.size() - 2);
            if (target.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": include without a path");
            std::filesystem::path p(target);
            if (p.is_relative() && !dir.empty())
                p = std::filesystem::path(dir) / p;
            parse_text(read_file(p.string()), p.string(), depth + 1);
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        entries_.emplace_back(key, value);
    }
}

const std::string* Config::find(const std::string& key) const {
    const std::string* hit = nullptr;
    for (const auto& [k, v] : entries_)
        if (k == key)
            hit = &v;
    return hit;
}

bool Config::has(const std::string& key) const { return find(key) != nullptr; }

std::string Config::get_string(const std::string& key) const {
    const std::string* v = find(key);
    if (!v)
        throw ConfigError("missing config key: " + key);
    return *v;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    const std::string* v = find(key);
    return v ? *v : fallback;
}

double Config::get_double(const std::string& key) const {
    return parse_double(key, get_string(key));
}

double Config::get_double(const std::string& key, double fallback) const {
    const std::string* v = find(key);
    return v ? parse_double(key, *v) : fallback;
}

long long Config::get_int(const std::string& key) const {
    const std::string s = get_string(key);
    char* end = nullptr;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0')
        throw ConfigError("config key '" + key + "': not an integer: '" + s + "'");
    return v;
}

long long Config::get_int(const std::string& key, long long fallback) const {
    return has(key) ? get_int(key) : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const std::string* v = find(key);
    if (!v)
        return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
    throw ConfigError("config key '" + key + "': not a boolean: '" + *v + "'");
}

std::vector<double> Config::get_double_list(const std::string& key) const {
    std::string s = get_string(key);
    for (char& c : s)
        if (c == ',')
            c = ' ';
    std::istringstream in(s);
    std::vector<double> out;
    std::string tok;
    while (in >> tok)
        out.push_back(parse_double(key, tok));
    if (out.empty())
        throw ConfigError("config key '" + key + "': empty list");
    return out;
}

std::vector<std::string> Config::get_all(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_)
        if (k == key)
            out.push_back(v);
    return out;
}

std::string Config::resolve_path(const std::string& value) const {
    std::filesystem::path p(value);
    if (p.is_absolute() || base_dir_.empty())
        return value;
    return (std::filesystem::path(base_dir_) / p).string();
}

}  // namespace npx
