#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace npx {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Line-oriented key-value configuration.
//
//   # comment
//   include other.cfg          (resolved relative to the including file)
//   device.vdd = 0.8
//   calib.weights = -1, -0.5, 0.5, 1
//   layer = 63 63 3 2 32 0.5 first
//
// Entries keep file order; for scalar lookups the last occurrence of a key
// wins, so a file can include defaults and then override them. Repeated keys
// (e.g. `layer`) are retrieved in order with get_all().
class Config {
public:
    static Config load(const std::string& path);
    static Config from_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // Comma- and/or whitespace-separated numeric list.
    std::vector<double> get_double_list(const std::string& key) const;

    std::vector<std::string> get_all(const std::string& key) const;

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    // Resolve a path value relative to the directory of the file the config
    // was loaded from. Absolute paths pass through unchanged.
    std::string resolve_path(const std::string& value) const;

private:
    void parse_text(const std::string& text, const std::string& origin, int depth);
    const std::string* find(const std::string& key) const;

    std::vector<std::pair<std::string, std::string>> entries_;
    std::string base_dir_;
};

}  // namespace npx
