#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace enko {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Flat key=value configuration with dotted namespaces. Sources: a config
// file (one key=value per line, '#' comments) plus --key value command-line
// overrides. Commands validate against their allowed key set; unknown keys
// are a hard error.
class Config {
  public:
    Config() = default;
    static Config from_file(const std::string& path);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string str(const std::string& key) const;  // throws if missing
    std::string str_or(const std::string& key, const std::string& fallback) const;
    int int_or(const std::string& key, int fallback) const;
    double double_or(const std::string& key, double fallback) const;
    std::uint64_t u64_or(const std::string& key, std::uint64_t fallback) const;
    bool bool_or(const std::string& key, bool fallback) const;
    std::vector<double> list_or(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<int> int_list_or(const std::string& key, const std::vector<int>& fallback) const;

    // Throws listing every key not in `allowed`.
    void require_known(const std::vector<std::string>& allowed) const;

    // Sorted key=value lines; loadable by from_file.
    std::string echo() const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

  private:
    std::map<std::string, std::string> kv_;
};

std::vector<double> parse_double_list(const std::string& s);
std::vector<int> parse_int_list(const std::string& s);  // supports "a-b" ranges

}  // namespace enko
