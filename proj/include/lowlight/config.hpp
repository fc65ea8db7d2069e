#pragma once

#include <map>
#include <string>

#include "lowlight/error.hpp"

namespace lowlight::config {

// key = value lines; '#' comments; blank lines ignored.
class Config {
  public:
    Config() = default;
    explicit Config(std::map<std::string, std::string> entries)
        : entries_(std::move(entries)) {}

    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text);

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

  private:
    std::map<std::string, std::string> entries_;
};

}  // namespace lowlight::config
