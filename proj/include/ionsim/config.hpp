#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ionsim/errors.hpp"

namespace ionsim {

// Flat key-value configuration: `namespace.key = value` lines, `#` comments.
// Numeric lists accept comma-separated values and `start:step:stop` ranges.
class Config {
 public:
  static Config from_file(const std::filesystem::path& path);
  static Config from_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_u64(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_list(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

  // Rejects keys outside the documented set, naming each offender.
  void require_known(const std::set<std::string>& known) const;

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace ionsim
