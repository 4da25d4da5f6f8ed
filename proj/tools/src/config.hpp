// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace svcdiff::cli {

using nlohmann::json;

// Bad configuration or arguments; reported with exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class KeyType { kInt, kSeed, kNumber, kBool, kString, kIntList, kNumberList };

struct ConfigKey {
  const char* section;
  const char* name;
  KeyType type;
  json fallback;
  const char* help;
  std::vector<std::string> choices{};  // strings only; empty = free-form

  std::string dotted() const { return std::string(section) + "." + name; }
};

// Every recognised key with its default.
std::span<const ConfigKey> config_schema();
const ConfigKey& find_key(const std::string& dotted);

// Resolved configuration: defaults, then the file, then flag overrides.
class RunConfig {
 public:
  RunConfig();

  // JSON file with one object per section; unknown sections/keys and
  // mistyped values are rejected.
  void merge_file(const std::filesystem::path& path);
  void merge_json(const json& doc, const std::string& origin);
  // "section.key=value"; value is parsed as JSON, falling back to a string.
  void set_override(const std::string& assignment);
  void set(const std::string& dotted, const json& value);

  const json& get(const std::string& dotted) const;
  std::int64_t integer(const std::string& dotted) const;
  std::uint64_t seed(const std::string& dotted) const;
  double number(const std::string& dotted) const;
  bool boolean(const std::string& dotted) const;
  std::string string(const std::string& dotted) const;
  std::vector<int> int_list(const std::string& dotted) const;
  std::vector<double> number_list(const std::string& dotted) const;

  // Sorted-key JSON of every value; the config hash is SHA-256 over it.
  const json& resolved() const { return values_; }
  std::string canonical() const;
  std::string hash() const;

 private:
  json values_;
};

json check_value(const ConfigKey& key, const json& value);
std::string sha256_hex(const std::string& bytes);

}  // namespace svcdiff::cli
