#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ridgepred {

// INI-style run configuration:
//
//   # comment            ; comment
//   [section]
//   key = value
//
// Keys are addressed as "section.key".  Values are kept as text with their
// line number and converted on access; conversion errors name the key and line.
class IniDocument {
 public:
  struct Entry {
    std::string value;
    int line = 0;  // 0 for values set programmatically
  };

  static IniDocument parse(const std::string& text);
  static IniDocument load(const std::filesystem::path& path);

  // Rejects sections and keys outside `schema` (section -> allowed keys).
  void check_schema(const std::map<std::string, std::set<std::string>>& schema) const;

  bool has(const std::string& key) const;
  bool has_section(const std::string& section) const;
  void set(const std::string& key, const std::string& value);
  // Entries of other replace ours, keeping their line numbers.
  void merge(const IniDocument& other);
  const std::map<std::string, Entry>& entries() const noexcept { return entries_; }

  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  std::optional<std::int64_t> get_int(const std::string& key) const;
  std::optional<std::uint64_t> get_u64(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;
  // Comma-separated list.  A numeric list may instead be one of
  // linspace(a, b, k) or logspace(a, b, k) (endpoints in natural units).
  std::optional<std::vector<double>> get_double_list(const std::string& key) const;
  std::optional<std::vector<std::string>> get_string_list(const std::string& key) const;

  // Path values are resolved against this directory (the config file's).
  std::filesystem::path base_dir;

 private:
  const Entry* find(const std::string& key) const;
  std::map<std::string, Entry> entries_;
  std::set<std::string> sections_;
  std::map<std::string, int> section_lines_;
};

}  // namespace ridgepred
