#include "ridgepred/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "ridgepred/errors.hpp"
#include "ridgepred/io.hpp"

namespace ridgepred {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

bool valid_name(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-';
  });
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) out.push_back(trim(item));
  if (!s.empty() && s.back() == ',') out.push_back({});
  return out;
}

}  // namespace

IniDocument IniDocument::parse(const std::string& text) {
  IniDocument doc;
  std::istringstream in(text);
  std::string raw, section;
  for (int ln = 1; std::getline(in, raw); ++ln) {
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line[0] == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", ln);
      section = lower(trim(line.substr(1, line.size() - 2)));
      if (!valid_name(section)) throw ConfigError("invalid section name '" + section + "'", ln);
      if (!doc.sections_.insert(section).second)
        throw ConfigError("duplicate section [" + section + "]", ln);
      doc.section_lines_[section] = ln;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", ln);
    if (section.empty()) throw ConfigError("key outside of any [section]", ln);
    const std::string name = lower(trim(line.substr(0, eq)));
    if (!valid_name(name)) throw ConfigError("invalid key name", ln, section + "." + name);
    std::string value = trim(line.substr(eq + 1));
    // Trailing comments need whitespace before the marker.
    for (const char* marker : {" #", "\t#", " ;", "\t;"}) {
      const auto pos = value.find(marker);
      if (pos != std::string::npos) value = trim(value.substr(0, pos));
    }
    const std::string key = section + "." + name;
    if (doc.entries_.count(key)) throw ConfigError("duplicate key", ln, key);
    doc.entries_[key] = Entry{value, ln};
  }
  return doc;
}

IniDocument IniDocument::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  IniDocument doc = parse(text);
  doc.base_dir = path.parent_path();
  return doc;
}

void IniDocument::check_schema(const std::map<std::string, std::set<std::string>>& schema) const {
  for (const auto& s : sections_)
    if (!schema.count(s)) throw ConfigError("unknown section [" + s + "]", section_lines_.at(s), s);
  for (const auto& [key, entry] : entries_) {
    const auto dot = key.find('.');
    const auto it = schema.find(key.substr(0, dot));
    if (it == schema.end() || !it->second.count(key.substr(dot + 1)))
      throw ConfigError("unknown key", entry.line, key);
  }
}

const IniDocument::Entry* IniDocument::find(const std::string& key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

bool IniDocument::has(const std::string& key) const { return find(key) != nullptr; }

bool IniDocument::has_section(const std::string& section) const {
  return sections_.count(section) > 0;
}

void IniDocument::set(const std::string& key, const std::string& value) {
  const auto dot = key.find('.');
  if (dot == std::string::npos) throw ConfigError("override needs section.key", 0, key);
  sections_.insert(key.substr(0, dot));
  section_lines_.emplace(key.substr(0, dot), 0);
  entries_[key] = Entry{value, 0};
}

void IniDocument::merge(const IniDocument& other) {
  for (const auto& s : other.sections_) {
    sections_.insert(s);
    section_lines_[s] = other.section_lines_.at(s);
  }
  for (const auto& [key, entry] : other.entries_) entries_[key] = entry;
}

std::optional<std::string> IniDocument::get_string(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  return e->value;
}

std::optional<double> IniDocument::get_double(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  try {
    const double v = parse_double(e->value);
    if (!std::isfinite(v)) throw IoError("value must be finite");
    return v;
  } catch (const IoError& err) {
    throw ConfigError(err.what(), e->line, key);
  }
}

std::optional<std::int64_t> IniDocument::get_int(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  std::int64_t v = 0;
  const auto& s = e->value;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ConfigError("'" + s + "' is not an integer", e->line, key);
  return v;
}

std::optional<std::uint64_t> IniDocument::get_u64(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  std::uint64_t v = 0;
  const auto& s = e->value;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ConfigError("'" + s + "' is not an unsigned integer", e->line, key);
  return v;
}

std::optional<bool> IniDocument::get_bool(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  const std::string v = lower(e->value);
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw ConfigError("'" + e->value + "' is not a boolean", e->line, key);
}

std::optional<std::vector<double>> IniDocument::get_double_list(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  const std::string& s = e->value;
  const bool lin = s.rfind("linspace(", 0) == 0, log = s.rfind("logspace(", 0) == 0;
  std::vector<double> out;
  try {
    if (lin || log) {
      if (s.back() != ')') throw IoError("unterminated " + s.substr(0, 8));
      const auto args = split_commas(s.substr(9, s.size() - 10));
      if (args.size() != 3) throw IoError("grid needs (start, stop, count)");
      const double a = parse_double(args[0]), b = parse_double(args[1]), k = parse_double(args[2]);
      if (!(k >= 2.0) || k != std::floor(k) || k > 1e6) throw IoError("grid count must be >= 2");
      if (log && !(a > 0.0 && b > 0.0)) throw IoError("logspace endpoints must be > 0");
      const int count = int(k);
      for (int i = 0; i < count; ++i) {
        const double t = double(i) / (count - 1);
        out.push_back(lin ? a + (b - a) * t : std::exp(std::log(a) + (std::log(b) - std::log(a)) * t));
      }
      out.front() = a;
      out.back() = b;
      return out;
    }
    for (const auto& item : split_commas(s)) {
      const double v = parse_double(item);
      if (!std::isfinite(v)) throw IoError("list values must be finite");
      out.push_back(v);
    }
  } catch (const IoError& err) {
    throw ConfigError(err.what(), e->line, key);
  }
  if (out.empty()) throw ConfigError("empty list", e->line, key);
  return out;
}

std::optional<std::vector<std::string>> IniDocument::get_string_list(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  auto out = split_commas(e->value);
  for (const auto& item : out)
    if (item.empty()) throw ConfigError("empty list item", e->line, key);
  return out;
}

}  // namespace ridgepred
