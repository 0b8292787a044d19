// SPDX-License-Identifier: Apache-2.0
#pragma once

// Experiment config files: INI-style sections of `key = value` lines.
//
//   # comment            ; comment
//   [run]
//   kind  = limit-compare
//   n     = 256, 1024    <- lists are comma separated
//
// Errors carry "origin:line:" positions.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "stochgrid/errors.hpp"
#include "stochgrid/report_io.hpp"

namespace stochgrid {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

class ConfigFile {
public:
  struct Entry {
    std::string value;
    std::size_t line = 0;  ///< 0 for values set programmatically
  };
  using Section = std::map<std::string, Entry>;
  /// Allowed keys per section.
  using Schema = std::map<std::string, std::set<std::string>>;

  static ConfigFile parse(std::string_view text, std::string origin = "<config>") {
    ConfigFile cfg;
    cfg.origin_ = std::move(origin);
    std::string section;
    std::size_t lineno = 0;
    while (!text.empty()) {
      ++lineno;
      const auto nl = text.find('\n');
      std::string_view line = text.substr(0, nl);
      text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
      if (const auto hash = line.find_first_of("#;"); hash != std::string_view::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') cfg.fail(lineno, "unterminated section header");
        section = std::string(detail::trim(line.substr(1, line.size() - 2)));
        if (section.empty()) cfg.fail(lineno, "empty section name");
        cfg.sections_[section];
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) cfg.fail(lineno, "expected 'key = value'");
      if (section.empty()) cfg.fail(lineno, "key outside of any section");
      const std::string key(detail::trim(line.substr(0, eq)));
      const std::string value(detail::trim(line.substr(eq + 1)));
      if (key.empty()) cfg.fail(lineno, "missing key");
      if (value.empty()) cfg.fail(lineno, "missing value for '" + key + "'");
      auto& sec = cfg.sections_[section];
      if (sec.count(key)) cfg.fail(lineno, "duplicate key '" + key + "' in [" + section + "]");
      sec[key] = {value, lineno};
    }
    return cfg;
  }

  static ConfigFile load(const std::filesystem::path& path) { return parse(read_file(path), path.string()); }

  const std::string& origin() const noexcept { return origin_; }
  const std::map<std::string, Section>& sections() const noexcept { return sections_; }

  bool has(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
  }

  void set(const std::string& section, const std::string& key, std::string value) {
    sections_[section][key] = {std::move(value), 0};
  }

  void erase(const std::string& section, const std::string& key) {
    if (auto s = sections_.find(section); s != sections_.end()) s->second.erase(key);
  }

  void check_schema(const Schema& schema) const {
    for (const auto& [name, sec] : sections_) {
      const auto allowed = schema.find(name);
      if (allowed == schema.end()) {
        const std::size_t line = sec.empty() ? 0 : sec.begin()->second.line;
        fail(line, "unknown section [" + name + "]");
      }
      for (const auto& [key, entry] : sec)
        if (!allowed->second.count(key)) fail(entry.line, "unknown key '" + key + "' in [" + name + "]");
    }
  }

  std::string text(const std::string& section, const std::string& key, const std::string& fallback) const {
    const Entry* e = find(section, key);
    return e ? e->value : fallback;
  }

  double real(const std::string& section, const std::string& key, double fallback) const {
    const Entry* e = find(section, key);
    return e ? to_real(*e, section, key) : fallback;
  }

  std::uint64_t integer(const std::string& section, const std::string& key, std::uint64_t fallback) const {
    const Entry* e = find(section, key);
    return e ? to_integer(e->value, *e, section, key) : fallback;
  }

  std::vector<double> reals(const std::string& section, const std::string& key, std::vector<double> fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    std::vector<double> out;
    for (const auto& item : split(e->value)) out.push_back(to_real({item, e->line}, section, key));
    return out;
  }

  std::vector<std::uint64_t> integers(const std::string& section, const std::string& key,
                                      std::vector<std::uint64_t> fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    std::vector<std::uint64_t> out;
    for (const auto& item : split(e->value)) out.push_back(to_integer(item, *e, section, key));
    return out;
  }

  std::vector<std::string> words(const std::string& section, const std::string& key,
                                 std::vector<std::string> fallback) const {
    const Entry* e = find(section, key);
    return e ? split(e->value) : fallback;
  }

  /// Serializes back to the file format, sections and keys in sorted order.
  std::string to_text() const {
    std::string out;
    for (const auto& [name, sec] : sections_) {
      out += (out.empty() ? "[" : "\n[") + name + "]\n";
      for (const auto& [key, entry] : sec) out += key + " = " + entry.value + "\n";
    }
    return out;
  }

  /// Raises a ConfigError positioned at the given key (or at the file).
  [[noreturn]] void fail_at(const std::string& section, const std::string& key, const std::string& msg) const {
    const Entry* e = find(section, key);
    fail(e ? e->line : 0, "[" + section + "] " + key + ": " + msg);
  }

private:
  const Entry* find(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  static std::vector<std::string> split(const std::string& v) {
    std::vector<std::string> out;
    std::string_view rest = v;
    while (true) {
      const auto comma = rest.find(',');
      out.emplace_back(detail::trim(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    return out;
  }

  double to_real(const Entry& e, const std::string& section, const std::string& key) const {
    double v = 0.0;
    const char* end = e.value.data() + e.value.size();
    const auto res = std::from_chars(e.value.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end)
      fail(e.line, "[" + section + "] " + key + ": '" + e.value + "' is not a number");
    return v;
  }

  std::uint64_t to_integer(const std::string& text, const Entry& e, const std::string& section,
                           const std::string& key) const {
    std::uint64_t v = 0;
    const char* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end)
      fail(e.line, "[" + section + "] " + key + ": '" + text + "' is not a non-negative integer");
    return v;
  }

  [[noreturn]] void fail(std::size_t line, const std::string& msg) const {
    throw ConfigError(origin_ + ":" + (line ? std::to_string(line) + ":" : std::string{}) + " " + msg);
  }

  std::string origin_;
  std::map<std::string, Section> sections_;
};

}  // namespace stochgrid
