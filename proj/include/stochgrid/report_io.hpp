// SPDX-License-Identifier: Apache-2.0
#pragma once

// Plain-text outputs: locale-free CSV, content hashes and the file manifest.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "stochgrid/errors.hpp"

namespace stochgrid {

/// Shortest round-trip decimal form; independent of the global locale.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct ManifestEntry {
  std::string file;
  std::uintmax_t bytes = 0;
  std::string fnv1a64;
};

/// Comma-separated, '.' decimal, header row, LF line endings.
class CsvWriter {
public:
  CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string_view> header)
      : CsvWriter(path, std::vector<std::string>(header.begin(), header.end())) {}

  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()) {
    if (!out_) throw ConfigError("cannot write '" + path.string() + "'");
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }

  void row(std::span<const double> values) {
    if (values.size() != columns_) throw ConfigError("CSV row width does not match the header");
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_number(values[i]);
    out_ << '\n';
  }

  void row(std::initializer_list<double> values) { row(std::span<const double>(values.begin(), values.size())); }

  /// Row with a leading text field.
  void row(std::string_view key, std::span<const double> values) {
    if (values.size() + 1 != columns_) throw ConfigError("CSV row width does not match the header");
    out_ << key;
    for (double v : values) out_ << ',' << format_number(v);
    out_ << '\n';
  }

  ~CsvWriter() = default;
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

private:
  std::ofstream out_;
  std::size_t columns_;
};

/// Output directory that remembers every file written into it.
class OutputDir {
public:
  explicit OutputDir(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec || !std::filesystem::is_directory(root_))
      throw ConfigError("output directory '" + root_.string() + "' is not writable");
  }

  const std::filesystem::path& root() const noexcept { return root_; }

  CsvWriter csv(const std::string& name, const std::vector<std::string>& header) {
    files_.push_back(name);
    return CsvWriter(root_ / name, header);
  }

  void write_text(const std::string& name, std::string_view text, bool tracked = true) {
    std::ofstream out(root_ / name, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + (root_ / name).string() + "'");
    out << text;
    if (!out) throw ConfigError("write to '" + (root_ / name).string() + "' failed");
    if (tracked) files_.push_back(name);
  }

  /// Hashes every tracked file as it is on disk now.
  std::vector<ManifestEntry> manifest() const {
    std::vector<ManifestEntry> out;
    for (const auto& f : files_) {
      const std::string bytes = read_file(root_ / f);
      out.push_back({f, bytes.size(), hex64(fnv1a64(bytes))});
    }
    return out;
  }

private:
  std::filesystem::path root_;
  std::vector<std::string> files_;
};

}  // namespace stochgrid
