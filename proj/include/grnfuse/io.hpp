// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small helpers for the tab-separated text formats used throughout.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace grnfuse::io {

std::vector<std::string_view> split(std::string_view line, char sep = '\t');

// 17 significant digits: parses back to the identical double.
std::string format_real(double value);
double parse_real(std::string_view text, const std::string& source, std::size_t line);
long long parse_integer(std::string_view text, const std::string& source, std::size_t line);

// Reads LF-terminated lines (a trailing CR is stripped) and tracks line numbers.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path);

  bool next(std::string& line);
  std::size_t line_number() const noexcept { return line_; }
  const std::string& source() const noexcept { return source_; }

 private:
  std::ifstream in_;
  std::string source_;
  std::size_t line_ = 0;
};

void write_text(const std::filesystem::path& path, std::string_view content);
std::string read_text(const std::filesystem::path& path);

// FNV-1a 64 of the file bytes, as 16 hex digits.
std::string file_checksum(const std::filesystem::path& path);

}  // namespace grnfuse::io
