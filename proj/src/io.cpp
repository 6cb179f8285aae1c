// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "grnfuse/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_set>

#include "grnfuse/errors.hpp"
#include "grnfuse/expression.hpp"

namespace grnfuse::io {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string format_real(double value) {
  char buf[40];
  const int n = std::snprintf(buf, sizeof(buf), "%.17g", value);
  return std::string(buf, static_cast<std::size_t>(n));
}

double parse_real(std::string_view text, const std::string& source, std::size_t line) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ParseError(source, line, "not a number: '" + std::string(text) + "'");
  }
  if (!std::isfinite(value)) throw ParseError(source, line, "non-finite value '" + std::string(text) + "'");
  return value;
}

long long parse_integer(std::string_view text, const std::string& source, std::size_t line) {
  long long value = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ParseError(source, line, "not an integer: '" + std::string(text) + "'");
  }
  return value;
}

LineReader::LineReader(const std::filesystem::path& path)
    : in_(path, std::ios::binary), source_(path.string()) {
  if (!in_) throw DataError("cannot open " + source_);
}

bool LineReader::next(std::string& line) {
  if (!std::getline(in_, line)) return false;
  ++line_;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

void write_text(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string file_checksum(const std::filesystem::path& path) {
  const std::string bytes = read_text(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace grnfuse::io

namespace grnfuse {

ExpressionMatrix::ExpressionMatrix(std::vector<std::string> cell_ids,
                                   std::vector<std::string> gene_ids, std::vector<double> values)
    : cell_ids_(std::move(cell_ids)), gene_ids_(std::move(gene_ids)), values_(std::move(values)) {
  if (values_.size() != cell_ids_.size() * gene_ids_.size()) {
    throw ShapeError("expression matrix " + std::to_string(cell_ids_.size()) + "x" +
                     std::to_string(gene_ids_.size()) + " given " +
                     std::to_string(values_.size()) + " values");
  }
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) throw DataError("expression values must be finite and non-negative");
  }
}

std::vector<double> ExpressionMatrix::gene_column(std::size_t g) const {
  std::vector<double> out(num_cells());
  for (std::size_t c = 0; c < num_cells(); ++c) out[c] = (*this)(c, g);
  return out;
}

std::size_t ExpressionMatrix::cell_index(const std::string& id) const {
  for (std::size_t c = 0; c < cell_ids_.size(); ++c) {
    if (cell_ids_[c] == id) return c;
  }
  throw LookupError("unknown cell '" + id + "'");
}

ExpressionMatrix load_matrix(const std::filesystem::path& path) {
  io::LineReader reader(path);
  std::string line;
  if (!reader.next(line)) throw ParseError(reader.source(), 1, "missing header row");
  auto header = io::split(line);
  std::vector<std::string> genes;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 1; i < header.size(); ++i) {
    std::string id(header[i]);
    if (!seen.insert(id).second) throw ParseError(reader.source(), 1, "duplicate gene id '" + id + "'");
    genes.push_back(std::move(id));
  }
  std::vector<std::string> cells;
  std::vector<double> values;
  seen.clear();
  while (reader.next(line)) {
    if (line.empty()) continue;
    auto fields = io::split(line);
    if (fields.size() != genes.size() + 1) {
      throw ParseError(reader.source(), reader.line_number(),
                       "expected " + std::to_string(genes.size() + 1) + " fields, found " +
                           std::to_string(fields.size()));
    }
    std::string id(fields[0]);
    if (!seen.insert(id).second) {
      throw ParseError(reader.source(), reader.line_number(), "duplicate cell id '" + id + "'");
    }
    cells.push_back(std::move(id));
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const double v = io::parse_real(fields[i], reader.source(), reader.line_number());
      if (v < 0.0) throw ParseError(reader.source(), reader.line_number(), "negative expression value");
      values.push_back(v);
    }
  }
  return ExpressionMatrix(std::move(cells), std::move(genes), std::move(values));
}

void save_matrix(const ExpressionMatrix& matrix, const std::filesystem::path& path) {
  std::string out = "cell";
  for (const auto& g : matrix.gene_ids()) {
    out += '\t';
    out += g;
  }
  out += '\n';
  for (std::size_t c = 0; c < matrix.num_cells(); ++c) {
    out += matrix.cell_ids()[c];
    for (double v : matrix.cell(c)) {
      out += '\t';
      out += io::format_real(v);
    }
    out += '\n';
  }
  io::write_text(path, out);
}

}  // namespace grnfuse
