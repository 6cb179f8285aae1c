// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace grnfuse {

// Cells x genes matrix of non-negative expression values.
class ExpressionMatrix {
 public:
  ExpressionMatrix() = default;
  ExpressionMatrix(std::vector<std::string> cell_ids, std::vector<std::string> gene_ids,
                   std::vector<double> values);

  std::size_t num_cells() const noexcept { return cell_ids_.size(); }
  std::size_t num_genes() const noexcept { return gene_ids_.size(); }
  const std::vector<std::string>& cell_ids() const noexcept { return cell_ids_; }
  const std::vector<std::string>& gene_ids() const noexcept { return gene_ids_; }
  std::span<const double> values() const noexcept { return values_; }

  std::span<const double> cell(std::size_t c) const {
    return {values_.data() + c * gene_ids_.size(), gene_ids_.size()};
  }
  double operator()(std::size_t c, std::size_t g) const { return values_[c * gene_ids_.size() + g]; }

  // Expression of one gene across all cells.
  std::vector<double> gene_column(std::size_t g) const;
  std::size_t cell_index(const std::string& id) const;  // LookupError when absent

  bool operator==(const ExpressionMatrix&) const = default;

 private:
  std::vector<std::string> cell_ids_;
  std::vector<std::string> gene_ids_;
  std::vector<double> values_;
};

// Tab-separated: header `cell<TAB>gene...`, then one row per cell with the
// cell id first. Values are written with 17 significant digits, so
// load_matrix(save_matrix(m)) == m bit for bit.
ExpressionMatrix load_matrix(const std::filesystem::path& path);
void save_matrix(const ExpressionMatrix& matrix, const std::filesystem::path& path);

}  // namespace grnfuse
