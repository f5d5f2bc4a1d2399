#pragma once

// Rectangular numeric table written with 17 significant digits.

#include <filesystem>
#include <string>
#include <vector>

namespace infograd {

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  const std::vector<std::string>& header() const noexcept { return header_; }
  const std::vector<std::vector<double>>& rows() const noexcept { return rows_; }

  // Throws ShapeMismatch on a row of the wrong width, NonFiniteInput on NaN/Inf.
  void add_row(std::vector<double> row);
  void add_comment(std::string line) { comments_.push_back(std::move(line)); }
  void mark_truncated(const std::string& reason) { truncation_ = reason; }
  bool truncated() const noexcept { return !truncation_.empty(); }

  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<double>> rows_;
  std::vector<std::string> comments_;
  std::string truncation_;
};

}  // namespace infograd
