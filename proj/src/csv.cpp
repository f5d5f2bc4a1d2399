#include "infograd/csv.hpp"

#include <cmath>
#include <fstream>

#include "infograd/config.hpp"
#include "infograd/errors.hpp"

namespace infograd {

void CsvTable::add_row(std::vector<double> row) {
  if (row.size() != header_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "CSV row has " + std::to_string(row.size()) + " values, header has " +
                                              std::to_string(header_.size()));
  }
  for (double v : row) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "CSV values must be finite");
  }
  rows_.push_back(std::move(row));
}

std::string CsvTable::str() const {
  std::string out;
  for (const auto& c : comments_) out += "# " + c + "\n";
  for (std::size_t i = 0; i < header_.size(); ++i) out += (i ? "," : "") + header_[i];
  out += "\n";
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_double(row[i]);
    out += "\n";
  }
  if (!truncation_.empty()) out += "# truncated: " + truncation_ + "\n";
  return out;
}

void CsvTable::write(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  os << str();
  if (!os) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

}  // namespace infograd
