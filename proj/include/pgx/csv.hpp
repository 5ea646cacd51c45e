#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pgx {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Header-addressed CSV table. Fields may be double-quoted ("" escapes a quote).
class CsvTable {
 public:
  static CsvTable parse(std::string_view text);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  /// Throws CsvError if the column is absent.
  std::size_t column(std::string_view name) const;
  const std::string& at(std::size_t row, std::size_t col) const { return rows_[row][col]; }
  /// Parses a finite double; errors name the 1-based data line and the column.
  double number(std::size_t row, std::size_t col) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Quotes the field when it contains a comma, quote or newline.
std::string csv_escape(std::string_view field);

}  // namespace pgx
