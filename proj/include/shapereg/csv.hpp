#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace shapereg {

// Minimal numeric CSV: comma separators, mandatory header row, '.' decimals.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_cols() const { return header.size(); }
  // Column index by name; throws DataError when absent.
  std::size_t column(const std::string& name) const;
};

// Throws DataError with 1-based line numbers on malformed input.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text, const std::string& origin = "<string>");

// Shortest round-trip formatting, so identical inputs give identical bytes.
std::string format_double(double v);

}  // namespace shapereg
