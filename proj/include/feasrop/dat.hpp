#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace feasrop {

/// Rectangular numeric table with named columns, written as whitespace-separated text.
struct DataTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column_index(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
};

/// Header line of column names, then one line per row, values at 17 significant digits.
void write_dat(const DataTable& table, std::ostream& os);
void write_dat(const DataTable& table, const std::filesystem::path& path);

DataTable read_dat(std::istream& is);
DataTable read_dat(const std::filesystem::path& path);

/// Shortest "%.17g" rendering used by every text writer in the library.
std::string format_value(double v);

}  // namespace feasrop
