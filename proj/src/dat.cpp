#include "feasrop/dat.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "feasrop/errors.hpp"

namespace feasrop {

std::size_t DataTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw DomainError("DataTable: no column named '" + name + "'");
}

std::vector<double> DataTable::column(const std::string& name) const {
  const std::size_t j = column_index(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row[j]);
  return out;
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_dat(const DataTable& table, std::ostream& os) {
  if (table.columns.empty()) throw DomainError("write_dat: table has no columns");
  for (std::size_t j = 0; j < table.columns.size(); ++j) os << (j ? " " : "") << table.columns[j];
  os << '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size()) throw DomainError("write_dat: ragged table row");
    for (std::size_t j = 0; j < row.size(); ++j) os << (j ? " " : "") << format_value(row[j]);
    os << '\n';
  }
}

void write_dat(const DataTable& table, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_dat: cannot open '" + path.string() + "' for writing");
  write_dat(table, os);
  if (!os) throw std::runtime_error("write_dat: write to '" + path.string() + "' failed");
}

DataTable read_dat(std::istream& is) {
  DataTable t;
  std::string line;
  if (!std::getline(is, line)) throw DomainError("read_dat: empty input");
  std::istringstream header(line);
  for (std::string name; header >> name;) t.columns.push_back(name);
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::vector<double> row;
    for (double v; ls >> v;) row.push_back(v);
    if (row.empty()) continue;
    if (row.size() != t.columns.size()) throw DomainError("read_dat: row width does not match header");
    t.rows.push_back(std::move(row));
  }
  return t;
}

DataTable read_dat(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_dat: cannot open '" + path.string() + "'");
  return read_dat(is);
}

}  // namespace feasrop
