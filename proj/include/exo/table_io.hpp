#ifndef EXO_TABLE_IO_HPP_
#define EXO_TABLE_IO_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "exo/common.hpp"

namespace exo::io {

/// Headered, versioned, tab-delimited numeric table. On disk:
///   # exo-table v1 <kind>
///   <column names, tab separated>
///   <units, tab separated>
///   <data rows>
/// Values are written with shortest round-trip formatting, so
/// write -> read -> write is a byte-level fixed point.
struct Table {
  std::string kind;
  std::vector<std::string> columns;
  std::vector<std::string> units;
  std::vector<std::vector<double>> cols;  // column-major

  std::size_t n_rows() const { return cols.empty() ? 0 : cols[0].size(); }
  std::size_t n_cols() const { return cols.size(); }

  /// Column index by name; throws ValidationError when missing.
  int col(const std::string& name) const;

  void add_column(const std::string& name, const std::string& unit);
  void push_row(const std::vector<double>& row);
  double at(std::size_t row, int column) const { return cols[column][row]; }
};

Table read_table(const std::filesystem::path& path);
void write_table(const std::filesystem::path& path, const Table& table);

/// Shortest representation that parses back to the identical double.
std::string format_double(double v);

}  // namespace exo::io

#endif  // EXO_TABLE_IO_HPP_
