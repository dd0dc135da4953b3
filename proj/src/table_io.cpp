#include "exo/table_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace exo::io {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

int Table::col(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  throw ValidationError("table '" + kind + "': missing column '" + name + "'");
}

void Table::add_column(const std::string& name, const std::string& unit) {
  columns.push_back(name);
  units.push_back(unit);
  cols.emplace_back();
  if (n_rows() != 0 && cols.back().empty())
    cols.back().resize(cols[0].size(), 0.0);
}

void Table::push_row(const std::vector<double>& row) {
  if (row.size() != cols.size())
    throw ValidationError("table '" + kind + "': row width mismatch");
  for (std::size_t i = 0; i < row.size(); ++i) cols[i].push_back(row[i]);
}

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open table file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string content = ss.str();

  Table t;
  std::size_t pos = 0;
  auto next_line = [&](std::string& line) -> bool {
    if (pos >= content.size()) return false;
    const std::size_t end = content.find('\n', pos);
    if (end == std::string::npos) {
      line = content.substr(pos);
      pos = content.size();
    } else {
      line = content.substr(pos, end - pos);
      pos = end + 1;
    }
    return true;
  };

  std::string line;
  if (!next_line(line) || line.rfind("# exo-table v1 ", 0) != 0)
    throw ValidationError("malformed header in " + path.string() +
                          ": expected '# exo-table v1 <kind>'");
  t.kind = line.substr(15);
  if (!next_line(line))
    throw ValidationError("malformed header in " + path.string() +
                          ": missing column names");
  t.columns = split_tabs(line);
  if (!next_line(line))
    throw ValidationError("malformed header in " + path.string() +
                          ": missing units row");
  t.units = split_tabs(line);
  if (t.units.size() != t.columns.size())
    throw ValidationError("malformed header in " + path.string() +
                          ": units row width mismatch");
  t.cols.assign(t.columns.size(), {});

  std::size_t row_index = 0;
  while (next_line(line)) {
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = p + line.size();
    for (std::size_t c = 0; c < t.cols.size(); ++c) {
      double v = 0.0;
      const auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc{}) {
        std::ostringstream os;
        os << "parse error in " << path.string() << " row " << row_index
           << " column " << c;
        throw ValidationError(os.str());
      }
      t.cols[c].push_back(v);
      p = res.ptr;
      if (c + 1 < t.cols.size()) {
        if (p >= end || *p != '\t') {
          std::ostringstream os;
          os << "parse error in " << path.string() << " row " << row_index
             << ": expected tab after column " << c;
          throw ValidationError(os.str());
        }
        ++p;
      }
    }
    if (p != end)
      throw ValidationError("parse error in " + path.string() +
                            ": trailing characters");
    ++row_index;
  }
  return t;
}

void write_table(const std::filesystem::path& path, const Table& table) {
  if (table.columns.size() != table.cols.size() ||
      table.units.size() != table.columns.size())
    throw ValidationError("table '" + table.kind + "': inconsistent header");
  std::string out;
  out.reserve(64 + table.n_rows() * table.n_cols() * 12);
  out += "# exo-table v1 " + table.kind + "\n";
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    out += table.columns[i];
    out += (i + 1 < table.columns.size()) ? '\t' : '\n';
  }
  for (std::size_t i = 0; i < table.units.size(); ++i) {
    out += table.units[i];
    out += (i + 1 < table.units.size()) ? '\t' : '\n';
  }
  char buf[32];
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    for (std::size_t c = 0; c < table.n_cols(); ++c) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), table.cols[c][r]);
      out.append(buf, res.ptr);
      out += (c + 1 < table.n_cols()) ? '\t' : '\n';
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ExecutionError("cannot write table file: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw ExecutionError("write failed: " + path.string());
}

}  // namespace exo::io
