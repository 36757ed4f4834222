#include "vmb/report.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "vmb/errors.hpp"

namespace vmb {

CsvTable::CsvTable(std::vector<CsvColumn> columns) : columns_(std::move(columns)) {
  for (const auto& c : columns_)
    if (c.name.find_first_of(",[\"\n") != std::string::npos) throw ConfigError("csv column name '" + c.name + "' is not plain");
}

void CsvTable::add_row(std::vector<double> row) {
  if (row.size() != columns_.size())
    throw ShapeError(fmt::format("csv row has {} values for {} columns", row.size(), columns_.size()));
  rows_.push_back(std::move(row));
}

std::string CsvTable::str() const {
  std::string out;
  for (std::size_t i = 0; i < columns_.size(); ++i)
    out += fmt::format("{}{} [{}]", i ? "," : "", columns_[i].name, columns_[i].unit);
  out += '\n';
  for (const auto& r : rows_) {
    for (std::size_t i = 0; i < r.size(); ++i) out += fmt::format("{}{}", i ? "," : "", r[i]);
    out += '\n';
  }
  return out;
}

void CsvTable::write(const std::filesystem::path& path) const { write_text(path, str()); }

CsvTable read_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty csv " + path.string());
  std::vector<CsvColumn> cols;
  {
    std::istringstream h(line);
    std::string cell;
    while (std::getline(h, cell, ',')) {
      const auto lb = cell.find(" [");
      if (lb == std::string::npos || cell.back() != ']') throw IoError("csv header cell '" + cell + "' lacks a unit");
      cols.push_back({cell.substr(0, lb), cell.substr(lb + 2, cell.size() - lb - 3)});
    }
  }
  CsvTable t(cols);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream r(line);
    std::string cell;
    while (std::getline(r, cell, ',')) {
      double v = 0.0;
      const auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || p != cell.data() + cell.size()) throw IoError("csv cell '" + cell + "' is not a number");
      row.push_back(v);
    }
    t.add_row(std::move(row));
  }
  return t;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

}  // namespace vmb
