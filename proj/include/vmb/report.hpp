#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace vmb {

struct CsvColumn {
  std::string name;
  std::string unit;  // "1" for nondimensional
};

// Comma-separated table, header "name [unit]", values in shortest
// round-trip form independent of the locale.
class CsvTable {
 public:
  explicit CsvTable(std::vector<CsvColumn> columns);
  void add_row(std::vector<double> row);
  const std::vector<CsvColumn>& columns() const { return columns_; }
  const std::vector<std::vector<double>>& rows() const { return rows_; }
  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<CsvColumn> columns_;
  std::vector<std::vector<double>> rows_;
};

// Reads a table written by CsvTable (units are stripped from the names).
CsvTable read_csv(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace vmb
