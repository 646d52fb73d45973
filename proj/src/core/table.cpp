#include "oed/table.hpp"

#include "oed/errors.hpp"

#include <fstream>
#include <iomanip>

namespace oed {

void CsvTable::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size()) {
    throw ContractError("table " + name + ": row has " + std::to_string(row.size()) + " cells, expected " +
                        std::to_string(columns.size()));
  }
  rows.push_back(std::move(row));
}

void CsvTable::write(const std::filesystem::path& path, const std::vector<std::string>& comments) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  for (const auto& c : comments) out << "# " << c << '\n';
  for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << columns[j];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      std::visit([&out](const auto& v) { out << v; }, row[j]);
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace oed
