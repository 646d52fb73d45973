#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace oed {

/// In-memory CSV table. Reals are written with 17 significant digits.
struct CsvTable {
  using Cell = std::variant<double, std::int64_t, std::string>;

  std::string name;  // file stem
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row);
  /// Optional leading `# key: value` comment lines precede the header.
  void write(const std::filesystem::path& path, const std::vector<std::string>& comments = {}) const;
};

}  // namespace oed
