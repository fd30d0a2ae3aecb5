#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace kgap::csv {

using Row = std::vector<std::string>;

// RFC-4180 table: quoted fields may contain commas, doubled quotes and line
// breaks. `line_numbers[i]` is the 1-based physical line where row i starts.
struct Table {
  Row header;
  std::vector<Row> rows;
  std::vector<std::size_t> line_numbers;

  // Index of a header column, or npos.
  std::size_t column(std::string_view name) const;
};

Table parse(std::string_view text);
Table read_file(const std::filesystem::path& path);

// Quotes the field only when it needs quoting.
std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& row);

}  // namespace kgap::csv
