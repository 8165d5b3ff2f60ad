#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qkernel {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

// Comma-separated, first line is the header. Double-quoted fields may
// contain commas and "" escapes. Blank lines are skipped.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace qkernel
