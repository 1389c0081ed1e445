#pragma once

#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace hcqos {

/// Shortest representation that parses back to the same double.
std::string format_exact(double v);
/// Report precision: 9 significant digits.
std::string format_sig9(double v);

double parse_double(std::string_view s, const std::string& context);
std::int64_t parse_int(std::string_view s, const std::string& context);

/// Minimal CSV reader: comma separated, no quoting (none of our schemas
/// carry commas inside fields). Lines starting with '#' are comments.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void require_header(std::initializer_list<std::string_view> expected) const;
  std::size_t column(std::string_view name) const;
};

CsvTable read_csv(std::istream& is);
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace hcqos
