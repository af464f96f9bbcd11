#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace casehold::csv {

using Row = std::vector<std::string>;

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);
std::string format_row(const std::vector<std::string>& fields);

/// Parses a whole document. Quoted fields may span lines. Rows are separated by
/// LF or CRLF; a trailing newline does not produce an empty row.
std::vector<Row> parse(std::string_view text);

/// A parsed file with a header row.
struct Table {
  Row header;
  std::vector<Row> rows;

  /// Column index by name; throws InputError when absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

Table read_table(std::string_view text);
Table load_table(const std::string& path);

}  // namespace casehold::csv
