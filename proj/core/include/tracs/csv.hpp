#pragma once
// Minimal RFC-4180 reader/writer: comma separator, double-quote quoting,
// embedded newlines inside quoted fields, CRLF or LF record endings.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace tracs::csv {

using Row = std::vector<std::string>;

struct Table {
    Row header;
    std::vector<Row> rows;
    // 1-based physical line where each row starts (for error messages).
    std::vector<std::size_t> line_numbers;
};

Table parse(std::string_view text);
Table read_file(const std::filesystem::path& path);

// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& row);

}  // namespace tracs::csv
