#include "tracs/csv.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include "tracs/errors.hpp"

namespace tracs::csv {

Table parse(std::string_view text) {
    Table table;
    Row row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    bool have_header = false;
    std::size_t line = 1;
    std::size_t row_line = 1;

    // UTF-8 BOM
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

    auto end_row = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
        // A bare empty line is not a record.
        if (!(row.size() == 1 && row[0].empty())) {
            if (!have_header) {
                table.header = std::move(row);
                have_header = true;
            } else {
                table.rows.push_back(std::move(row));
                table.line_numbers.push_back(row_line);
            }
        }
        row.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field_started) {
                    in_quotes = true;
                    field_started = true;
                } else {
                    field.push_back(c);  // stray quote inside an unquoted field
                }
                break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                field_started = false;
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
                [[fallthrough]];
            case '\n':
                end_row();
                ++line;
                row_line = line;
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (in_quotes) {
        throw SchemaError("CSV: unterminated quoted field starting near line " +
                          std::to_string(row_line));
    }
    if (field_started || !field.empty() || !row.empty()) end_row();
    return table;
}

Table read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out;
    out.reserve(field.size() + 2);
    out.push_back('"');
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_row(std::ostream& out, const Row& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ',';
        out << escape(row[i]);
    }
    out << '\n';
}

}  // namespace tracs::csv
