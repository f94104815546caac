#pragma once

#include <string>
#include <vector>

namespace quadpost {

/// Comma-separated, UTF-8, '.' decimal, header required, no quoting.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws IoError naming the file and column.
    std::size_t col(const std::string& name) const;
    std::string path;  // for error context
};

CsvTable read_csv(const std::string& path);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Parses a double with row/column context in the error message.
double parse_double(const CsvTable& t, std::size_t row, std::size_t col);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace quadpost
