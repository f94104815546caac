#include "quadpost/csv.hpp"

#include <charconv>
#include <fstream>
#include <system_error>

#include "quadpost/errors.hpp"

namespace quadpost {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') {
        out.back().pop_back();
    }
    return out;
}

}  // namespace

std::size_t CsvTable::col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw IoError(path + ": no column named '" + name + "'");
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    CsvTable t;
    t.path = path;
    std::string line;
    if (!std::getline(in, line)) {
        throw IoError(path + ": empty file (header row required)");
    }
    t.header = split_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (fields.size() != t.header.size()) {
            throw IoError(path + ": line " + std::to_string(t.rows.size() + 2) +
                          " has " + std::to_string(fields.size()) +
                          " fields, expected " + std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(fields));
    }
    return t;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out << ',';
        out << header[i];
    }
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << row[i];
        }
        out << '\n';
    }
}

double parse_double(const CsvTable& t, std::size_t row, std::size_t col) {
    const std::string& s = t.rows[row][col];
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw IoError(t.path + ": line " + std::to_string(row + 2) + ", column '" +
                      t.header[col] + "': cannot parse '" + s + "' as a number");
    }
    return v;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

}  // namespace quadpost
