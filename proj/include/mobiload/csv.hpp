#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mobiload::csv {

// Header-row CSV as read from disk. Lines starting with '#' and blank lines are skipped.
struct Table {
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;

    // Index of `name` in the header; SchemaMismatch naming the column if absent.
    std::size_t column(std::string_view name) const;
};

Table read(const std::filesystem::path& path);
Table parse(std::string_view text, std::string source);

double to_double(const Table& t, std::size_t row, std::size_t col);

// Shortest representation that parses back to the identical double.
std::string format_double(double v);

}  // namespace mobiload::csv
