#include "mobiload/csv.hpp"

#include "mobiload/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace mobiload::csv {

namespace {

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto comma = line.find(',', start);
        auto field = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
        out.emplace_back(field);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    fail(ErrorKind::SchemaMismatch, source + ": missing column \"" + std::string(name) + "\"");
}

Table parse(std::string_view text, std::string source) {
    Table t;
    t.source = std::move(source);
    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool have_header = false;
    // UTF-8 byte order mark
    if (text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        auto fields = split_line(line);
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size()) {
            fail(ErrorKind::SchemaMismatch, t.source + ":" + std::to_string(line_no) + ": expected " +
                                                std::to_string(t.header.size()) + " fields, got " +
                                                std::to_string(fields.size()));
        }
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(line_no);
    }
    if (!have_header) fail(ErrorKind::SchemaMismatch, t.source + ": empty file, header row required");
    return t;
}

Table read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::MissingFile, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

double to_double(const Table& t, std::size_t row, std::size_t col) {
    const std::string& f = t.rows[row][col];
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc{} || ptr != f.data() + f.size()) {
        fail(ErrorKind::SchemaMismatch, t.source + ":" + std::to_string(t.line_numbers[row]) + ": column \"" +
                                            t.header[col] + "\" is not a number: '" + f + "'");
    }
    return v;
}

std::string format_double(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

}  // namespace mobiload::csv
