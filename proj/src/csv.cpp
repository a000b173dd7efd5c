#include "csv.hpp"

#include "tcast/common.hpp"

#include <charconv>
#include <fstream>

namespace tcast::csv {

std::string trim(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = text.find_last_not_of(" \t\r\n");
    return std::string(text.substr(first, last - first + 1));
}

std::vector<std::string> split_record(std::string_view line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    out.push_back(trim(field));
    return out;
}

Table read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    Table table;
    table.path = path;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
            line.erase(0, 3);
        }
        if (trim(line).empty()) {
            continue;
        }
        auto fields = split_record(line);
        if (table.header.empty()) {
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw DataError(path.filename().string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(table.header.size()) + " fields, found " +
                            std::to_string(fields.size()) + ": " + line);
        }
        table.rows.push_back(Row{line_no, std::move(fields)});
    }
    if (table.header.empty()) {
        throw DataError(path.filename().string() + ": missing header row");
    }
    return table;
}

bool Table::has_column(std::string_view name) const {
    for (const auto& h : header) {
        if (h == name) {
            return true;
        }
    }
    return false;
}

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) {
            return i;
        }
    }
    throw DataError(path.filename().string() + ":1: missing column '" + std::string(name) + "'");
}

Parsed parse_double(std::string_view text, double& out) {
    if (text.empty() || text == "NA" || text == "NaN" || text == "nan") {
        return Parsed::missing;
    }
    if (text.front() == '+') {
        text.remove_prefix(1);
    }
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, out);
    return (res.ec == std::errc{} && res.ptr == end) ? Parsed::ok : Parsed::malformed;
}

} // namespace tcast::csv
