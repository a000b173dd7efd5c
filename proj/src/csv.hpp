#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tcast::csv {

struct Row {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

struct Table {
    std::filesystem::path path;
    std::vector<std::string> header;
    std::vector<Row> rows;

    /// Column index by name; throws DataError naming the file when absent.
    std::size_t column(std::string_view name) const;
    bool has_column(std::string_view name) const;
};

/// Splits one CSV record. Double quotes group fields and "" escapes a quote.
std::vector<std::string> split_record(std::string_view line);

/// Reads a comma-delimited UTF-8 file with a mandatory header row. Blank lines are skipped;
/// rows whose field count differs from the header raise DataError with the line number.
Table read(const std::filesystem::path& path);

enum class Parsed { ok, missing, malformed };

/// Parses a double, rejecting trailing garbage. Empty fields and "NA"/"NaN" are missing.
Parsed parse_double(std::string_view text, double& out);

std::string trim(std::string_view text);

} // namespace tcast::csv
