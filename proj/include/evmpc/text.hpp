#pragma once

// Small helpers shared by the file readers and writers.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace evmpc::text {

std::vector<std::string> split_lines(std::string_view text);
std::string trim(std::string_view s);
// Drops everything from the first `#` and trims.
std::string strip_comment(std::string_view s);
std::vector<std::string> split_ws(std::string_view s);
std::vector<std::string> split_csv_line(std::string_view s);

// Whole-field numeric parse; throws ParseError(row, ...) on junk.
double parse_double(const std::string& field, int row);
int parse_int(const std::string& field, int row);

struct CsvRow {
  int line;  // 1-based line number in the source
  std::vector<std::string> fields;
};

// Parses a CSV with the exact header given. Blank lines and `#` comment
// lines are skipped; every data row must have header.size() fields.
std::vector<CsvRow> parse_csv(std::string_view text,
                              const std::vector<std::string>& header);

std::string read_file(const std::filesystem::path& path);
// Writes via a sibling temp file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace evmpc::text
