#include "evmpc/text.hpp"

#include "evmpc/error.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace evmpc::text {

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line =
        text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.emplace_back(line);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  if (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::string strip_comment(std::string_view s) {
  return trim(s.substr(0, s.find('#')));
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream is{std::string(s)};
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_csv_line(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto end = s.find(',', start);
    out.push_back(trim(s.substr(start, end == std::string_view::npos ? std::string_view::npos
                                                                      : end - start)));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

double parse_double(const std::string& field, int row) {
  const std::string f = trim(field);
  double v = 0.0;
  const auto* first = f.data();
  const auto* last = f.data() + f.size();
  if (!f.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (f.empty() || ec != std::errc() || ptr != last)
    throw ParseError(row, "not a number: '" + field + "'");
  return v;
}

int parse_int(const std::string& field, int row) {
  const std::string f = trim(field);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (f.empty() || ec != std::errc() || ptr != f.data() + f.size())
    throw ParseError(row, "not an integer: '" + field + "'");
  return v;
}

std::vector<CsvRow> parse_csv(std::string_view text, const std::vector<std::string>& header) {
  std::vector<CsvRow> rows;
  bool have_header = false;
  int line_no = 0;
  for (const auto& raw : split_lines(text)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto fields = split_csv_line(line);
    if (!have_header) {
      if (fields != header) {
        std::string want;
        for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
        throw ParseError(line_no, "expected header '" + want + "'");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != header.size())
      throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                    std::to_string(fields.size()));
    rows.push_back({line_no, std::move(fields)});
  }
  if (!have_header) throw ParseError(line_no, "missing CSV header");
  return rows;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace evmpc::text
