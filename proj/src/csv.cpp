#include "heraldsim/csv.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

namespace heraldsim {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::vector<std::vector<std::string>> read_csv(std::istream& in,
                                               const std::vector<std::string>& header) {
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw DataError("empty CSV input");
  if (split_csv_line(trim(line)) != header) {
    throw DataError("unexpected CSV header: '" + trim(line) + "'");
  }
  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(trim(line));
    if (fields.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields");
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

double parse_double(const std::string& field) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(field, &pos);
    if (pos != field.size()) throw DataError("trailing characters in number '" + field + "'");
    return v;
  } catch (const std::logic_error&) {
    throw DataError("not a number: '" + field + "'");
  }
}

long long parse_integer(const std::string& field) {
  long long v = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end) throw DataError("not an integer: '" + field + "'");
  return v;
}

std::string format_double(double v) {
  char buf[32];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::stod(buf) == v) break;
  }
  return buf;
}

}  // namespace heraldsim
