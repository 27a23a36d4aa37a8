#pragma once

#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

namespace heraldsim {

/// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_csv_line(const std::string& line);

/// Reads a header plus data rows; blank lines are skipped. Throws DataError on
/// an empty stream, a header mismatch or a row with the wrong field count.
std::vector<std::vector<std::string>> read_csv(std::istream& in,
                                               const std::vector<std::string>& header);

double parse_double(const std::string& field);
long long parse_integer(const std::string& field);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

}  // namespace heraldsim
