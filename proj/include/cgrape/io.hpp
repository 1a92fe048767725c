#pragma once

#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

namespace cgrape::io {

/// Decimal with 12 significant digits; every numeric artifact goes through it.
std::string format_number(double value);

/// Header-first CSV writer. Refuses NaN/Inf values so that no artifact ever
/// carries them.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::initializer_list<std::string> header);

  void row(std::initializer_list<double> values);

 private:
  std::string path_;
  std::ofstream out_;
  std::size_t columns_;
};

/// Parsed CSV: header names and rows of numbers.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Throws std::runtime_error if the file is missing or malformed.
CsvTable read_csv(const std::string& path);

}  // namespace cgrape::io
