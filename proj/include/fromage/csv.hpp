#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace fromage {

/// RFC-4180 style CSV: comma separated, CRLF-free (\n) line endings, fields
/// quoted only when they contain a comma, quote or newline.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header);

  CsvWriter& cell(std::string_view text);
  CsvWriter& cell(const char* text) { return cell(std::string_view(text)); }
  CsvWriter& cell(double value);
  CsvWriter& cell(long long value);
  CsvWriter& cell(unsigned long long value);
  CsvWriter& cell(int value) { return cell(static_cast<long long>(value)); }
  CsvWriter& cell(std::size_t value) { return cell(static_cast<unsigned long long>(value)); }
  CsvWriter& cell(bool value) { return cell(static_cast<long long>(value ? 1 : 0)); }
  CsvWriter& empty_cell() { return cell(std::string_view{}); }
  void end_row();

  std::size_t columns() const { return header_size_; }

 private:
  std::ofstream out_;
  std::size_t header_size_;
  std::size_t pending_ = 0;
};

/// Shortest decimal form that round-trips; "nan", "inf" and "-inf" otherwise.
std::string format_double(double value);

std::string csv_escape(std::string_view field);

/// Parses a CSV file written by CsvWriter (handles quoted fields).
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

}  // namespace fromage
