#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gazefit::tsv {

// A header-indexed tab-separated table read fully into memory. Line numbers are
// 1-based file lines so error messages point at the offending row.
class Table {
 public:
  static Table read(const std::filesystem::path& path);
  static Table parse(std::istream& in, const std::string& source_name);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  std::optional<std::size_t> column(std::string_view name) const;
  // Throws SchemaError naming the column when absent.
  std::size_t require_column(std::string_view name) const;

  const std::string& cell(std::size_t row, std::size_t col) const { return rows_[row][col]; }
  std::size_t line_of(std::size_t row) const { return lines_[row]; }
  const std::string& source() const { return source_; }

  double number(std::size_t row, std::size_t col) const;
  long long integer(std::size_t row, std::size_t col) const;

 private:
  std::string source_;
  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::size_t> lines_;
};

// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

// Writes to `path` through a sibling temporary file renamed into place.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace gazefit::tsv
