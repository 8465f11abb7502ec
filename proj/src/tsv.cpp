#include "gazefit/tsv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gazefit/error.hpp"
#include "gazefit/text.hpp"

namespace gazefit::tsv {

Table Table::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return parse(in, path.string());
}

Table Table::parse(std::istream& in, const std::string& source_name) {
  Table t;
  t.source_ = source_name;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (line.empty()) continue;
      t.header_ = text::split(line, '\t');
      for (std::size_t i = 0; i < t.header_.size(); ++i) {
        if (!t.index_.emplace(t.header_[i], i).second) {
          throw SchemaError(source_name + ": duplicate column '" + t.header_[i] + "'");
        }
      }
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    auto fields = text::split(line, '\t');
    if (fields.size() < t.header_.size()) fields.resize(t.header_.size());
    if (fields.size() > t.header_.size()) {
      throw ParseError(source_name + ": expected " + std::to_string(t.header_.size()) +
                           " fields, found " + std::to_string(fields.size()),
                       lineno);
    }
    t.rows_.push_back(std::move(fields));
    t.lines_.push_back(lineno);
  }
  if (!have_header) throw SchemaError(source_name + ": missing header row");
  return t;
}

std::optional<std::size_t> Table::column(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Table::require_column(std::string_view name) const {
  auto c = column(name);
  if (!c) throw SchemaError(source_ + ": missing mandatory column '" + std::string(name) + "'");
  return *c;
}

double Table::number(std::size_t row, std::size_t col) const {
  const auto s = text::trim(rows_[row][col]);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError(source_ + ": column '" + header_[col] + "' is not numeric: '" +
                         std::string(s) + "'",
                     lines_[row]);
  }
  return v;
}

long long Table::integer(std::size_t row, std::size_t col) const {
  const auto s = text::trim(rows_[row][col]);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(source_ + ": column '" + header_[col] + "' is not an integer: '" +
                         std::string(s) + "'",
                     lines_[row]);
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace gazefit::tsv
