#pragma once

// Minimal CSV writing. Numbers are printed with %.10g so output bytes depend
// only on the values.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "cvbn/error.hpp"

namespace cvbn {

inline std::string fmt_num(double x) {
  if (std::isnan(x)) return "";
  if (x == 0.0) return "0";  // folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

class CsvRow {
 public:
  CsvRow& operator<<(std::string_view s) {
    push(csv_field(s));
    return *this;
  }
  CsvRow& operator<<(const char* s) { return *this << std::string_view(s); }
  CsvRow& operator<<(const std::string& s) { return *this << std::string_view(s); }
  CsvRow& operator<<(double x) {
    push(fmt_num(x));
    return *this;
  }
  CsvRow& operator<<(std::size_t n) {
    push(std::to_string(n));
    return *this;
  }
  CsvRow& operator<<(int n) {
    push(std::to_string(n));
    return *this;
  }
  const std::string& str() const { return line_; }

 private:
  void push(const std::string& f) {
    if (!first_) line_ += ',';
    first_ = false;
    line_ += f;
  }
  std::string line_;
  bool first_ = true;
};

inline void write_csv_header(std::ostream& os, std::initializer_list<std::string_view> cols) {
  bool first = true;
  for (auto c : cols) {
    if (!first) os << ',';
    first = false;
    os << c;
  }
  os << '\n';
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::InvalidConfig, "cannot write " + path);
  return os;
}

/// Reads CSV text as written above (RFC 4180 quoting, '\n' line ends).
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw Error(ErrorKind::ParseError, "unterminated quoted CSV field");
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace cvbn
