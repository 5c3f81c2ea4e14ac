#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ethtrade/error.hpp"

namespace ethtrade::csv {

// Shortest decimal that round-trips to the same double.
inline std::string format(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::string format(long long x) { return std::to_string(x); }
inline std::string format(int x) { return std::to_string(x); }
inline std::string format(std::size_t x) { return std::to_string(x); }
inline std::string format(const std::string& x) { return x; }
inline std::string format(const char* x) { return x; }

class Row {
 public:
  template <class T>
  Row& operator<<(const T& value) {
    if (started_) text_ += ',';
    started_ = true;
    text_ += format(value);
    return *this;
  }
  const std::string& str() const { return text_; }

 private:
  std::string text_;
  bool started_ = false;
};

inline std::vector<std::string> split(std::string_view line, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(const std::string& text) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return INFINITY;
  if (text == "-inf") return -INFINITY;
  double out = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  require(res.ec == std::errc() && res.ptr == text.data() + text.size(), ErrorCode::InvalidSpec,
          "not a number: '" + text + "'");
  return out;
}

// Comment lines start with '#'; the first other line is the header.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    fail(ErrorCode::InvalidSpec, "missing column '" + name + "'");
  }
};

inline Table read(std::istream& in) {
  Table t;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (t.header.empty()) {
      t.header = split(line);
    } else {
      t.rows.push_back(split(line));
      require(t.rows.back().size() == t.header.size(), ErrorCode::InvalidSpec, "ragged CSV row");
    }
  }
  return t;
}

inline Table read_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::InvalidSpec, "cannot open " + path);
  return read(in);
}

}  // namespace ethtrade::csv
