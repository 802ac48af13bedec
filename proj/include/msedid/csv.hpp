#pragma once

// Small CSV helpers shared by the panel loader and the table writers.
// Fields are plain comma-separated tokens; quoting is not supported, so
// identifiers must not contain commas or newlines.

#include <charconv>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace msedid::csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_line(std::string_view line, char delim = ',') {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(trim(line.substr(start)));
      break;
    }
    out.emplace_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

inline std::optional<long long> parse_int(std::string_view tok) {
  tok = trim(tok);
  long long v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) return std::nullopt;
  return v;
}

inline std::optional<double> parse_double(std::string_view tok) {
  tok = trim(tok);
  double v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) return std::nullopt;
  return v;
}

// Accepts 0/1 and true/false in any letter case.
inline std::optional<bool> parse_flag(std::string_view tok) {
  std::string low;
  for (char c : trim(tok)) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (low == "0" || low == "false") return false;
  if (low == "1" || low == "true") return true;
  return std::nullopt;
}

// Default table output keeps 6 significant digits; full precision (%.17g)
// round-trips doubles exactly and is used for dataset files.
inline std::string format_double(double v, bool full_precision = false) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), full_precision ? "%.17g" : "%.6g", v);
  return buf;
}

struct Formatter {
  bool full_precision = false;
  std::string operator()(double v) const { return format_double(v, full_precision); }
};

}  // namespace msedid::csv
