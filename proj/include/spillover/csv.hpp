#pragma once

// Minimal comma-separated I/O. Fields never contain commas or quotes in the
// file contracts used here, so no quoting layer is needed. All number
// conversions go through <charconv>, which ignores the process locale.

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "spillover/error.hpp"

namespace spillover::csv {

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// Strict decimal parse; throws with `what` in the message on failure.
inline double parse_double(std::string_view text, const std::string& what) {
  text = trim(text);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    throw DataError("non-numeric " + what + " '" + std::string(text) + "'");
  return value;
}

/// Empty fields map to NaN (missing accounting data).
inline double parse_optional_double(std::string_view text, const std::string& what) {
  text = trim(text);
  if (text.empty() || text == "NA" || text == "nan") return std::numeric_limits<double>::quiet_NaN();
  return parse_double(text, what);
}

inline long long parse_int(std::string_view text, const std::string& what) {
  text = trim(text);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    throw DataError("non-integer " + what + " '" + std::string(text) + "'");
  return value;
}

/// Shortest representation that parses back to the same double; used for data files.
inline std::string exact(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

/// Report formatting: six significant digits, locale independent.
inline std::string fixed6(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  if (v == 0.0) v = 0.0;  // normalize -0
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 6);
  return std::string(buf, ptr);
}

/// Whole-file reader yielding header and data rows; blank lines are skipped.
class Table {
 public:
  static Table read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str(), path);
  }

  static Table parse(std::string text, const std::string& origin = "<memory>") {
    Table t;
    t.origin_ = origin;
    t.text_ = std::make_shared<const std::string>(std::move(text));
    std::string_view all(*t.text_);
    bool header = true;
    std::size_t line_no = 0;
    while (!all.empty()) {
      const auto nl = all.find('\n');
      std::string_view line = all.substr(0, nl);
      all = nl == std::string_view::npos ? std::string_view{} : all.substr(nl + 1);
      ++line_no;
      line = trim(line);
      if (line.empty()) continue;
      auto fields = split(line);
      for (auto& f : fields) f = trim(f);
      if (header) {
        for (auto f : fields) t.header_.emplace_back(f);
        header = false;
      } else {
        if (fields.size() != t.header_.size())
          throw DataError(origin + ":" + std::to_string(line_no) + ": expected " + std::to_string(t.header_.size()) +
                          " fields, found " + std::to_string(fields.size()));
        t.rows_.push_back(std::move(fields));
        t.line_numbers_.push_back(line_no);
      }
    }
    if (header) throw DataError(origin + ": missing header");
    return t;
  }

  [[nodiscard]] const std::vector<std::string>& header() const { return header_; }
  [[nodiscard]] std::size_t size() const { return rows_.size(); }
  [[nodiscard]] const std::vector<std::string_view>& row(std::size_t i) const { return rows_[i]; }
  [[nodiscard]] std::size_t line_number(std::size_t i) const { return line_numbers_[i]; }
  [[nodiscard]] const std::string& origin() const { return origin_; }

  [[nodiscard]] std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header_.size(); ++i) {
      if (header_[i] == name) return i;
    }
    throw DataError(origin_ + ": missing column '" + std::string(name) + "'");
  }

  void require_header(const std::vector<std::string>& expected) const {
    if (header_ != expected) {
      std::string want;
      for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
      throw DataError(origin_ + ": expected header '" + want + "'");
    }
  }

 private:
  std::string origin_;
  std::shared_ptr<const std::string> text_;  // rows_ view into this buffer
  std::vector<std::string> header_;
  std::vector<std::vector<std::string_view>> rows_;
  std::vector<std::size_t> line_numbers_;
};

/// Buffered writer; the file is only touched by `save`.
class Writer {
 public:
  explicit Writer(const std::vector<std::string>& header) { row(header); }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
  }

  [[nodiscard]] std::string str() const { return out_.str(); }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write '" + path + "'");
    f << out_.str();
    if (!f) throw DataError("write failed for '" + path + "'");
  }

 private:
  std::ostringstream out_;
};

}  // namespace spillover::csv
