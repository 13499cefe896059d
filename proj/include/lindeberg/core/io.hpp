#pragma once

#include <charconv>
#include <cmath>
#include <complex>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace lindeberg {

/// Bumped whenever a CSV header changes.
inline constexpr int kSchemaVersion = 1;

/// Shortest round-trip decimal form; identical across runs and platforms
/// with the same libstdc++.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  if (res.ec != std::errc{}) throw std::runtime_error("format_double: to_chars failed");
  return {buf, res.ptr};
}

inline std::string format_complex(std::complex<double> z) {
  std::string s = format_double(z.real());
  if (z.imag() >= 0 || std::isnan(z.imag())) s += '+';
  return s + format_double(z.imag()) + 'i';
}

/// Quote a field when it holds a comma, quote or line break; double inner quotes.
inline std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

class CsvWriter {
public:
  /// Writes the header immediately, prefixed by a schema_version column.
  CsvWriter(std::ostream& os, std::vector<std::string> header) : os_(os), width_(header.size()) {
    header.insert(header.begin(), "schema_version");
    write_line(header);
  }

  void row(const std::vector<std::string>& fields) {
    if (fields.size() != width_) throw std::invalid_argument("CsvWriter: row width does not match header");
    std::vector<std::string> line;
    line.reserve(fields.size() + 1);
    line.push_back(std::to_string(kSchemaVersion));
    line.insert(line.end(), fields.begin(), fields.end());
    write_line(line);
  }

private:
  void write_line(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) os_ << ',';
      os_ << csv_escape(fields[i]);
    }
    os_ << '\n';
  }

  std::ostream& os_;
  std::size_t width_;
};

/// One matrix row per line, no header.
inline void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << format_double(m(i, j));
    }
    os << '\n';
  }
}

/// Complex matrix with real and imaginary parts interleaved per entry.
inline void write_matrix_csv(std::ostream& os, const Eigen::MatrixXcd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << format_double(m(i, j).real()) << ',' << format_double(m(i, j).imag());
    }
    os << '\n';
  }
}

} // namespace lindeberg
