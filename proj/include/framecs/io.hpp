#pragma once

#include <array>
#include <bit>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "framecs/linop.hpp"

namespace framecs::io {

// "a+bi" with round-trip precision
inline std::string format_complex(cplx z) {
  char buf[80];
  double im = z.imag();
  if (im == 0.0) im = 0.0;  // drop negative zero
  std::snprintf(buf, sizeof buf, "%.17g%c%.17gi", z.real(), std::signbit(im) ? '-' : '+', std::fabs(im));
  return buf;
}

inline double parse_double(const std::string& s, std::size_t& pos) {
  const char* b = s.data() + pos;
  char* e = nullptr;
  double v = std::strtod(b, &e);
  require(e != b, ErrorKind::io, "malformed number in '" + s + "'");
  pos += static_cast<std::size_t>(e - b);
  return v;
}

// accepts "a+bi", "a-bi", "a", "bi"
inline cplx parse_complex(std::string s) {
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());
  require(!s.empty(), ErrorKind::io, "empty complex field");
  if (s.back() != 'i' && s.back() != 'j') {
    std::size_t pos = 0;
    double re = parse_double(s, pos);
    require(pos == s.size(), ErrorKind::io, "trailing characters in '" + s + "'");
    return {re, 0.0};
  }
  std::string body = s.substr(0, s.size() - 1);
  // split at the last sign that is not an exponent sign and not leading
  std::size_t split = std::string::npos;
  for (std::size_t k = body.size(); k-- > 1;) {
    if ((body[k] == '+' || body[k] == '-') && body[k - 1] != 'e' && body[k - 1] != 'E') {
      split = k;
      break;
    }
  }
  if (split == std::string::npos) {
    if (body.empty() || body == "+" || body == "-") return {0.0, body == "-" ? -1.0 : 1.0};
    std::size_t pos = 0;
    double im = parse_double(body, pos);
    require(pos == body.size(), ErrorKind::io, "malformed imaginary part '" + s + "'");
    return {0.0, im};
  }
  std::string rs = body.substr(0, split), is = body.substr(split);
  std::size_t pos = 0;
  double re = parse_double(rs, pos);
  require(pos == rs.size(), ErrorKind::io, "malformed real part '" + s + "'");
  double im;
  if (is == "+" || is == "-") {
    im = is == "-" ? -1.0 : 1.0;
  } else {
    pos = 0;
    im = parse_double(is, pos);
    require(pos == is.size(), ErrorKind::io, "malformed imaginary part '" + s + "'");
  }
  return {re, im};
}

inline void write_csv(std::ostream& os, const Mat& A) {
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      if (j) os << ',';
      os << format_complex(A(i, j));
    }
    os << '\n';
  }
}

inline Mat read_csv(std::istream& is) {
  std::vector<std::vector<cplx>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<cplx> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) row.push_back(parse_complex(field));
    require(rows.empty() || row.size() == rows.front().size(), ErrorKind::io, "ragged CSV matrix");
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorKind::io, "empty CSV matrix");
  Mat A(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) A(i, j) = rows[i][j];
  return A;
}

inline void save_csv(const std::string& path, const Mat& A) {
  std::ofstream os(path);
  require(bool(os), ErrorKind::io, "cannot open " + path);
  write_csv(os, A);
}

inline Mat load_csv(const std::string& path) {
  std::ifstream is(path);
  require(bool(is), ErrorKind::io, "cannot open " + path);
  return read_csv(is);
}

// column vector <-> one entry per line
inline Signal load_signal_csv(const std::string& path) {
  Mat A = load_csv(path);
  if (A.cols() != 1 && A.rows() == 1) A.transposeInPlace();
  require(A.cols() == 1, ErrorKind::io, "signal CSV must hold a single row or column");
  return Signal(Vec(A.col(0)));
}

inline void save_signal_csv(const std::string& path, const Vec& x) { save_csv(path, Mat(x)); }

// binary layout: 8-byte magic "FRAMECS1", u64 rows, u64 cols, then rows*cols (re, im) f64 pairs in
// row-major order; all little-endian
inline constexpr std::array<char, 8> binary_magic{'F', 'R', 'A', 'M', 'E', 'C', 'S', '1'};

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
  static_assert(sizeof(T) == 8);
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
  char b[8];
  std::memcpy(b, &u, 8);
  os.write(b, 8);
}

template <class T>
T get_le(std::istream& is) {
  char b[8];
  is.read(b, 8);
  require(is.gcount() == 8, ErrorKind::io, "truncated binary matrix");
  std::uint64_t u;
  std::memcpy(&u, b, 8);
  if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
  T v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace detail

inline void write_binary(std::ostream& os, const Mat& A) {
  os.write(binary_magic.data(), 8);
  detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(A.rows()));
  detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(A.cols()));
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      detail::put_le<double>(os, A(i, j).real());
      detail::put_le<double>(os, A(i, j).imag());
    }
}

inline Mat read_binary(std::istream& is) {
  std::array<char, 8> magic{};
  is.read(magic.data(), 8);
  require(is.gcount() == 8 && magic == binary_magic, ErrorKind::io, "bad binary matrix magic");
  auto r = detail::get_le<std::uint64_t>(is);
  auto c = detail::get_le<std::uint64_t>(is);
  require(r > 0 && c > 0 && r * c < (std::uint64_t(1) << 34), ErrorKind::io, "bad binary matrix shape");
  Mat A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      double re = detail::get_le<double>(is);
      double im = detail::get_le<double>(is);
      A(i, j) = {re, im};
    }
  return A;
}

inline void save_binary(const std::string& path, const Mat& A) {
  std::ofstream os(path, std::ios::binary);
  require(bool(os), ErrorKind::io, "cannot open " + path);
  write_binary(os, A);
}

inline Mat load_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(bool(is), ErrorKind::io, "cannot open " + path);
  return read_binary(is);
}

}  // namespace framecs::io
