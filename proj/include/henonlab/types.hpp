#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace henon {

using cplx = std::complex<double>;

/// A point of C^2 with canonical coordinates (z1, z2).
struct Point2C {
  cplx z1{};
  cplx z2{};

  /// Real coordinates in the order (x1, y1, x2, y2).
  std::array<double, 4> real4() const { return {z1.real(), z1.imag(), z2.real(), z2.imag()}; }
  static Point2C from_real4(const std::array<double, 4>& x) { return {{x[0], x[1]}, {x[2], x[3]}}; }

  double norm() const { return std::sqrt(std::norm(z1) + std::norm(z2)); }
  double sup_norm() const { return std::max(std::abs(z1), std::abs(z2)); }
  bool finite() const;

  friend bool operator==(const Point2C&, const Point2C&) = default;
};

Point2C operator-(const Point2C& a, const Point2C& b);
Point2C operator+(const Point2C& a, const Point2C& b);

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or configuration. The CLI maps it to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numerical precondition failed (infeasible nesting, empty measure, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace henon
