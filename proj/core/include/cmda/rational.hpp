// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cmda {

/// Exact rational on 64-bit integers. Used for cascade coefficient matrices
/// and mixing-weight convexity checks, where floating tolerances are not
/// acceptable.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d = 1) : num(n), den(d) {
    if (den == 0) throw std::invalid_argument("Rational: zero denominator");
    normalize();
  }

  void normalize() {
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
    if (num == 0) den = 1;
  }

  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

  std::string to_string() const {
    return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
  }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return Rational(a.num * b.den + b.num * a.den, a.den * b.den);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return Rational(a.num * b.den - b.num * a.den, a.den * b.den);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return Rational(a.num * b.num, a.den * b.den);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num == 0) throw std::invalid_argument("Rational: division by zero");
    return Rational(a.num * b.den, a.den * b.num);
  }
  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num == b.num && a.den == b.den;
  }
  friend bool operator<(const Rational& a, const Rational& b) {
    return a.num * b.den < b.num * a.den;
  }
};

/// Parse a plain decimal literal ("0.6", "-1.25", "2") exactly.
/// Scientific notation is rejected; the config schema does not need it.
inline Rational rational_from_decimal(const std::string& text) {
  if (text.empty()) throw std::invalid_argument("rational_from_decimal: empty string");
  std::size_t pos = 0;
  bool negative = false;
  if (text[pos] == '+' || text[pos] == '-') {
    negative = text[pos] == '-';
    ++pos;
  }
  std::int64_t num = 0;
  std::int64_t den = 1;
  bool saw_digit = false;
  bool after_point = false;
  for (; pos < text.size(); ++pos) {
    const char c = text[pos];
    if (c == '.') {
      if (after_point) throw std::invalid_argument("rational_from_decimal: bad literal '" + text + "'");
      after_point = true;
      continue;
    }
    if (c < '0' || c > '9')
      throw std::invalid_argument("rational_from_decimal: bad literal '" + text + "'");
    num = num * 10 + (c - '0');
    if (after_point) den *= 10;
    saw_digit = true;
  }
  if (!saw_digit) throw std::invalid_argument("rational_from_decimal: bad literal '" + text + "'");
  return Rational(negative ? -num : num, den);
}

}  // namespace cmda
