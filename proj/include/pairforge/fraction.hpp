#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace pairforge {

// Exact rational value. Aggregate reward scores are means of small integers,
// so argmax/tie decisions must never go through floating point.
class Fraction {
 public:
  Fraction() : num_(0), den_(1) {}
  Fraction(std::int64_t num, std::int64_t den);

  static Fraction from_int(std::int64_t v) { return Fraction(v, 1); }

  // Parses either an exact decimal ("3.875", "4.0", "-2") or a fraction
  // ("11/3"). Throws std::invalid_argument on anything else.
  static Fraction parse(std::string_view text);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  double to_double() const;

  // Exact decimal expansion when the reduced denominator is of the form
  // 2^a * 5^b (always at least one fractional digit: "4.0"); otherwise the
  // reduced fraction form "11/3".
  std::string to_string() const;

  bool operator==(const Fraction& o) const {
    return num_ == o.num_ && den_ == o.den_;
  }
  bool operator!=(const Fraction& o) const { return !(*this == o); }
  bool operator<(const Fraction& o) const;
  bool operator>(const Fraction& o) const { return o < *this; }
  bool operator<=(const Fraction& o) const { return !(o < *this); }
  bool operator>=(const Fraction& o) const { return !(*this < o); }

  Fraction operator-(const Fraction& o) const;
  Fraction abs() const;

 private:
  std::int64_t num_;
  std::int64_t den_;  // always > 0, gcd(|num|, den) == 1
};

}  // namespace pairforge
