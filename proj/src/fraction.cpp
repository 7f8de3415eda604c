#include "pairforge/fraction.hpp"

#include <charconv>
#include <numeric>
#include <stdexcept>

namespace pairforge {

namespace {

std::int64_t parse_int(std::string_view text) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument("not an integer: " + std::string(text));
  }
  return v;
}

}  // namespace

Fraction::Fraction(std::int64_t num, std::int64_t den) {
  if (den == 0) {
    throw std::invalid_argument("fraction with zero denominator");
  }
  if (den < 0) {
    num = -num;
    den = -den;
  }
  std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  if (g == 0) g = 1;
  num_ = num / g;
  den_ = den / g;
}

Fraction Fraction::parse(std::string_view text) {
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    return Fraction(parse_int(text.substr(0, slash)),
                    parse_int(text.substr(slash + 1)));
  }
  if (auto dot = text.find('.'); dot != std::string_view::npos) {
    std::string_view whole = text.substr(0, dot);
    std::string_view frac = text.substr(dot + 1);
    if (frac.empty()) {
      throw std::invalid_argument("bad decimal: " + std::string(text));
    }
    bool negative = !whole.empty() && whole.front() == '-';
    std::int64_t w = whole.empty() || whole == "-" ? 0 : parse_int(whole);
    std::int64_t f = parse_int(frac);
    if (f < 0) {
      throw std::invalid_argument("bad decimal: " + std::string(text));
    }
    std::int64_t scale = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
    std::int64_t magnitude = (w < 0 ? -w : w) * scale + f;
    return Fraction((negative || w < 0) ? -magnitude : magnitude, scale);
  }
  return Fraction(parse_int(text), 1);
}

double Fraction::to_double() const {
  return static_cast<double>(num_) / static_cast<double>(den_);
}

std::string Fraction::to_string() const {
  std::int64_t den = den_;
  int twos = 0, fives = 0;
  while (den % 2 == 0) {
    den /= 2;
    ++twos;
  }
  while (den % 5 == 0) {
    den /= 5;
    ++fives;
  }
  if (den != 1) {
    return std::to_string(num_) + "/" + std::to_string(den_);
  }
  int digits = twos > fives ? twos : fives;
  if (digits == 0) digits = 1;
  std::int64_t scale = 1;
  for (int i = 0; i < digits; ++i) scale *= 10;
  std::int64_t scaled = num_ * (scale / den_);
  bool negative = scaled < 0;
  std::string body = std::to_string(negative ? -scaled : scaled);
  if (body.size() <= static_cast<std::size_t>(digits)) {
    body.insert(0, static_cast<std::size_t>(digits) + 1 - body.size(), '0');
  }
  body.insert(body.size() - static_cast<std::size_t>(digits), ".");
  return negative ? "-" + body : body;
}

bool Fraction::operator<(const Fraction& o) const {
  return num_ * o.den_ < o.num_ * den_;
}

Fraction Fraction::operator-(const Fraction& o) const {
  return Fraction(num_ * o.den_ - o.num_ * den_, den_ * o.den_);
}

Fraction Fraction::abs() const {
  return num_ < 0 ? Fraction(-num_, den_) : *this;
}

}  // namespace pairforge
