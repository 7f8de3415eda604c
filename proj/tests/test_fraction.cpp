#include <doctest.h>

#include <random>
#include <stdexcept>

#include "pairforge/fraction.hpp"

using pairforge::Fraction;

TEST_CASE("fraction reduces and compares exactly") {
  CHECK(Fraction(32, 8) == Fraction(4, 1));
  CHECK(Fraction(31, 8) < Fraction(4, 1));
  CHECK(Fraction(33, 8) > Fraction(4, 1));
  CHECK(Fraction(1, 3) < Fraction(2, 5));
  CHECK(Fraction(-1, 2) == Fraction(1, -2));
}

TEST_CASE("decimal rendering is exact for terminating denominators") {
  CHECK(Fraction(32, 8).to_string() == "4.0");
  CHECK(Fraction(31, 8).to_string() == "3.875");
  CHECK(Fraction(9, 8).to_string() == "1.125");
  CHECK(Fraction(1, 20).to_string() == "0.05");
  CHECK(Fraction(-1, 8).to_string() == "-0.125");
  CHECK(Fraction(5, 1).to_string() == "5.0");
}

TEST_CASE("non-terminating denominators fall back to fraction form") {
  CHECK(Fraction(11, 3).to_string() == "11/3");
  CHECK(Fraction(13, 7).to_string() == "13/7");
  CHECK(Fraction(14, 6).to_string() == "7/3");
}

TEST_CASE("parse round-trips both renderings") {
  for (const Fraction f : {Fraction(32, 8), Fraction(31, 8), Fraction(11, 3),
                           Fraction(-7, 4), Fraction(0, 5), Fraction(23, 5)}) {
    CHECK(Fraction::parse(f.to_string()) == f);
  }
  CHECK(Fraction::parse("4") == Fraction(4, 1));
  CHECK_THROWS_AS(Fraction::parse("4."), std::invalid_argument);
  CHECK_THROWS_AS(Fraction::parse("x"), std::invalid_argument);
  CHECK_THROWS_AS(Fraction(1, 0), std::invalid_argument);
}

TEST_CASE("random mean fractions round-trip through strings") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 2000; ++trial) {
    int count = 1 + static_cast<int>(rng() % 8);
    std::int64_t sum = 0;
    for (int i = 0; i < count; ++i) sum += 1 + static_cast<int>(rng() % 5);
    Fraction f(sum, count);
    CHECK(Fraction::parse(f.to_string()) == f);
    CHECK(f >= Fraction::from_int(1));
    CHECK(f <= Fraction::from_int(5));
  }
}
