#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <stdexcept>

#include <boost/math/distributions/binomial.hpp>

namespace aoiq::eval {

struct SignTest {
  int positive = 0;
  int negative = 0;
  int ties = 0;
  double p_value = 1.0;  // one-sided, H1: differences tend to be positive
};

/// Exact one-sided sign test on paired differences; ties are dropped.
inline SignTest sign_test_greater(std::span<const double> differences) {
  SignTest t;
  for (double d : differences) {
    if (d > 0.0) ++t.positive;
    else if (d < 0.0) ++t.negative;
    else ++t.ties;
  }
  const int n = t.positive + t.negative;
  if (n == 0) return t;
  // P[X >= positive] with X ~ Binomial(n, 1/2).
  const boost::math::binomial_distribution<double> b(n, 0.5);
  t.p_value = t.positive == 0 ? 1.0 : boost::math::cdf(boost::math::complement(b, t.positive - 1));
  return t;
}

/// Mean and population standard deviation.
inline std::pair<double, double> mean_std(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean_std: empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  const double m = s / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(xs.size()))};
}

}  // namespace aoiq::eval
