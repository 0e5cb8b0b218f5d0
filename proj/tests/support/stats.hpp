#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace test_support {

// Pearson chi-square p-value for observed counts against expected counts.
// Bins with expected mass below `min_expected` are pooled into the previous
// bin to keep the approximation sound.
inline double chi_square_p(std::vector<double> observed,
                           std::vector<double> expected,
                           double min_expected = 5.0) {
  if (observed.size() != expected.size() || observed.empty())
    throw std::invalid_argument("chi_square_p: bad bin vectors");

  std::vector<double> obs, exp;
  for (size_t i = 0; i < observed.size(); ++i) {
    if (!exp.empty() && exp.back() < min_expected) {
      obs.back() += observed[i];
      exp.back() += expected[i];
    } else {
      obs.push_back(observed[i]);
      exp.push_back(expected[i]);
    }
  }
  if (exp.size() >= 2 && exp.back() < min_expected) {
    obs[exp.size() - 2] += obs.back();
    exp[exp.size() - 2] += exp.back();
    obs.pop_back();
    exp.pop_back();
  }
  if (exp.size() < 2) throw std::invalid_argument("chi_square_p: too few bins");

  double stat = 0;
  for (size_t i = 0; i < exp.size(); ++i) {
    double d = obs[i] - exp[i];
    stat += d * d / exp[i];
  }
  boost::math::chi_squared dist(static_cast<double>(exp.size() - 1));
  return 1.0 - boost::math::cdf(dist, stat);
}

}  // namespace test_support
