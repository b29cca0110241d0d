#include "pfslda/special.h"

#include <cmath>
#include <limits>

namespace pfslda {

namespace {
constexpr double kAsymptoticStart = 6.0;
}  // namespace

double digamma(double x) {
  if (!(x > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  double shift = 0.0;
  while (x < kAsymptoticStart) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double r = 1.0 / (x * x);
  // Bernoulli terms B_2n / (2n x^2n), n = 1..8.
  const double series =
      r * (1.0 / 12 -
           r * (1.0 / 120 -
                r * (1.0 / 252 -
                     r * (1.0 / 240 -
                          r * (1.0 / 132 -
                               r * (691.0 / 32760 -
                                    r * (1.0 / 12 - r * 3617.0 / 8160)))))));
  return shift + std::log(x) - 0.5 / x - series;
}

double trigamma(double x) {
  if (!(x > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  double shift = 0.0;
  while (x < kAsymptoticStart) {
    shift += 1.0 / (x * x);
    x += 1.0;
  }
  const double r = 1.0 / (x * x);
  // B_2n / x^(2n+1), n = 1..8.
  const double series =
      r * (1.0 / 6 -
           r * (1.0 / 30 -
                r * (1.0 / 42 -
                     r * (1.0 / 30 -
                          r * (5.0 / 66 -
                               r * (691.0 / 2730 -
                                    r * (7.0 / 6 - r * 3617.0 / 510)))))));
  return shift + 1.0 / x + 0.5 * r + series / x;
}

double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) { return -softplus(-x); }

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const double m = x.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((x.array() - m).exp().sum());
}

}  // namespace pfslda
