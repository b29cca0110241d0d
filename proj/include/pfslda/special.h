#ifndef PFSLDA_SPECIAL_H_
#define PFSLDA_SPECIAL_H_

#include <Eigen/Core>

namespace pfslda {

// Psi(x) for x > 0: upward recurrence to x >= 6, then the asymptotic series.
// Returns NaN for x <= 0.
double digamma(double x);

// Psi'(x) for x > 0, same scheme as digamma.
double trigamma(double x);

// log(1 + exp(x)) without overflow.
double softplus(double x);

// 1 / (1 + exp(-x)), symmetric form that never overflows.
double sigmoid(double x);

// log sigma(x) = -softplus(-x).
double log_sigmoid(double x);

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace pfslda

#endif  // PFSLDA_SPECIAL_H_
