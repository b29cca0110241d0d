#ifndef PFSLDA_SAMPLING_H_
#define PFSLDA_SAMPLING_H_

#include <random>

#include <Eigen/Core>

namespace pfslda {

using Rng = std::mt19937_64;

// Dirichlet draw via normalized Gamma(alpha_k, 1) variates.
Eigen::VectorXd sample_dirichlet(const Eigen::Ref<const Eigen::VectorXd>& alpha, Rng& rng);

// Index drawn with probability proportional to weights.
int sample_categorical(const Eigen::Ref<const Eigen::VectorXd>& weights, Rng& rng);

}  // namespace pfslda

#endif  // PFSLDA_SAMPLING_H_
