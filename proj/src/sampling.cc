#include "pfslda/sampling.h"

namespace pfslda {

Eigen::VectorXd sample_dirichlet(const Eigen::Ref<const Eigen::VectorXd>& alpha, Rng& rng) {
  Eigen::VectorXd out(alpha.size());
  for (;;) {
    for (Eigen::Index k = 0; k < alpha.size(); ++k) {
      std::gamma_distribution<double> g(alpha[k], 1.0);
      out[k] = g(rng);
    }
    const double total = out.sum();
    if (total > 0.0) return out / total;
  }
}

int sample_categorical(const Eigen::Ref<const Eigen::VectorXd>& weights, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, weights.sum());
  double u = unif(rng);
  for (Eigen::Index k = 0; k < weights.size(); ++k) {
    u -= weights[k];
    if (u < 0.0) return static_cast<int>(k);
  }
  // Rounding left u marginally nonnegative; return the last positive weight.
  for (Eigen::Index k = weights.size() - 1; k >= 0; --k) {
    if (weights[k] > 0.0) return static_cast<int>(k);
  }
  return 0;
}

}  // namespace pfslda
