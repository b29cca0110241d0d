#include "pfslda/adam.h"

#include <cmath>

#include "pfslda/error.h"

namespace pfslda {

Adam::Adam(Eigen::Index size, AdamOptions options)
    : options_(options),
      m_(Eigen::VectorXd::Zero(size)),
      v_(Eigen::VectorXd::Zero(size)) {
  if (!(options.learning_rate > 0.0)) throw Error("learning rate must be positive");
}

void Adam::step(Eigen::Ref<Eigen::VectorXd> params,
                const Eigen::Ref<const Eigen::VectorXd>& gradient) {
  if (params.size() != m_.size() || gradient.size() != m_.size()) {
    throw Error("ADAM block size mismatch");
  }
  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  m_ = b1 * m_ + (1.0 - b1) * gradient;
  v_ = b2 * v_ + (1.0 - b2) * gradient.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  params.array() += options_.learning_rate * (m_.array() / c1) /
                    ((v_.array() / c2).sqrt() + options_.epsilon);
}

}  // namespace pfslda
