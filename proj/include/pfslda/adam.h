#ifndef PFSLDA_ADAM_H_
#define PFSLDA_ADAM_H_

#include <Eigen/Core>

namespace pfslda {

struct AdamOptions {
  double learning_rate = 0.025;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// ADAM moment state for one block of coordinates with its own step counter.
// step() performs gradient *ascent*.
class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index size, AdamOptions options);

  void step(Eigen::Ref<Eigen::VectorXd> params,
            const Eigen::Ref<const Eigen::VectorXd>& gradient);

  long steps_taken() const { return t_; }
  Eigen::Index size() const { return m_.size(); }

 private:
  AdamOptions options_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  long t_ = 0;
};

}  // namespace pfslda

#endif  // PFSLDA_ADAM_H_
