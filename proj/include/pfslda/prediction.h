#ifndef PFSLDA_PREDICTION_H_
#define PFSLDA_PREDICTION_H_

#include <vector>

#include <Eigen/Core>

#include "pfslda/corpus.h"
#include "pfslda/model.h"

namespace pfslda {

struct PredictConfig {
  int steps = 200;
  double step_size = 0.1;
  double tol = 1e-6;  // stop once the softmax-coordinate gradient norm drops below
};

// Log posterior of theta up to a constant:
//   sum_k (alpha_k - 1) log theta_k + sum_n log[p (beta theta)_w + (1-p) pi_w]
// (the mixture collapses to (beta theta)_w without the switch channel).
double map_objective(const Document& doc, const Eigen::Ref<const Eigen::VectorXd>& theta,
                     const ModelParams& params, const ModelConfig& config);

// Gradient ascent in softmax coordinates from the uniform point, with a
// backtracking step that starts at step_size.
// The objective is scaled by 1/N_d so the step size is independent of the
// document length. Every accepted step increases the objective.
Eigen::VectorXd map_theta(const Document& doc, const ModelParams& params,
                          const ModelConfig& config, const PredictConfig& pconfig = {});

// eta^T theta for real targets, sigma(eta^T theta) for binary targets.
double predict_target(const Document& doc, const ModelParams& params,
                      const ModelConfig& config, const PredictConfig& pconfig = {});

std::vector<double> predict_corpus(const Corpus& corpus, const ModelParams& params,
                                   const ModelConfig& config,
                                   const PredictConfig& pconfig = {});

}  // namespace pfslda

#endif  // PFSLDA_PREDICTION_H_
