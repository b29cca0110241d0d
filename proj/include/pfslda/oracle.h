#ifndef PFSLDA_ORACLE_H_
#define PFSLDA_ORACLE_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pfslda/corpus.h"
#include "pfslda/elbo.h"
#include "pfslda/model.h"

namespace pfslda {

enum class OracleMethod { kExact, kMonteCarlo, kGrid };

std::string to_string(OracleMethod method);

struct OracleEstimate {
  double value = 0.0;
  double stderr_value = 0.0;  // 0 for exact results
  OracleMethod method = OracleMethod::kExact;
};

// log p(w, y) for one document, with theta integrated by Monte Carlo over
// the prior and z, xi summed out per token:
//   p(w, y) = E_theta[ p(y | theta) prod_n (p (beta^T theta)_{w_n} + (1-p) pi_{w_n}) ].
// K = 1 is evaluated exactly. The standard error comes from the delta
// method on the log of the sample mean. Requires N_d <= 12 and
// samples >= 10^4.
OracleEstimate mc_marginal_loglik(const Document& doc, double target,
                                  const ModelParams& params,
                                  const ModelConfig& config, int samples,
                                  std::uint64_t seed, bool include_target = true);

// Sum over documents; per-document seeds are seed + d and standard errors
// combine in quadrature.
OracleEstimate mc_marginal_loglik(const Corpus& corpus, const ModelParams& params,
                                  const ModelConfig& config, int samples,
                                  std::uint64_t seed, bool include_target = true);

using Objective = std::function<double(const Eigen::VectorXd&)>;

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h.
Eigen::VectorXd finite_difference_gradient(const Objective& objective,
                                           const Eigen::VectorXd& point, double step);

struct GridOptimum {
  double best_value = 0.0;
  double best_objective = 0.0;
  std::size_t best_index = 0;
};

// Scans `grid` for coordinate `coordinate` of `point`, all others fixed.
// Ties resolve to the first grid entry.
GridOptimum grid_optimal_coordinate(const Objective& objective,
                                    const Eigen::VectorXd& point, Eigen::Index coordinate,
                                    const std::vector<double>& grid);

// {0, 1/n, ..., 1}.
std::vector<double> unit_grid(int n);

struct TinyInstance {
  Corpus corpus;
  ModelConfig config;
  ModelParams params;
  VariationalState state;
};

// Random model, variational state and corpus for oracle comparisons. Every
// document has between 1 and max_tokens tokens.
TinyInstance random_tiny_instance(std::uint64_t seed, int num_docs, int vocab_size,
                                  int num_topics, int max_tokens,
                                  TargetType type = TargetType::kReal);

// Packs every coordinate that compute_gradients differentiates, in the order
// beta_logits (column-major), pi_logits, eta, log_delta, log gamma
// (column-major), varphi_logits. unpack_coordinates is the inverse.
Eigen::VectorXd pack_coordinates(const ModelParams& params, const VariationalState& state);
void unpack_coordinates(const Eigen::VectorXd& x, ModelParams* params, VariationalState* state);
// The matching layout for a gradient over every document of the state.
Eigen::VectorXd pack_gradient(const GradientBundle& gradient);

struct VerifyCheck {
  std::string name;
  double value = 0.0;
  double reference = 0.0;
  bool pass = false;
};

// Oracle comparisons behind the `verify` command: ELBO versus exact
// enumeration and Monte-Carlo likelihood, analytic versus finite-difference
// gradients, and the closed-form switch update versus a grid search.
std::vector<VerifyCheck> run_verify_suite(std::uint64_t seed, int samples);

}  // namespace pfslda

#endif  // PFSLDA_ORACLE_H_
