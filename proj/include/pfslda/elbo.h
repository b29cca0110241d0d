#ifndef PFSLDA_ELBO_H_
#define PFSLDA_ELBO_H_

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pfslda/corpus.h"
#include "pfslda/model.h"

namespace pfslda {

// Per-batch sums of the evidence lower bound terms. Entropies are stored as
// H = -E_q[log q], so total = (model terms) + (entropy terms).
struct ElboBreakdown {
  double log_p_theta = 0.0;
  double log_p_z = 0.0;
  double log_p_w = 0.0;
  double log_p_xi = 0.0;
  double log_p_y = 0.0;
  double entropy_theta = 0.0;
  double entropy_z = 0.0;
  double entropy_xi = 0.0;
  double total = 0.0;

  double model_terms() const { return log_p_theta + log_p_z + log_p_w + log_p_xi + log_p_y; }
  double entropy_terms() const { return entropy_theta + entropy_z + entropy_xi; }
  ElboBreakdown& operator+=(const ElboBreakdown& other);
};

// Gradient of ElboBreakdown::total in unconstrained coordinates. Per-document
// blocks are aligned with `docs`.
struct GradientBundle {
  Eigen::MatrixXd d_beta_logits;
  Eigen::VectorXd d_pi_logits;
  Eigen::VectorXd d_eta;
  double d_log_delta = 0.0;
  std::vector<std::size_t> docs;
  Eigen::MatrixXd d_log_gamma;                // |docs| x K
  std::vector<Eigen::MatrixXd> d_phi_logits;  // filled only for PhiMode::kSgd
  Eigen::VectorXd d_varphi_logits;
};

// The Gaussian or logistic target term E_q[log p(y | theta)] and its partial
// derivatives. The logistic case uses a second-order expansion of
// log sigma((2y-1) eta^T theta) around E[theta].
struct TargetTerm {
  double value = 0.0;
  Eigen::VectorXd d_gamma;  // w.r.t. gamma itself (not log gamma)
  Eigen::VectorXd d_eta;
  double d_log_delta = 0.0;
};

TargetTerm target_term(double y, const Eigen::Ref<const Eigen::VectorXd>& gamma,
                       const ModelParams& params, TargetType type);

// Coordinate optimum of the topic responsibilities of document d:
// phi_nk proportional to beta_kv^varphi_v exp(E[log theta_k]).
Eigen::MatrixXd optimal_phi(const Document& doc, const ModelParams& params,
                            const Eigen::Ref<const Eigen::VectorXd>& gamma,
                            const Eigen::Ref<const Eigen::VectorXd>& varphi,
                            const ModelConfig& config);

void refresh_phi(const Corpus& corpus, std::span<const std::size_t> docs,
                 const ModelParams& params, VariationalState* state,
                 const ModelConfig& config);

ElboBreakdown compute_elbo(const Corpus& corpus, std::span<const std::size_t> docs,
                           const ModelParams& params, const VariationalState& state,
                           const ModelConfig& config, int workers = 1);

// Whole corpus.
ElboBreakdown compute_elbo(const Corpus& corpus, const ModelParams& params,
                           const VariationalState& state, const ModelConfig& config,
                           int workers = 1);

GradientBundle compute_gradients(const Corpus& corpus,
                                 std::span<const std::size_t> docs,
                                 const ModelParams& params,
                                 const VariationalState& state,
                                 const ModelConfig& config, int workers = 1);

struct BoundTerm {
  double value = 0.0;
  double std_error = 0.0;
  bool minus_infinity = false;
};

// Monte-Carlo estimate of the three-term likelihood lower bound
//   E_xi[log p(y | w, xi)] + p E_theta[log p_beta(w | theta)] + (1-p) log p_pi(w)
// under the prior, summed over documents.
struct BoundDiagnostic {
  BoundTerm prediction;
  BoundTerm words;
  BoundTerm pi;

  double sum() const { return prediction.value + words.value + pi.value; }
  double combined_stderr() const;
};

BoundDiagnostic likelihood_bound_diagnostic(const Corpus& corpus,
                                            const ModelParams& params,
                                            const ModelConfig& config,
                                            int mc_samples, std::uint64_t seed);

}  // namespace pfslda

#endif  // PFSLDA_ELBO_H_
