#ifndef PFSLDA_MODEL_H_
#define PFSLDA_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "pfslda/corpus.h"

namespace pfslda {

// How per-token topic responsibilities are handled during SGD.
enum class PhiMode {
  kClosedForm,  // reset to the coordinate optimum before each evaluation
  kSgd,         // free softmax-parameterized variables updated by ADAM
};

struct ModelConfig {
  int num_topics = 5;
  double p = 0.25;
  TargetType target_type = TargetType::kReal;
  Eigen::VectorXd alpha;  // empty means all ones
  std::uint64_t seed = 0;
  // False gives plain sLDA: no switch variables and no additional topic.
  bool channel_enabled = true;
  PhiMode phi_mode = PhiMode::kClosedForm;

  Eigen::VectorXd alpha_vector() const;
  void validate() const;
};

struct ModelParams {
  Eigen::MatrixXd beta_logits;  // K x V, beta_k = softmax(row k)
  Eigen::VectorXd pi_logits;    // V
  Eigen::VectorXd eta;          // K
  double log_delta = 0.0;       // Gaussian variance, real targets only
  double p = 0.25;

  int num_topics() const { return static_cast<int>(beta_logits.rows()); }
  int vocab_size() const { return static_cast<int>(beta_logits.cols()); }

  Eigen::MatrixXd beta() const;
  Eigen::MatrixXd log_beta() const;
  Eigen::VectorXd pi() const;
  Eigen::VectorXd log_pi() const;
  double delta() const;
};

// gamma is stored directly (positive); SGD works in log-gamma coordinates.
// phi[d] holds one K-simplex row per distinct word of document d, aligned
// with Document::entries.
struct VariationalState {
  Eigen::MatrixXd gamma;
  std::vector<Eigen::MatrixXd> phi;
  Eigen::VectorXd varphi_logits;

  std::size_t num_docs() const { return phi.size(); }
  Eigen::VectorXd varphi() const;
};

Eigen::VectorXd softmax_simplex(const Eigen::Ref<const Eigen::VectorXd>& logits);
Eigen::VectorXd log_softmax(const Eigen::Ref<const Eigen::VectorXd>& logits);

// Topic logits are log(1 + Exp(1) noise), eta ~ N(0, 0.1^2), gamma_dk =
// alpha_k + N_d / K, phi uniform and varphi = 0.5.
std::pair<ModelParams, VariationalState> init_params(
    const ModelConfig& config, const std::vector<Document>& docs,
    int vocab_size, std::uint64_t seed);

VariationalState init_state(const ModelConfig& config,
                            const std::vector<Document>& docs, int vocab_size);

// E_q[log theta_k] = Psi(gamma_k) - Psi(sum gamma).
Eigen::VectorXd expected_log_theta(const Eigen::Ref<const Eigen::VectorXd>& gamma);

// E_q[theta theta^T] for theta ~ Dir(gamma).
Eigen::MatrixXd expected_theta_outer(const Eigen::Ref<const Eigen::VectorXd>& gamma);

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  Eigen::VectorXd varphi_logits;
};

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pfslda

#endif  // PFSLDA_MODEL_H_
