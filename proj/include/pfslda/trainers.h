#ifndef PFSLDA_TRAINERS_H_
#define PFSLDA_TRAINERS_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pfslda/corpus.h"
#include "pfslda/model.h"

namespace pfslda {

enum class TrainerKind { kSgd, kCa };

std::string to_string(TrainerKind kind);
TrainerKind parse_trainer_kind(const std::string& name);

struct TrainConfig {
  TrainerKind trainer = TrainerKind::kSgd;
  int epochs = 1000;
  int batch_size = 20;
  double learning_rate = 0.025;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;  // batch order; initialization uses ModelConfig::seed
  int ca_sweeps = 100;
  double convergence_tol = 0.0;   // relative ELBO change per epoch or sweep; 0 disables
  int log_every = 1;              // epochs (sgd) or sweeps (ca) between trace records
  int workers = 1;
  int local_steps = 1;            // sgd: local (phi, gamma) ascent steps per batch
  bool early_stopping = false;    // needs a validation corpus
  int patience = 10;              // logging steps without validation improvement
  int gamma_steps = 25;           // ca: log-gamma ascent steps per document per sweep
  double gamma_step_size = 0.1;   // ca: initial step of the backtracking ascent
  int restarts = 1;               // independent initializations; the highest final ELBO is kept

  void validate() const;
};

struct TraceRecord {
  long step = 0;
  double elbo = 0.0;
  double val_metric = 0.0;  // NaN when no validation corpus was supplied
};

struct TrainTrace {
  std::vector<TraceRecord> records;

  void add(long step, double elbo, double val_metric);
  // CSV with header step,elbo,val_metric; a missing metric is left empty.
  void write_csv(const std::filesystem::path& path) const;
};

struct TrainResult {
  ModelParams params;
  VariationalState state;
  TrainTrace trace;
  int epochs_run = 0;
  bool converged = false;
  double elbo = 0.0;  // final training ELBO
};

// Mini-batch ADAM ascent on the ELBO over the model parameters, the word
// switch logits and the per-document log gamma of each batch.
TrainResult train_sgd(const Corpus& train, const Corpus* val,
                      const ModelConfig& model_config, const TrainConfig& train_config);

// Closed-form coordinate ascent. Real targets only.
TrainResult train_coordinate_ascent(const Corpus& train, const ModelConfig& model_config,
                                    const TrainConfig& train_config);

// Dispatches on train_config.trainer. The validation corpus is used only by
// the sgd trainer.
TrainResult train(const Corpus& train, const Corpus* val, const ModelConfig& model_config,
                  const TrainConfig& train_config);

// RMSE for real targets, AUC for binary targets.
double validation_metric(const Corpus& val, const ModelParams& params,
                         const ModelConfig& config);

// Individual coordinate-ascent updates. Each maximizes the ELBO over its
// block with everything else held fixed.

// logit(varphi_j) = Omega_j / W_j where W_j is the corpus count of word j and
//   Omega_j = sum_n w_nj (sum_k phi_nk log beta_kj - log pi_j + logit p).
// Words that never occur keep their current value.
void ca_update_varphi(const Corpus& corpus, const ModelParams& params,
                      VariationalState* state, const ModelConfig& config);

// phi_nk proportional to beta_kv^varphi_v exp(E[log theta_k]).
void ca_update_phi(const Corpus& corpus, std::size_t doc, const ModelParams& params,
                   VariationalState* state, const ModelConfig& config);

// Backtracking ascent on log gamma_d. Returns the number of accepted steps.
int ca_update_gamma(const Corpus& corpus, std::size_t doc, const ModelParams& params,
                    VariationalState* state, const ModelConfig& config, int steps,
                    double step_size);

// pi_j proportional to (1 - varphi_j) * count_j.
void ca_update_pi(const Corpus& corpus, const VariationalState& state, ModelParams* params,
                  const ModelConfig& config);

// beta_kj proportional to sum_n varphi_j phi_nk w_nj, floored at 1e-12.
void ca_update_beta(const Corpus& corpus, const VariationalState& state, ModelParams* params,
                    const ModelConfig& config);

// Least-squares eta with a 1e-6 ridge, then the residual variance floored at
// 1e-6.
void ca_update_eta_delta(const Corpus& corpus, const VariationalState& state,
                         ModelParams* params, const ModelConfig& config);

}  // namespace pfslda

#endif  // PFSLDA_TRAINERS_H_
