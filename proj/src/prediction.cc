#include "pfslda/prediction.h"

#include <cmath>

#include "pfslda/special.h"

namespace pfslda {

namespace {

// Per-word likelihood factors as functions of theta: mix_v = a_v . theta + b_v.
struct WordMixture {
  Eigen::MatrixXd weights;  // K x n_words: p * beta_kv (or beta_kv)
  Eigen::VectorXd offset;   // (1-p) pi_v or 0
  Eigen::VectorXd counts;
};

WordMixture build_mixture(const Document& doc, const ModelParams& params,
                          const ModelConfig& config) {
  const Eigen::MatrixXd beta = params.beta();
  const Eigen::Index n = static_cast<Eigen::Index>(doc.entries.size());
  WordMixture mix;
  mix.weights.resize(params.num_topics(), n);
  mix.offset = Eigen::VectorXd::Zero(n);
  mix.counts.resize(n);
  const double p = config.channel_enabled ? params.p : 1.0;
  Eigen::VectorXd pi;
  if (config.channel_enabled) pi = params.pi();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& e = doc.entries[static_cast<std::size_t>(i)];
    mix.weights.col(i) = p * beta.col(e.word);
    if (config.channel_enabled) mix.offset[i] = (1.0 - p) * pi[e.word];
    mix.counts[i] = e.count;
  }
  return mix;
}

double objective(const WordMixture& mix, const Eigen::VectorXd& theta,
                 const Eigen::VectorXd& alpha) {
  double value = 0.0;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    if (alpha[k] != 1.0) value += (alpha[k] - 1.0) * std::log(theta[k]);
  }
  const Eigen::VectorXd word_prob = mix.weights.transpose() * theta + mix.offset;
  for (Eigen::Index i = 0; i < word_prob.size(); ++i) {
    value += mix.counts[i] * std::log(word_prob[i]);
  }
  return value;
}

}  // namespace

double map_objective(const Document& doc, const Eigen::Ref<const Eigen::VectorXd>& theta,
                     const ModelParams& params, const ModelConfig& config) {
  return objective(build_mixture(doc, params, config), theta, config.alpha_vector());
}

Eigen::VectorXd map_theta(const Document& doc, const ModelParams& params,
                          const ModelConfig& config, const PredictConfig& pconfig) {
  const int k = params.num_topics();
  Eigen::VectorXd theta = Eigen::VectorXd::Constant(k, 1.0 / k);
  if (k == 1) return theta;
  const Eigen::VectorXd alpha = config.alpha_vector();
  const WordMixture mix = build_mixture(doc, params, config);
  const double scale = 1.0 / std::max(1, doc.total);

  // Gradient ascent in softmax coordinates with a backtracking step: a step
  // that fails to improve is halved, an accepted one doubles the next trial.
  Eigen::VectorXd logits = Eigen::VectorXd::Zero(k);
  double value = objective(mix, theta, alpha) * scale;
  double rate = pconfig.step_size;
  for (int step = 0; step < pconfig.steps; ++step) {
    // d objective / d theta_k
    const Eigen::VectorXd word_prob = mix.weights.transpose() * theta + mix.offset;
    Eigen::VectorXd grad = mix.weights * mix.counts.cwiseQuotient(word_prob);
    grad.array() += (alpha.array() - 1.0) / theta.array();
    grad *= scale;
    // Chain rule through the softmax.
    const Eigen::VectorXd logit_grad = theta.cwiseProduct(grad.array().matrix() -
                                                          Eigen::VectorXd::Constant(k, theta.dot(grad)));
    if (logit_grad.norm() < pconfig.tol) break;
    bool accepted = false;
    for (int halving = 0; halving < 50 && !accepted; ++halving, rate *= 0.5) {
      const Eigen::VectorXd trial_logits = logits + rate * logit_grad;
      const Eigen::VectorXd trial = softmax_simplex(trial_logits);
      const double trial_value = objective(mix, trial, alpha) * scale;
      if (std::isfinite(trial_value) && trial_value > value) {
        logits = trial_logits;
        theta = trial;
        value = trial_value;
        accepted = true;
      }
    }
    if (!accepted) break;
    rate *= 4.0;  // undo the final halving, then double
  }
  return theta;
}

double predict_target(const Document& doc, const ModelParams& params,
                      const ModelConfig& config, const PredictConfig& pconfig) {
  const double score = params.eta.dot(map_theta(doc, params, config, pconfig));
  return config.target_type == TargetType::kBinary ? sigmoid(score) : score;
}

std::vector<double> predict_corpus(const Corpus& corpus, const ModelParams& params,
                                   const ModelConfig& config,
                                   const PredictConfig& pconfig) {
  std::vector<double> out;
  out.reserve(corpus.num_docs());
  for (const auto& doc : corpus.documents) {
    out.push_back(predict_target(doc, params, config, pconfig));
  }
  return out;
}

}  // namespace pfslda
