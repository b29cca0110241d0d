#include "pfslda/trainers.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "pfslda/adam.h"
#include "pfslda/elbo.h"
#include "pfslda/evaluation.h"
#include "pfslda/prediction.h"
#include "pfslda/sampling.h"
#include "pfslda/special.h"
#include "pfslda/text_io.h"

namespace pfslda {

std::string to_string(TrainerKind kind) {
  return kind == TrainerKind::kSgd ? "sgd" : "ca";
}

TrainerKind parse_trainer_kind(const std::string& name) {
  if (name == "sgd") return TrainerKind::kSgd;
  if (name == "ca") return TrainerKind::kCa;
  throw Error("unknown trainer '" + name + "' (expected sgd or ca)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw Error("epochs must be >= 1");
  if (batch_size < 1) throw Error("batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
  if (ca_sweeps < 1) throw Error("ca_sweeps must be >= 1");
  if (restarts < 1) throw Error("restarts must be >= 1");
  if (!(convergence_tol >= 0.0)) throw Error("convergence tolerance must be >= 0");
  if (local_steps < 1) throw Error("local_steps must be >= 1");
  if (log_every < 1) throw Error("log_every must be >= 1");
  if (patience < 1) throw Error("patience must be >= 1");
  if (gamma_steps < 0 || !(gamma_step_size > 0.0)) throw Error("invalid gamma step settings");
}

void TrainTrace::add(long step, double elbo, double val_metric) {
  if (!records.empty() && step <= records.back().step) {
    throw Error("trace steps must be strictly increasing");
  }
  records.push_back({step, elbo, val_metric});
}

void TrainTrace::write_csv(const std::filesystem::path& path) const {
  auto out = open_output(path);
  out << "step,elbo,val_metric\n";
  for (const auto& r : records) {
    out << r.step << ',' << format_double(r.elbo) << ',';
    if (!std::isnan(r.val_metric)) out << format_double(r.val_metric);
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

double validation_metric(const Corpus& val, const ModelParams& params,
                         const ModelConfig& config) {
  const std::vector<double> scores = predict_corpus(val, params, config);
  return config.target_type == TargetType::kReal ? rmse(scores, val.targets)
                                                 : auc(scores, val.targets);
}

namespace {

void check_train_inputs(const Corpus& train, const ModelConfig& model_config,
                        const TrainConfig& train_config) {
  model_config.validate();
  train_config.validate();
  if (train.num_docs() == 0) throw Error("training corpus is empty");
  train.validate();
  if (train.target_type != model_config.target_type) {
    throw Error("corpus target type does not match the model configuration");
  }
  if (model_config.channel_enabled && !(model_config.p > 0.0 && model_config.p < 1.0)) {
    throw Error("word inclusion prior p must lie strictly inside (0, 1) when the switch "
                "channel is enabled");
  }
}

std::vector<std::size_t> all_docs(std::size_t m) {
  std::vector<std::size_t> out(m);
  std::iota(out.begin(), out.end(), 0);
  return out;
}

double relative_change(double current, double previous) {
  return (current - previous) / std::max(std::abs(previous), 1e-300);
}

// Metric where larger is better.
double score_for_stopping(double metric, TargetType type) {
  return type == TargetType::kReal ? -metric : metric;
}

// Restart r shifts both seeds by r. The run with the highest final ELBO wins;
// ties go to the earlier run.
template <typename Run>
TrainResult best_of_restarts(const Corpus& train, const ModelConfig& model_config,
                             const TrainConfig& train_config, Run run) {
  TrainResult best;
  double best_elbo = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < train_config.restarts; ++r) {
    ModelConfig mc = model_config;
    TrainConfig tc = train_config;
    mc.seed += static_cast<std::uint64_t>(r);
    tc.seed += static_cast<std::uint64_t>(r);
    TrainResult result = run(mc, tc);
    result.elbo = compute_elbo(train, result.params, result.state, mc, tc.workers).total;
    if (r == 0 || result.elbo > best_elbo) {
      best_elbo = result.elbo;
      best = std::move(result);
    }
  }
  return best;
}

TrainResult sgd_run(const Corpus& train, const Corpus* val, const ModelConfig& model_config,
                    const TrainConfig& train_config) {
  const std::size_t m = train.num_docs();
  const int k = model_config.num_topics;
  const int v = static_cast<int>(train.vocab_size());
  const bool channel = model_config.channel_enabled;
  const bool sgd_phi = model_config.phi_mode == PhiMode::kSgd;
  const bool real = model_config.target_type == TargetType::kReal;

  TrainResult result;
  auto [params, state] = init_params(model_config, train.documents, v, model_config.seed);

  const AdamOptions options{train_config.learning_rate, train_config.adam_beta1,
                            train_config.adam_beta2, train_config.adam_eps};
  Adam adam_beta(static_cast<Eigen::Index>(k) * v, options);
  Adam adam_pi(v, options);
  Adam adam_eta(k, options);
  Adam adam_delta(1, options);
  Adam adam_varphi(v, options);
  // Per-document block: log gamma, followed by the flattened phi logits in
  // sgd phi mode.
  std::vector<Adam> adam_local;
  std::vector<Eigen::VectorXd> local(m);
  adam_local.reserve(m);
  for (std::size_t d = 0; d < m; ++d) {
    const Eigen::Index n_words = static_cast<Eigen::Index>(train.documents[d].entries.size());
    const Eigen::Index size = k + (sgd_phi ? n_words * k : 0);
    adam_local.emplace_back(size, options);
    local[d] = Eigen::VectorXd::Zero(size);
    local[d].head(k) = state.gamma.row(static_cast<Eigen::Index>(d)).transpose().array().log();
    if (sgd_phi) {
      for (Eigen::Index n = 0; n < n_words; ++n) {
        local[d].segment(k + n * k, k) = state.phi[d].row(n).transpose().array().log();
      }
    }
  }

  const std::vector<std::size_t> everything = all_docs(m);
  if (!sgd_phi) refresh_phi(train, everything, params, &state, model_config);
  double previous = compute_elbo(train, params, state, model_config, train_config.workers).total;

  Rng rng(train_config.seed);
  std::vector<std::size_t> order = everything;
  const auto batch = static_cast<std::size_t>(train_config.batch_size);
  long step = 0;

  double best_score = -std::numeric_limits<double>::infinity();
  int since_best = 0;
  ModelParams best_params;
  VariationalState best_state;

  auto step_local = [&](std::span<const std::size_t> docs, const GradientBundle& g) {
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const std::size_t d = docs[i];
      Eigen::VectorXd grad(local[d].size());
      grad.head(k) = g.d_log_gamma.row(static_cast<Eigen::Index>(i)).transpose();
      if (sgd_phi) {
        const Eigen::MatrixXd& dphi = g.d_phi_logits[i];
        for (Eigen::Index n = 0; n < dphi.rows(); ++n) {
          grad.segment(k + n * k, k) = dphi.row(n).transpose();
        }
      }
      adam_local[d].step(local[d], grad);
      state.gamma.row(static_cast<Eigen::Index>(d)) = local[d].head(k).array().exp().transpose();
      if (sgd_phi) {
        for (Eigen::Index n = 0; n < state.phi[d].rows(); ++n) {
          state.phi[d].row(n) = softmax_simplex(local[d].segment(k + n * k, k)).transpose();
        }
      }
    }
  };

  for (int epoch = 1; epoch <= train_config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < m; begin += batch) {
      const std::size_t end = std::min(m, begin + batch);
      const std::span<const std::size_t> docs(order.data() + begin, end - begin);
      for (int inner = 1; inner < train_config.local_steps; ++inner) {
        if (!sgd_phi) refresh_phi(train, docs, params, &state, model_config);
        step_local(docs, compute_gradients(train, docs, params, state, model_config,
                                           train_config.workers));
      }
      if (!sgd_phi) refresh_phi(train, docs, params, &state, model_config);
      const GradientBundle g =
          compute_gradients(train, docs, params, state, model_config, train_config.workers);
      const double scale = static_cast<double>(m) / static_cast<double>(docs.size());

      Eigen::Map<Eigen::VectorXd> beta_flat(params.beta_logits.data(), params.beta_logits.size());
      const Eigen::VectorXd d_beta =
          scale * Eigen::Map<const Eigen::VectorXd>(g.d_beta_logits.data(), g.d_beta_logits.size());
      adam_beta.step(beta_flat, d_beta);
      adam_eta.step(params.eta, scale * g.d_eta);
      if (real) {
        Eigen::VectorXd log_delta(1);
        log_delta[0] = params.log_delta;
        adam_delta.step(log_delta, Eigen::VectorXd::Constant(1, scale * g.d_log_delta));
        params.log_delta = log_delta[0];
      }
      if (channel) {
        adam_pi.step(params.pi_logits, scale * g.d_pi_logits);
        adam_varphi.step(state.varphi_logits, scale * g.d_varphi_logits);
      }

      step_local(docs, g);
      ++step;
    }

    if (!sgd_phi) refresh_phi(train, everything, params, &state, model_config);
    const double elbo = compute_elbo(train, params, state, model_config, train_config.workers).total;
    if (!std::isfinite(elbo)) throw Error("ELBO became non-finite during training");
    result.epochs_run = epoch;
    const bool converged = train_config.convergence_tol > 0.0 &&
                           std::abs(relative_change(elbo, previous)) < train_config.convergence_tol;
    previous = elbo;
    const bool last = converged || epoch == train_config.epochs;

    if (epoch % train_config.log_every == 0 || last) {
      double metric = std::numeric_limits<double>::quiet_NaN();
      if (val != nullptr) metric = validation_metric(*val, params, model_config);
      result.trace.add(step, elbo, metric);
      if (train_config.early_stopping) {
        const double score = score_for_stopping(metric, model_config.target_type);
        if (score > best_score) {
          best_score = score;
          since_best = 0;
          best_params = params;
          best_state = state;
        } else if (++since_best >= train_config.patience) {
          params = best_params;
          state = best_state;
          break;
        }
      }
    }
    if (converged) {
      result.converged = true;
      break;
    }
  }
  result.params = std::move(params);
  result.state = std::move(state);
  return result;
}

}  // namespace

TrainResult train_sgd(const Corpus& train, const Corpus* val,
                      const ModelConfig& model_config, const TrainConfig& train_config) {
  check_train_inputs(train, model_config, train_config);
  if (train_config.early_stopping && val == nullptr) {
    throw Error("early stopping needs a validation corpus");
  }
  return best_of_restarts(train, model_config, train_config, [&](const ModelConfig& mc, const TrainConfig& tc) {
    return sgd_run(train, val, mc, tc);
  });
}

void ca_update_varphi(const Corpus& corpus, const ModelParams& params,
                      VariationalState* state, const ModelConfig& config) {
  if (!config.channel_enabled) throw Error("varphi update needs the switch channel");
  if (!(params.p > 0.0 && params.p < 1.0)) throw Error("varphi update needs 0 < p < 1");
  const Eigen::MatrixXd log_beta = params.log_beta();
  const Eigen::VectorXd log_pi = params.log_pi();
  const double logit_p = std::log(params.p) - std::log1p(-params.p);
  const Eigen::Index v = params.vocab_size();
  Eigen::VectorXd omega = Eigen::VectorXd::Zero(v);
  Eigen::VectorXd weight = Eigen::VectorXd::Zero(v);
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    const auto& doc = corpus.documents[d];
    for (std::size_t n = 0; n < doc.entries.size(); ++n) {
      const int w = doc.entries[n].word;
      const double c = doc.entries[n].count;
      const double evidence = state->phi[d].row(static_cast<Eigen::Index>(n)).dot(log_beta.col(w));
      omega[w] += c * (evidence - log_pi[w] + logit_p);
      weight[w] += c;
    }
  }
  for (Eigen::Index j = 0; j < v; ++j) {
    if (weight[j] > 0.0) state->varphi_logits[j] = omega[j] / weight[j];
  }
}

void ca_update_phi(const Corpus& corpus, std::size_t doc, const ModelParams& params,
                   VariationalState* state, const ModelConfig& config) {
  const std::size_t one[] = {doc};
  refresh_phi(corpus, one, params, state, config);
}

int ca_update_gamma(const Corpus& corpus, std::size_t doc, const ModelParams& params,
                    VariationalState* state, const ModelConfig& config, int steps,
                    double step_size) {
  if (!(step_size > 0.0)) throw Error("gamma step size must be positive");
  ModelConfig local_config = config;
  local_config.phi_mode = PhiMode::kClosedForm;
  const std::size_t one[] = {doc};
  const auto row = static_cast<Eigen::Index>(doc);
  double current = compute_elbo(corpus, one, params, *state, local_config).total;
  double rate = step_size;
  int accepted = 0;
  for (int s = 0; s < steps; ++s) {
    const GradientBundle g = compute_gradients(corpus, one, params, *state, local_config);
    const Eigen::VectorXd grad = g.d_log_gamma.row(0).transpose();
    if (grad.allFinite() && grad.lpNorm<Eigen::Infinity>() < 1e-12) break;
    const Eigen::VectorXd start = state->gamma.row(row).transpose();
    bool moved = false;
    int nonfinite = 0;
    for (int attempt = 0; attempt < 40; ++attempt) {
      if (!grad.allFinite()) break;
      const Eigen::VectorXd trial = (start.array().log() + rate * grad.array()).exp();
      double value = -std::numeric_limits<double>::infinity();
      if (trial.allFinite() && (trial.array() > 0.0).all()) {
        state->gamma.row(row) = trial.transpose();
        value = compute_elbo(corpus, one, params, *state, local_config).total;
      }
      if (!std::isfinite(value)) {
        state->gamma.row(row) = start.transpose();
        rate *= 0.5;
        if (++nonfinite >= 10) break;
        continue;
      }
      if (value >= current) {
        current = value;
        moved = true;
        break;
      }
      state->gamma.row(row) = start.transpose();
      rate *= 0.5;
    }
    if (!moved) break;
    ++accepted;
    rate *= 2.0;
  }
  return accepted;
}

void ca_update_pi(const Corpus& corpus, const VariationalState& state, ModelParams* params,
                  const ModelConfig& config) {
  if (!config.channel_enabled) throw Error("pi update needs the switch channel");
  const Eigen::Index v = params->vocab_size();
  Eigen::VectorXd weight = Eigen::VectorXd::Zero(v);
  for (const auto& doc : corpus.documents) {
    for (const auto& e : doc.entries) weight[e.word] += e.count * sigmoid(-state.varphi_logits[e.word]);
  }
  const double total = weight.sum();
  if (!(total > 0.0)) {
    throw Error("pi is undefined: every word is fully assigned to the topic channel");
  }
  for (Eigen::Index j = 0; j < v; ++j) {
    params->pi_logits[j] = std::log(std::max(weight[j] / total, 1e-300));
  }
}

void ca_update_beta(const Corpus& corpus, const VariationalState& state, ModelParams* params,
                    const ModelConfig& config) {
  constexpr double kFloor = 1e-12;
  const Eigen::Index k = params->num_topics();
  const Eigen::Index v = params->vocab_size();
  Eigen::MatrixXd stats = Eigen::MatrixXd::Zero(k, v);
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    const auto& doc = corpus.documents[d];
    for (std::size_t n = 0; n < doc.entries.size(); ++n) {
      const int w = doc.entries[n].word;
      const double on = config.channel_enabled ? sigmoid(state.varphi_logits[w]) : 1.0;
      stats.col(w) += (doc.entries[n].count * on) * state.phi[d].row(static_cast<Eigen::Index>(n)).transpose();
    }
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    const double total = stats.row(i).sum();
    if (!(total > 0.0)) continue;
    Eigen::RowVectorXd row = (stats.row(i) / total).cwiseMax(kFloor);
    row /= row.sum();
    params->beta_logits.row(i) = row.array().log();
  }
}

void ca_update_eta_delta(const Corpus& corpus, const VariationalState& state,
                         ModelParams* params, const ModelConfig& config) {
  if (config.target_type != TargetType::kReal) {
    throw Error("closed-form eta/delta updates need real targets; use the sgd trainer");
  }
  const Eigen::Index k = params->num_topics();
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
  std::vector<Eigen::VectorXd> means(corpus.num_docs());
  std::vector<Eigen::MatrixXd> outers(corpus.num_docs());
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    const Eigen::VectorXd gamma = state.gamma.row(static_cast<Eigen::Index>(d)).transpose();
    means[d] = gamma / gamma.sum();
    outers[d] = expected_theta_outer(gamma);
    second += outers[d];
    rhs += corpus.targets[d] * means[d];
  }
  second.diagonal().array() += 1e-6;
  params->eta = second.ldlt().solve(rhs);
  double resid = 0.0;
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    const double y = corpus.targets[d];
    resid += y * y - 2.0 * y * params->eta.dot(means[d]) + params->eta.dot(outers[d] * params->eta);
  }
  const double delta = std::max(resid / static_cast<double>(corpus.num_docs()), 1e-6);
  params->log_delta = std::log(delta);
}

namespace {

TrainResult ca_run(const Corpus& train, const ModelConfig& model_config,
                   const TrainConfig& train_config) {
  const std::size_t m = train.num_docs();
  const bool channel = model_config.channel_enabled;
  auto [params, state] =
      init_params(model_config, train.documents, static_cast<int>(train.vocab_size()),
                  model_config.seed);

  TrainResult result;
  double previous = compute_elbo(train, params, state, model_config, train_config.workers).total;
  for (int sweep = 1; sweep <= train_config.ca_sweeps; ++sweep) {
    for (std::size_t d = 0; d < m; ++d) {
      ca_update_phi(train, d, params, &state, model_config);
      ca_update_gamma(train, d, params, &state, model_config, train_config.gamma_steps,
                      train_config.gamma_step_size);
    }
    if (channel) {
      ca_update_varphi(train, params, &state, model_config);
      ca_update_pi(train, state, &params, model_config);
    }
    ca_update_beta(train, state, &params, model_config);
    ca_update_eta_delta(train, state, &params, model_config);

    const double elbo = compute_elbo(train, params, state, model_config, train_config.workers).total;
    if (!std::isfinite(elbo)) throw Error("ELBO became non-finite during coordinate ascent");
    result.epochs_run = sweep;
    const bool converged = train_config.convergence_tol > 0.0 &&
                           std::abs(relative_change(elbo, previous)) < train_config.convergence_tol;
    previous = elbo;
    if (sweep % train_config.log_every == 0 || converged || sweep == train_config.ca_sweeps) {
      result.trace.add(sweep, elbo, std::numeric_limits<double>::quiet_NaN());
    }
    if (converged) {
      result.converged = true;
      break;
    }
  }
  result.params = std::move(params);
  result.state = std::move(state);
  return result;
}

}  // namespace

TrainResult train_coordinate_ascent(const Corpus& train, const ModelConfig& model_config,
                                    const TrainConfig& train_config) {
  check_train_inputs(train, model_config, train_config);
  if (model_config.target_type != TargetType::kReal) {
    throw Error("coordinate ascent supports real targets only; use the sgd trainer");
  }
  return best_of_restarts(train, model_config, train_config, [&](const ModelConfig& mc, const TrainConfig& tc) {
    return ca_run(train, mc, tc);
  });
}

TrainResult train(const Corpus& train_corpus, const Corpus* val,
                  const ModelConfig& model_config, const TrainConfig& train_config) {
  if (train_config.trainer == TrainerKind::kCa) {
    return train_coordinate_ascent(train_corpus, model_config, train_config);
  }
  return train_sgd(train_corpus, val, model_config, train_config);
}

}  // namespace pfslda
