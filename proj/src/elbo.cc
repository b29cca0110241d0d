#include "pfslda/elbo.h"

#include <cmath>
#include <map>
#include <numbers>
#include <thread>

#include "pfslda/sampling.h"
#include "pfslda/special.h"

namespace pfslda {

ElboBreakdown& ElboBreakdown::operator+=(const ElboBreakdown& other) {
  log_p_theta += other.log_p_theta;
  log_p_z += other.log_p_z;
  log_p_w += other.log_p_w;
  log_p_xi += other.log_p_xi;
  log_p_y += other.log_p_y;
  entropy_theta += other.entropy_theta;
  entropy_z += other.entropy_z;
  entropy_xi += other.entropy_xi;
  total += other.total;
  return *this;
}

double BoundDiagnostic::combined_stderr() const {
  return std::sqrt(prediction.std_error * prediction.std_error +
                   words.std_error * words.std_error + pi.std_error * pi.std_error);
}

TargetTerm target_term(double y, const Eigen::Ref<const Eigen::VectorXd>& gamma,
                       const ModelParams& params, TargetType type) {
  const Eigen::VectorXd& eta = params.eta;
  const double g0 = gamma.sum();
  const Eigen::VectorXd mean = gamma / g0;
  const double a = eta.dot(mean);
  const Eigen::VectorXd eta_sq = eta.array().square();
  const double b = eta_sq.dot(mean);
  const Eigen::VectorXd da = (eta.array() - a) / g0;
  const Eigen::VectorXd db = (eta_sq.array() - b) / g0;
  const double var = (b - a * a) / (g0 + 1.0);  // eta^T Cov[theta] eta

  TargetTerm out;
  if (type == TargetType::kReal) {
    const double delta = params.delta();
    const double quad = var + a * a;  // eta^T E[theta theta^T] eta
    const double resid = y * y - 2.0 * y * a + quad;
    out.value = -0.5 * std::log(2.0 * std::numbers::pi * delta) - resid / (2.0 * delta);
    const Eigen::VectorXd dquad =
        (db - 2.0 * a * da) / (g0 + 1.0) - Eigen::VectorXd::Constant(gamma.size(), var / (g0 + 1.0)) +
        2.0 * a * da;
    out.d_gamma = -(-2.0 * y * da + dquad) / (2.0 * delta);
    const Eigen::MatrixXd outer = expected_theta_outer(gamma);
    out.d_eta = (y * mean - outer * eta) / delta;
    out.d_log_delta = -0.5 + resid / (2.0 * delta);
    return out;
  }

  const double s = 2.0 * y - 1.0;
  const double u = s * a;
  const double sig = sigmoid(u);
  const double w = sig * sigmoid(-u);
  out.value = log_sigmoid(u) - 0.5 * w * var;
  const double coef_a = s * sigmoid(-u) - 0.5 * var * s * w * (1.0 - 2.0 * sig) +
                        w * a / (g0 + 1.0);
  out.d_gamma = coef_a * da - (0.5 * w / (g0 + 1.0)) * db +
                Eigen::VectorXd::Constant(gamma.size(), 0.5 * w * var / (g0 + 1.0));
  out.d_eta = coef_a * mean - (w / (g0 + 1.0)) * mean.cwiseProduct(eta);
  out.d_log_delta = 0.0;
  return out;
}

namespace {

// Quantities shared by every document of one evaluation.
struct Context {
  const ModelParams& params;
  const ModelConfig& config;
  Eigen::MatrixXd log_beta;
  Eigen::VectorXd log_pi;
  Eigen::VectorXd varphi;
  Eigen::VectorXd one_minus_varphi;
  Eigen::VectorXd switch_entropy;  // per-token Bernoulli entropy, 0 log 0 = 0
  Eigen::VectorXd alpha;
  double log_norm_alpha = 0.0;  // lgamma(sum alpha) - sum lgamma(alpha)
  double log_p = 0.0;
  double log_1mp = 0.0;

  Context(const ModelParams& params_in, const VariationalState& state,
          const ModelConfig& config_in)
      : params(params_in), config(config_in) {
    log_beta = params.log_beta();
    alpha = config.alpha_vector();
    log_norm_alpha = std::lgamma(alpha.sum());
    for (Eigen::Index k = 0; k < alpha.size(); ++k) log_norm_alpha -= std::lgamma(alpha[k]);
    const Eigen::Index v = params.vocab_size();
    if (config.channel_enabled) {
      log_pi = params.log_pi();
      varphi.resize(v);
      one_minus_varphi.resize(v);
      switch_entropy.resize(v);
      for (Eigen::Index j = 0; j < v; ++j) {
        const double x = state.varphi_logits[j];
        varphi[j] = sigmoid(x);
        one_minus_varphi[j] = sigmoid(-x);
        // H = -phi log phi - (1-phi) log(1-phi), with log phi = log_sigmoid(x).
        double h = 0.0;
        if (varphi[j] > 0.0) h -= varphi[j] * log_sigmoid(x);
        if (one_minus_varphi[j] > 0.0) h -= one_minus_varphi[j] * log_sigmoid(-x);
        switch_entropy[j] = h;
      }
      log_p = std::log(params.p);
      log_1mp = std::log1p(-params.p);
    } else {
      varphi = Eigen::VectorXd::Ones(v);
      one_minus_varphi = Eigen::VectorXd::Zero(v);
    }
  }
};

void check_inputs(const Corpus& corpus, std::span<const std::size_t> docs,
                  const ModelParams& params, const VariationalState& state,
                  const ModelConfig& config) {
  if (config.channel_enabled && !(params.p > 0.0 && params.p < 1.0)) {
    throw Error("word inclusion prior p must lie strictly inside (0, 1) when the "
                "switch channel is enabled");
  }
  if (params.vocab_size() != static_cast<int>(corpus.vocab_size())) {
    throw Error("model vocabulary size does not match the corpus");
  }
  for (auto d : docs) {
    if (d >= corpus.num_docs()) throw Error("document " + std::to_string(d) + " not in corpus");
    if (d >= state.num_docs() || static_cast<Eigen::Index>(d) >= state.gamma.rows()) {
      throw Error("document " + std::to_string(d) + " not covered by the variational state");
    }
    if (state.phi[d].rows() != static_cast<Eigen::Index>(corpus.documents[d].entries.size())) {
      throw Error("variational state for document " + std::to_string(d) +
                  " does not match its word list");
    }
  }
}

struct Accumulator {
  ElboBreakdown elbo;
  bool with_gradients = false;
  Eigen::MatrixXd beta_stats;  // sum c varphi_v phi_vk
  Eigen::VectorXd pi_stats;    // sum c (1 - varphi_v)
  Eigen::VectorXd varphi_stats;
  Eigen::VectorXd d_eta;
  double d_log_delta = 0.0;

  void init(int k, int v, bool gradients) {
    with_gradients = gradients;
    if (!gradients) return;
    beta_stats = Eigen::MatrixXd::Zero(k, v);
    pi_stats = Eigen::VectorXd::Zero(v);
    varphi_stats = Eigen::VectorXd::Zero(v);
    d_eta = Eigen::VectorXd::Zero(k);
  }

  void merge(const Accumulator& o) {
    elbo += o.elbo;
    if (!with_gradients) return;
    beta_stats += o.beta_stats;
    pi_stats += o.pi_stats;
    varphi_stats += o.varphi_stats;
    d_eta += o.d_eta;
    d_log_delta += o.d_log_delta;
  }
};

// Adds the contribution of document d; writes per-document gradient rows when
// requested.
void process_document(const Context& ctx, const Corpus& corpus, std::size_t d,
                      const VariationalState& state, Accumulator* acc,
                      Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> d_log_gamma,
                      Eigen::MatrixXd* d_phi_logits) {
  const Document& doc = corpus.documents[d];
  const Eigen::VectorXd gamma = state.gamma.row(static_cast<Eigen::Index>(d)).transpose();
  const Eigen::MatrixXd& phi = state.phi[d];
  const Eigen::Index k = gamma.size();
  const Eigen::VectorXd elog_theta = expected_log_theta(gamma);
  const bool channel = ctx.config.channel_enabled;

  ElboBreakdown e;
  e.log_p_theta = ctx.log_norm_alpha + (ctx.alpha.array() - 1.0).matrix().dot(elog_theta);

  double log_norm_gamma = std::lgamma(gamma.sum());
  for (Eigen::Index i = 0; i < k; ++i) log_norm_gamma -= std::lgamma(gamma[i]);
  e.entropy_theta = -(log_norm_gamma + (gamma.array() - 1.0).matrix().dot(elog_theta));

  Eigen::VectorXd topic_counts = Eigen::VectorXd::Zero(k);
  if (d_phi_logits != nullptr) d_phi_logits->resize(phi.rows(), k);

  for (std::size_t n = 0; n < doc.entries.size(); ++n) {
    const int v = doc.entries[n].word;
    const double c = doc.entries[n].count;
    const auto row = phi.row(static_cast<Eigen::Index>(n));
    const double word_loglik = row.dot(ctx.log_beta.col(v));
    topic_counts += c * row.transpose();

    double row_entropy = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (row[i] > 0.0) row_entropy -= row[i] * std::log(row[i]);
    }
    e.entropy_z += c * row_entropy;

    if (channel) {
      const double on = ctx.varphi[v];
      const double off = ctx.one_minus_varphi[v];
      e.log_p_w += c * (on * word_loglik + off * ctx.log_pi[v]);
      e.log_p_xi += c * (on * ctx.log_p + off * ctx.log_1mp);
      e.entropy_xi += c * ctx.switch_entropy[v];
    } else {
      e.log_p_w += c * word_loglik;
    }

    if (acc->with_gradients) {
      acc->beta_stats.col(v) += (c * ctx.varphi[v]) * row.transpose();
      if (channel) {
        acc->pi_stats[v] += c * ctx.one_minus_varphi[v];
        acc->varphi_stats[v] += c * (word_loglik - ctx.log_pi[v] + ctx.log_p -
                                     ctx.log_1mp - state.varphi_logits[v]);
      }
    }
    if (d_phi_logits != nullptr) {
      Eigen::VectorXd g(k);
      for (Eigen::Index i = 0; i < k; ++i) {
        const double log_r = row[i] > 0.0 ? std::log(row[i]) : -745.0;
        g[i] = c * (elog_theta[i] + ctx.varphi[v] * ctx.log_beta(i, v) - log_r);
      }
      const double mean_g = row.dot(g);
      d_phi_logits->row(static_cast<Eigen::Index>(n)) =
          (row.transpose().array() * (g.array() - mean_g)).transpose();
    }
  }
  e.log_p_z = topic_counts.dot(elog_theta);

  const TargetTerm target = target_term(corpus.targets[d], gamma, ctx.params,
                                        ctx.config.target_type);
  e.log_p_y = target.value;
  e.total = e.model_terms() + e.entropy_terms();
  acc->elbo += e;

  if (acc->with_gradients) {
    const Eigen::VectorXd resid = ctx.alpha + topic_counts - gamma;
    const double tri_total = trigamma(gamma.sum());
    const double resid_sum = resid.sum();
    for (Eigen::Index i = 0; i < k; ++i) {
      const double dg = trigamma(gamma[i]) * resid[i] - tri_total * resid_sum + target.d_gamma[i];
      d_log_gamma[i] = gamma[i] * dg;
    }
    acc->d_eta += target.d_eta;
    acc->d_log_delta += target.d_log_delta;
  }
}

// Splits docs into contiguous chunks, runs them on `workers` threads and
// merges the partial accumulators in chunk order.
template <typename Fn>
void run_chunks(std::size_t count, int workers, Fn&& fn) {
  const std::size_t n_workers =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), count));
  if (n_workers <= 1) {
    fn(0, 0, count);
    return;
  }
  std::vector<std::thread> threads;
  const std::size_t chunk = (count + n_workers - 1) / n_workers;
  for (std::size_t w = 0; w < n_workers; ++w) {
    const std::size_t begin = std::min(count, w * chunk);
    const std::size_t end = std::min(count, begin + chunk);
    threads.emplace_back([&fn, w, begin, end] { fn(w, begin, end); });
  }
  for (auto& t : threads) t.join();
}

std::size_t worker_count(std::size_t count, int workers) {
  return std::max<std::size_t>(
      1, std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), count));
}

}  // namespace

Eigen::MatrixXd optimal_phi(const Document& doc, const ModelParams& params,
                            const Eigen::Ref<const Eigen::VectorXd>& gamma,
                            const Eigen::Ref<const Eigen::VectorXd>& varphi,
                            const ModelConfig& config) {
  const Eigen::VectorXd elog_theta = expected_log_theta(gamma);
  const Eigen::MatrixXd log_beta = params.log_beta();
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(doc.entries.size()), gamma.size());
  for (std::size_t n = 0; n < doc.entries.size(); ++n) {
    const int v = doc.entries[n].word;
    const double weight = config.channel_enabled ? varphi[v] : 1.0;
    const Eigen::VectorXd logits = weight * log_beta.col(v) + elog_theta;
    phi.row(static_cast<Eigen::Index>(n)) = softmax_simplex(logits).transpose();
  }
  return phi;
}

void refresh_phi(const Corpus& corpus, std::span<const std::size_t> docs,
                 const ModelParams& params, VariationalState* state,
                 const ModelConfig& config) {
  const Eigen::MatrixXd log_beta = params.log_beta();
  const Eigen::VectorXd varphi =
      config.channel_enabled ? state->varphi() : Eigen::VectorXd::Ones(params.vocab_size());
  const Eigen::Index k = params.num_topics();
  for (auto d : docs) {
    const Document& doc = corpus.documents.at(d);
    const Eigen::VectorXd elog_theta =
        expected_log_theta(state->gamma.row(static_cast<Eigen::Index>(d)).transpose());
    Eigen::MatrixXd& phi = state->phi.at(d);
    phi.resize(static_cast<Eigen::Index>(doc.entries.size()), k);
    for (std::size_t n = 0; n < doc.entries.size(); ++n) {
      const int v = doc.entries[n].word;
      const Eigen::VectorXd logits = varphi[v] * log_beta.col(v) + elog_theta;
      phi.row(static_cast<Eigen::Index>(n)) = softmax_simplex(logits).transpose();
    }
  }
}

ElboBreakdown compute_elbo(const Corpus& corpus, std::span<const std::size_t> docs,
                           const ModelParams& params, const VariationalState& state,
                           const ModelConfig& config, int workers) {
  check_inputs(corpus, docs, params, state, config);
  const Context ctx(params, state, config);
  const std::size_t n_workers = worker_count(docs.size(), workers);
  std::vector<Accumulator> partial(n_workers);
  run_chunks(docs.size(), workers, [&](std::size_t w, std::size_t begin, std::size_t end) {
    Eigen::RowVectorXd unused(params.num_topics());
    partial[w].init(params.num_topics(), params.vocab_size(), false);
    for (std::size_t i = begin; i < end; ++i) {
      process_document(ctx, corpus, docs[i], state, &partial[w], unused, nullptr);
    }
  });
  ElboBreakdown out;
  for (const auto& p : partial) out += p.elbo;
  return out;
}

ElboBreakdown compute_elbo(const Corpus& corpus, const ModelParams& params,
                           const VariationalState& state, const ModelConfig& config,
                           int workers) {
  std::vector<std::size_t> all(corpus.num_docs());
  for (std::size_t d = 0; d < all.size(); ++d) all[d] = d;
  return compute_elbo(corpus, all, params, state, config, workers);
}

GradientBundle compute_gradients(const Corpus& corpus,
                                 std::span<const std::size_t> docs,
                                 const ModelParams& params,
                                 const VariationalState& state,
                                 const ModelConfig& config, int workers) {
  check_inputs(corpus, docs, params, state, config);
  const Context ctx(params, state, config);
  const int k = params.num_topics();
  const int v = params.vocab_size();
  const bool want_phi = config.phi_mode == PhiMode::kSgd;

  GradientBundle out;
  out.docs.assign(docs.begin(), docs.end());
  out.d_log_gamma = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(docs.size()), k);
  if (want_phi) out.d_phi_logits.resize(docs.size());

  const std::size_t n_workers = worker_count(docs.size(), workers);
  std::vector<Accumulator> partial(n_workers);
  run_chunks(docs.size(), workers, [&](std::size_t w, std::size_t begin, std::size_t end) {
    partial[w].init(k, v, true);
    for (std::size_t i = begin; i < end; ++i) {
      process_document(ctx, corpus, docs[i], state, &partial[w],
                       out.d_log_gamma.row(static_cast<Eigen::Index>(i)),
                       want_phi ? &out.d_phi_logits[i] : nullptr);
    }
  });
  Accumulator acc;
  acc.init(k, v, true);
  for (const auto& p : partial) acc.merge(p);

  const Eigen::MatrixXd beta = params.beta();
  out.d_beta_logits = acc.beta_stats;
  for (int i = 0; i < k; ++i) {
    out.d_beta_logits.row(i) -= acc.beta_stats.row(i).sum() * beta.row(i);
  }
  if (config.channel_enabled) {
    out.d_pi_logits = acc.pi_stats - acc.pi_stats.sum() * params.pi();
    out.d_varphi_logits = acc.varphi_stats.cwiseProduct(ctx.varphi.cwiseProduct(ctx.one_minus_varphi));
  } else {
    out.d_pi_logits = Eigen::VectorXd::Zero(v);
    out.d_varphi_logits = Eigen::VectorXd::Zero(v);
  }
  out.d_eta = acc.d_eta;
  out.d_log_delta = config.target_type == TargetType::kReal ? acc.d_log_delta : 0.0;
  return out;
}

namespace {

double log_target_density(double y, double score, const ModelParams& params,
                          TargetType type) {
  if (type == TargetType::kReal) {
    const double delta = params.delta();
    return -0.5 * std::log(2.0 * std::numbers::pi * delta) -
           (y - score) * (y - score) / (2.0 * delta);
  }
  return log_sigmoid((2.0 * y - 1.0) * score);
}

double log_mean_exp(const std::vector<double>& x) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s / static_cast<double>(x.size()));
}

void mean_and_stderr(const std::vector<double>& x, double* mean, double* se) {
  const double n = static_cast<double>(x.size());
  double m = 0.0;
  for (double v : x) m += v;
  m /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  *mean = m;
  *se = x.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
}

}  // namespace

BoundDiagnostic likelihood_bound_diagnostic(const Corpus& corpus,
                                            const ModelParams& params,
                                            const ModelConfig& config,
                                            int mc_samples, std::uint64_t seed) {
  if (!config.channel_enabled) throw Error("bound diagnostic requires the switch channel");
  if (!(params.p > 0.0 && params.p < 1.0)) throw Error("bound diagnostic requires 0 < p < 1");
  if (mc_samples < 2) throw Error("bound diagnostic needs at least 2 samples");

  Rng rng(seed);
  const Eigen::MatrixXd beta = params.beta();
  const Eigen::VectorXd pi = params.pi();
  const Eigen::VectorXd alpha = config.alpha_vector();
  const double p = params.p;
  const auto samples = static_cast<std::size_t>(mc_samples);
  std::bernoulli_distribution coin(p);

  BoundDiagnostic out;
  double var_pred = 0.0;
  double var_words = 0.0;
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    const Document& doc = corpus.documents[d];
    const double y = corpus.targets[d];

    for (const auto& e : doc.entries) {
      if (pi[e.word] <= 0.0) {
        out.pi.minus_infinity = true;
      } else {
        out.pi.value += (1.0 - p) * e.count * std::log(pi[e.word]);
      }
    }

    // Shared pool of prior draws: per-draw log (beta theta)_v for each
    // distinct word and log p(y | theta).
    const Eigen::Index n_words = static_cast<Eigen::Index>(doc.entries.size());
    Eigen::MatrixXd log_mix(static_cast<Eigen::Index>(samples), n_words);
    std::vector<double> log_y(samples);
    std::vector<double> word_draws(samples);
    for (std::size_t s = 0; s < samples; ++s) {
      const Eigen::VectorXd theta = sample_dirichlet(alpha, rng);
      const Eigen::VectorXd mix = beta.transpose() * theta;
      double total = 0.0;
      for (Eigen::Index n = 0; n < n_words; ++n) {
        const auto& e = doc.entries[static_cast<std::size_t>(n)];
        log_mix(static_cast<Eigen::Index>(s), n) = std::log(mix[e.word]);
        total += e.count * log_mix(static_cast<Eigen::Index>(s), n);
      }
      word_draws[s] = p * total;
      log_y[s] = log_target_density(y, params.eta.dot(theta), params, config.target_type);
    }
    double m = 0.0;
    double se = 0.0;
    mean_and_stderr(word_draws, &m, &se);
    out.words.value += m;
    var_words += se * se;

    // Outer draws of the switches; p(y | W_1) is the ratio of pool averages,
    // cached per distinct switch configuration.
    std::vector<double> pred_draws(samples);
    std::vector<double> joint(samples);
    std::vector<double> marginal(samples);
    std::map<std::vector<int>, double> cache;
    std::vector<int> key(static_cast<std::size_t>(n_words));
    Eigen::VectorXd on_counts(n_words);
    for (std::size_t t = 0; t < samples; ++t) {
      for (Eigen::Index n = 0; n < n_words; ++n) {
        int on = 0;
        for (int c = 0; c < doc.entries[static_cast<std::size_t>(n)].count; ++c) on += coin(rng);
        key[static_cast<std::size_t>(n)] = on;
      }
      auto it = cache.find(key);
      if (it == cache.end()) {
        for (Eigen::Index n = 0; n < n_words; ++n) on_counts[n] = key[static_cast<std::size_t>(n)];
        for (std::size_t s = 0; s < samples; ++s) {
          const double lw = log_mix.row(static_cast<Eigen::Index>(s)).dot(on_counts);
          joint[s] = log_y[s] + lw;
          marginal[s] = lw;
        }
        it = cache.emplace(key, log_mean_exp(joint) - log_mean_exp(marginal)).first;
      }
      pred_draws[t] = it->second;
    }
    mean_and_stderr(pred_draws, &m, &se);
    out.prediction.value += m;
    var_pred += se * se;
  }
  out.words.std_error = std::sqrt(var_words);
  out.prediction.std_error = std::sqrt(var_pred);
  if (out.pi.minus_infinity) out.pi.value = -std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace pfslda
