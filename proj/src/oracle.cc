#include "pfslda/oracle.h"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "pfslda/elbo.h"
#include "pfslda/sampling.h"
#include "pfslda/special.h"
#include "pfslda/trainers.h"

namespace pfslda {

std::string to_string(OracleMethod method) {
  switch (method) {
    case OracleMethod::kExact: return "exact";
    case OracleMethod::kMonteCarlo: return "monte_carlo";
    case OracleMethod::kGrid: return "grid";
  }
  return "unknown";
}

namespace {

double log_target_density(double y, double mean, const ModelParams& params, TargetType type) {
  if (type == TargetType::kBinary) return log_sigmoid((2.0 * y - 1.0) * mean);
  const double delta = params.delta();
  const double r = y - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * delta) - r * r / (2.0 * delta);
}

// log of prod_n [p (beta^T theta)_w + (1-p) pi_w] (+ target factor).
double log_integrand(const Document& doc, double y, const Eigen::VectorXd& theta,
                     const Eigen::MatrixXd& beta, const Eigen::VectorXd& pi,
                     const ModelParams& params, const ModelConfig& config,
                     bool include_target) {
  const double p = config.channel_enabled ? params.p : 1.0;
  double total = 0.0;
  for (const auto& e : doc.entries) {
    const double topic = beta.col(e.word).dot(theta);
    const double mix = p * topic + (p < 1.0 ? (1.0 - p) * pi[e.word] : 0.0);
    total += e.count * std::log(mix);
  }
  if (include_target) {
    total += log_target_density(y, params.eta.dot(theta), params, config.target_type);
  }
  return total;
}

}  // namespace

OracleEstimate mc_marginal_loglik(const Document& doc, double target,
                                  const ModelParams& params,
                                  const ModelConfig& config, int samples,
                                  std::uint64_t seed, bool include_target) {
  if (doc.total > 12) {
    throw Error("mc_marginal_loglik: document has " + std::to_string(doc.total) +
                " tokens; at most 12 are supported");
  }
  if (samples < 10000) throw Error("mc_marginal_loglik: need at least 10^4 samples");
  if (config.channel_enabled && !(params.p > 0.0 && params.p < 1.0)) {
    throw Error("word inclusion prior p must lie in (0, 1) when the channel is enabled");
  }
  const Eigen::MatrixXd beta = params.beta();
  const Eigen::VectorXd pi = params.pi();
  const int k = params.num_topics();

  OracleEstimate out;
  if (k == 1) {
    out.value = log_integrand(doc, target, Eigen::VectorXd::Ones(1), beta, pi, params, config,
                              include_target);
    out.method = OracleMethod::kExact;
    return out;
  }

  Rng rng(seed);
  const Eigen::VectorXd alpha = config.alpha_vector();
  std::vector<double> logs(static_cast<std::size_t>(samples));
  double top = -std::numeric_limits<double>::infinity();
  for (auto& l : logs) {
    l = log_integrand(doc, target, sample_dirichlet(alpha, rng), beta, pi, params, config,
                      include_target);
    top = std::max(top, l);
  }
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double l : logs) {
    const double r = std::exp(l - top);
    sum += r;
    sum_sq += r * r;
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  out.value = top + std::log(mean);
  out.stderr_value = std::sqrt(var / n) / mean;
  out.method = OracleMethod::kMonteCarlo;
  return out;
}

OracleEstimate mc_marginal_loglik(const Corpus& corpus, const ModelParams& params,
                                  const ModelConfig& config, int samples,
                                  std::uint64_t seed, bool include_target) {
  OracleEstimate out;
  double var = 0.0;
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    const OracleEstimate e = mc_marginal_loglik(corpus.documents[d], corpus.targets[d], params,
                                                config, samples, seed + d, include_target);
    out.value += e.value;
    var += e.stderr_value * e.stderr_value;
    if (e.method == OracleMethod::kMonteCarlo) out.method = OracleMethod::kMonteCarlo;
  }
  out.stderr_value = std::sqrt(var);
  return out;
}

Eigen::VectorXd finite_difference_gradient(const Objective& objective,
                                           const Eigen::VectorXd& point, double step) {
  if (!(step > 0.0)) throw Error("finite-difference step must be positive");
  Eigen::VectorXd x = point;
  Eigen::VectorXd grad(point.size());
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    x[i] = point[i] + step;
    const double up = objective(x);
    x[i] = point[i] - step;
    const double down = objective(x);
    x[i] = point[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error("objective is not finite when probing coordinate " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

GridOptimum grid_optimal_coordinate(const Objective& objective,
                                    const Eigen::VectorXd& point, Eigen::Index coordinate,
                                    const std::vector<double>& grid) {
  if (grid.empty()) throw Error("grid must be nonempty");
  if (coordinate < 0 || coordinate >= point.size()) throw Error("grid coordinate out of range");
  Eigen::VectorXd x = point;
  GridOptimum best;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    x[coordinate] = grid[i];
    const double f = objective(x);
    if (i == 0 || f > best.best_objective) {
      best.best_objective = f;
      best.best_value = grid[i];
      best.best_index = i;
    }
  }
  return best;
}

std::vector<double> unit_grid(int n) {
  if (n < 1) throw Error("grid needs at least one interval");
  std::vector<double> out(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) out[static_cast<std::size_t>(i)] = static_cast<double>(i) / n;
  return out;
}

}  // namespace pfslda

namespace pfslda {

TinyInstance random_tiny_instance(std::uint64_t seed, int num_docs, int vocab_size,
                                  int num_topics, int max_tokens, TargetType type) {
  if (num_docs < 1 || vocab_size < 1 || num_topics < 1 || max_tokens < 1) {
    throw Error("tiny instance sizes must be positive");
  }
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> length(1, max_tokens);
  std::uniform_int_distribution<int> word(0, vocab_size - 1);
  std::uniform_real_distribution<double> unit(0.2, 0.8);

  TinyInstance out;
  out.config.num_topics = num_topics;
  out.config.target_type = type;
  out.config.p = unit(rng);
  out.config.seed = seed;

  std::vector<std::string> tokens;
  for (int v = 0; v < vocab_size; ++v) tokens.push_back("t" + std::to_string(v));
  out.corpus.vocab = Vocab(std::move(tokens));
  out.corpus.target_type = type;
  for (int d = 0; d < num_docs; ++d) {
    std::vector<int> counts(static_cast<std::size_t>(vocab_size), 0);
    const int n = length(rng);
    for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(word(rng))];
    std::vector<WordCount> entries;
    for (int v = 0; v < vocab_size; ++v) {
      if (counts[static_cast<std::size_t>(v)] > 0) entries.push_back({v, counts[static_cast<std::size_t>(v)]});
    }
    out.corpus.documents.push_back(Document::from_entries(std::move(entries)));
    out.corpus.targets.push_back(type == TargetType::kReal ? normal(rng)
                                                           : (unit(rng) < 0.5 ? 0.0 : 1.0));
  }

  ModelParams& m = out.params;
  m.p = out.config.p;
  m.beta_logits.resize(num_topics, vocab_size);
  for (Eigen::Index i = 0; i < m.beta_logits.size(); ++i) m.beta_logits.data()[i] = normal(rng);
  m.pi_logits.resize(vocab_size);
  for (auto& x : m.pi_logits) x = normal(rng);
  m.eta.resize(num_topics);
  for (auto& x : m.eta) x = normal(rng);
  m.log_delta = 0.3 * normal(rng);

  VariationalState& s = out.state;
  s.gamma.resize(num_docs, num_topics);
  for (int d = 0; d < num_docs; ++d) {
    for (int k = 0; k < num_topics; ++k) {
      s.gamma(d, k) = (1.0 + static_cast<double>(out.corpus.documents[static_cast<std::size_t>(d)].total) / num_topics) *
                      std::exp(0.5 * normal(rng));
    }
    const auto n_words = static_cast<Eigen::Index>(out.corpus.documents[static_cast<std::size_t>(d)].entries.size());
    Eigen::MatrixXd phi(n_words, num_topics);
    for (Eigen::Index n = 0; n < n_words; ++n) {
      phi.row(n) = sample_dirichlet(Eigen::VectorXd::Ones(num_topics), rng).transpose();
    }
    s.phi.push_back(std::move(phi));
  }
  s.varphi_logits.resize(vocab_size);
  for (auto& x : s.varphi_logits) x = normal(rng);
  return out;
}

Eigen::VectorXd pack_coordinates(const ModelParams& params, const VariationalState& state) {
  const Eigen::Index kv = params.beta_logits.size();
  const Eigen::Index v = params.pi_logits.size();
  const Eigen::Index k = params.eta.size();
  const Eigen::Index g = state.gamma.size();
  Eigen::VectorXd x(kv + v + k + 1 + g + v);
  Eigen::Index at = 0;
  x.segment(at, kv) = Eigen::Map<const Eigen::VectorXd>(params.beta_logits.data(), kv);
  at += kv;
  x.segment(at, v) = params.pi_logits;
  at += v;
  x.segment(at, k) = params.eta;
  at += k;
  x[at++] = params.log_delta;
  x.segment(at, g) = Eigen::Map<const Eigen::VectorXd>(state.gamma.data(), g).array().log();
  at += g;
  x.segment(at, v) = state.varphi_logits;
  return x;
}

void unpack_coordinates(const Eigen::VectorXd& x, ModelParams* params, VariationalState* state) {
  const Eigen::Index kv = params->beta_logits.size();
  const Eigen::Index v = params->pi_logits.size();
  const Eigen::Index k = params->eta.size();
  const Eigen::Index g = state->gamma.size();
  if (x.size() != kv + v + k + 1 + g + v) throw Error("coordinate vector has the wrong length");
  Eigen::Index at = 0;
  Eigen::Map<Eigen::VectorXd>(params->beta_logits.data(), kv) = x.segment(at, kv);
  at += kv;
  params->pi_logits = x.segment(at, v);
  at += v;
  params->eta = x.segment(at, k);
  at += k;
  params->log_delta = x[at++];
  Eigen::Map<Eigen::VectorXd>(state->gamma.data(), g) = x.segment(at, g).array().exp();
  at += g;
  state->varphi_logits = x.segment(at, v);
}

Eigen::VectorXd pack_gradient(const GradientBundle& g) {
  const Eigen::Index kv = g.d_beta_logits.size();
  const Eigen::Index v = g.d_pi_logits.size();
  const Eigen::Index k = g.d_eta.size();
  const Eigen::Index n = g.d_log_gamma.size();
  Eigen::VectorXd x(kv + v + k + 1 + n + v);
  x << Eigen::Map<const Eigen::VectorXd>(g.d_beta_logits.data(), kv), g.d_pi_logits, g.d_eta,
      g.d_log_delta, Eigen::Map<const Eigen::VectorXd>(g.d_log_gamma.data(), n),
      g.d_varphi_logits;
  return x;
}

namespace {

VerifyCheck make_check(std::string name, double value, double reference, bool pass) {
  return {std::move(name), value, reference, pass};
}

}  // namespace

std::vector<VerifyCheck> run_verify_suite(std::uint64_t seed, int samples) {
  std::vector<VerifyCheck> checks;

  // One token, one topic: the bound reduces to an explicit two-term sum over
  // the switch.
  {
    const double eps = 1e-3;
    ModelConfig config;
    config.num_topics = 1;
    config.p = 0.5;
    ModelParams params;
    params.p = 0.5;
    params.beta_logits.resize(1, 2);
    params.beta_logits << std::log(1.0 - eps), std::log(eps);
    params.pi_logits.resize(2);
    params.pi_logits << std::log(eps), std::log(1.0 - eps);
    params.eta = Eigen::VectorXd::Zero(1);
    Corpus corpus;
    corpus.vocab = Vocab({"a", "b"});
    corpus.documents.push_back(Document::from_entries({{0, 1}}));
    corpus.targets.push_back(0.0);
    VariationalState state = init_state(config, corpus.documents, 2);
    state.varphi_logits << 40.0, 0.0;
    const ElboBreakdown e = compute_elbo(corpus, params, state, config);
    const double phi = sigmoid(40.0);
    double reference = 0.0;
    for (int xi = 0; xi <= 1; ++xi) {
      const double q = xi ? phi : 1.0 - phi;
      if (q <= 0.0) continue;
      const double log_word = xi ? std::log(1.0 - eps) : std::log(eps);
      reference += q * (std::log(0.5) + log_word - std::log(q));
    }
    const double value = e.total - e.log_p_y;
    checks.push_back(make_check("elbo_vs_enumeration", value, reference,
                                std::abs(value - reference) < 1e-6));
  }

  // Bound against the Monte-Carlo marginal likelihood.
  {
    TinyInstance t = random_tiny_instance(seed, 3, 6, 2, 6);
    t.state = init_state(t.config, t.corpus.documents, 6);
    const ElboBreakdown e = compute_elbo(t.corpus, t.params, t.state, t.config);
    const OracleEstimate mc = mc_marginal_loglik(t.corpus, t.params, t.config, samples, seed + 1);
    checks.push_back(make_check("elbo_below_marginal_loglik", e.total,
                                mc.value + 3.0 * mc.stderr_value,
                                e.total <= mc.value + 3.0 * mc.stderr_value));
  }

  // Analytic versus central finite-difference gradients.
  {
    TinyInstance t = random_tiny_instance(seed + 2, 3, 8, 2, 6);
    std::vector<std::size_t> docs(t.corpus.num_docs());
    std::iota(docs.begin(), docs.end(), 0);
    const GradientBundle g = compute_gradients(t.corpus, docs, t.params, t.state, t.config);
    const Eigen::VectorXd analytic = pack_gradient(g);

    const Objective f = [&](const Eigen::VectorXd& x) {
      ModelParams p = t.params;
      VariationalState s = t.state;
      unpack_coordinates(x, &p, &s);
      return compute_elbo(t.corpus, p, s, t.config).total;
    };
    const Eigen::VectorXd numeric =
        finite_difference_gradient(f, pack_coordinates(t.params, t.state), 1e-5);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < numeric.size(); ++i) {
      const double scale = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
      if (scale <= 1e-8) continue;
      worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
    }
    checks.push_back(make_check("gradient_max_relative_error", worst, 1e-4, worst < 1e-4));
  }

  // Closed-form switch update versus a grid over varphi_j.
  {
    TinyInstance t = random_tiny_instance(seed + 3, 3, 5, 2, 8);
    VariationalState updated = t.state;
    ca_update_varphi(t.corpus, t.params, &updated, t.config);
    double worst = 0.0;
    const std::vector<double> grid = unit_grid(1000);
    const std::vector<int> df = document_frequency(t.corpus);
    for (int j = 0; j < 5; ++j) {
      if (df[static_cast<std::size_t>(j)] == 0) continue;  // no evidence, left unchanged
      const Objective f = [&](const Eigen::VectorXd& x) {
        VariationalState s = t.state;
        s.varphi_logits[j] = std::log(x[0]) - std::log1p(-x[0]);
        return compute_elbo(t.corpus, t.params, s, t.config).total;
      };
      const GridOptimum best = grid_optimal_coordinate(f, Eigen::VectorXd::Zero(1), 0, grid);
      worst = std::max(worst, std::abs(sigmoid(updated.varphi_logits[j]) - best.best_value));
    }
    checks.push_back(make_check("varphi_update_vs_grid", worst, 1e-3, worst <= 1e-3 + 1e-12));
  }

  return checks;
}

}  // namespace pfslda
