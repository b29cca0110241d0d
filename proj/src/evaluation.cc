#include "pfslda/evaluation.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pfslda {

std::vector<int> top_words(const Eigen::Ref<const Eigen::VectorXd>& weights, int n) {
  std::vector<int> order(static_cast<std::size_t>(weights.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return weights[a] > weights[b]; });
  order.resize(static_cast<std::size_t>(std::min<Eigen::Index>(n, weights.size())));
  return order;
}

CoherenceReport topic_coherence(const Eigen::Ref<const Eigen::MatrixXd>& beta,
                                const Corpus& reference, int top_n,
                                CoherenceFormula formula) {
  if (top_n < 2) throw Error("coherence needs top_n >= 2");
  if (top_n > beta.cols()) throw Error("top_n exceeds the vocabulary size");
  if (reference.num_docs() < 1) throw Error("coherence needs a nonempty reference corpus");
  if (static_cast<std::size_t>(beta.cols()) != reference.vocab_size()) {
    throw Error("topic matrix and reference corpus disagree on vocabulary size");
  }
  const double m = static_cast<double>(reference.num_docs());

  CoherenceReport report;
  report.top_n = top_n;
  report.formula = formula;
  for (Eigen::Index k = 0; k < beta.rows(); ++k) {
    const std::vector<int> top = top_words(beta.row(k).transpose(), top_n);
    std::vector<int> slot(static_cast<std::size_t>(beta.cols()), -1);
    for (std::size_t i = 0; i < top.size(); ++i) slot[static_cast<std::size_t>(top[i])] = static_cast<int>(i);

    const auto n = static_cast<std::size_t>(top_n);
    std::vector<double> df(n, 0.0);
    std::vector<double> joint(n * n, 0.0);
    std::vector<int> present;
    for (const auto& doc : reference.documents) {
      present.clear();
      for (const auto& e : doc.entries) {
        const int s = slot[static_cast<std::size_t>(e.word)];
        if (s >= 0) present.push_back(s);
      }
      for (int a : present) {
        df[static_cast<std::size_t>(a)] += 1.0;
        for (int b : present) joint[static_cast<std::size_t>(a) * n + static_cast<std::size_t>(b)] += 1.0;
      }
    }

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double pij = (joint[i * n + j] + 1.0) / (m + 1.0);
        const double pi = std::max(df[i], 1.0) / m;
        const double pj = std::max(df[j], 1.0) / m;
        double pmi = std::log(pij) - std::log(pi) - std::log(pj);
        if (formula == CoherenceFormula::kInvertedFraction) pmi = -pmi;
        total += pmi;
      }
    }
    report.per_topic.push_back(total / static_cast<double>(n * (n - 1)));
  }
  report.mean = report.per_topic.empty()
                    ? 0.0
                    : std::accumulate(report.per_topic.begin(), report.per_topic.end(), 0.0) /
                          static_cast<double>(report.per_topic.size());
  return report;
}

double rmse(const std::vector<double>& predictions, const std::vector<double>& targets) {
  if (predictions.size() != targets.size()) {
    throw Error("rmse: " + std::to_string(predictions.size()) + " predictions vs " +
                std::to_string(targets.size()) + " targets");
  }
  if (predictions.empty()) throw Error("rmse: no predictions");
  double ss = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double r = predictions[i] - targets[i];
    ss += r * r;
  }
  return std::sqrt(ss / static_cast<double>(predictions.size()));
}

double auc(const std::vector<double>& scores, const std::vector<double>& labels) {
  if (scores.size() != labels.size()) throw Error("auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  // Midranks over tied groups.
  std::vector<double> rank(scores.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = mid;
    i = j + 1;
  }
  double n_pos = 0.0;
  double n_neg = 0.0;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1.0) {
      n_pos += 1.0;
      rank_sum += rank[i];
    } else if (labels[i] == 0.0) {
      n_neg += 1.0;
    } else {
      throw Error("auc: labels must be 0 or 1");
    }
  }
  if (n_pos == 0.0 || n_neg == 0.0) throw Error("auc: labels must contain both classes");
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

std::vector<int> select_relevant(const Eigen::Ref<const Eigen::VectorXd>& varphi,
                                 double threshold) {
  std::vector<int> out;
  for (Eigen::Index v = 0; v < varphi.size(); ++v) {
    if (varphi[v] > threshold) out.push_back(static_cast<int>(v));
  }
  return out;
}

SelectionMetrics selection_metrics(const std::vector<int>& selected,
                                   const std::vector<int>& truth) {
  if (truth.empty()) throw Error("selection metrics need a nonempty truth set");
  std::vector<int> a = selected;
  std::vector<int> b = truth;
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  std::vector<int> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));

  SelectionMetrics out;
  out.selected_count = static_cast<int>(a.size());
  out.empty_selection = a.empty();
  out.precision = a.empty() ? 1.0 : static_cast<double>(both.size()) / static_cast<double>(a.size());
  out.recall = static_cast<double>(both.size()) / static_cast<double>(b.size());
  return out;
}

std::vector<double> word_target_correlation(const Corpus& corpus) {
  const std::size_t m = corpus.num_docs();
  if (m < 2) throw Error("correlation needs at least 2 documents");
  const double md = static_cast<double>(m);
  const double y_mean = std::accumulate(corpus.targets.begin(), corpus.targets.end(), 0.0) / md;
  double y_ss = 0.0;
  for (double y : corpus.targets) y_ss += (y - y_mean) * (y - y_mean);
  if (y_ss <= 0.0) throw Error("correlation is undefined for constant targets");

  const std::size_t v = corpus.vocab_size();
  std::vector<double> sum_x(v, 0.0);
  std::vector<double> sum_xx(v, 0.0);
  std::vector<double> sum_xy(v, 0.0);
  for (std::size_t d = 0; d < m; ++d) {
    const double yc = corpus.targets[d] - y_mean;
    for (const auto& e : corpus.documents[d].entries) {
      const double x = e.count;
      const auto w = static_cast<std::size_t>(e.word);
      sum_x[w] += x;
      sum_xx[w] += x * x;
      sum_xy[w] += x * yc;
    }
  }
  std::vector<double> corr(v, 0.0);
  for (std::size_t w = 0; w < v; ++w) {
    const double x_ss = sum_xx[w] - sum_x[w] * sum_x[w] / md;
    if (x_ss <= 1e-12 * std::max(1.0, sum_xx[w])) continue;
    corr[w] = sum_xy[w] / std::sqrt(x_ss * y_ss);
  }
  return corr;
}

std::vector<int> correlation_topn(const Corpus& corpus, int n, bool absolute) {
  if (n < 0 || static_cast<std::size_t>(n) > corpus.vocab_size()) {
    throw Error("correlation_topn: n must lie in [0, V]");
  }
  std::vector<double> corr = word_target_correlation(corpus);
  if (absolute) {
    for (double& c : corr) c = std::abs(c);
  }
  return top_words(Eigen::Map<const Eigen::VectorXd>(corr.data(), static_cast<Eigen::Index>(corr.size())), n);
}

double disjointness_overlap(const Eigen::Ref<const Eigen::MatrixXd>& beta,
                            const Eigen::Ref<const Eigen::VectorXd>& pi) {
  constexpr double kFloor = 1e-8;
  double total = 0.0;
  for (Eigen::Index v = 0; v < pi.size(); ++v) {
    const double pv = pi[v] < kFloor ? 0.0 : pi[v];
    double bmax = 0.0;
    for (Eigen::Index k = 0; k < beta.rows(); ++k) {
      if (beta(k, v) >= kFloor) bmax = std::max(bmax, beta(k, v));
    }
    total += bmax * pv;
  }
  return total;
}

}  // namespace pfslda
