#ifndef PFSLDA_EVALUATION_H_
#define PFSLDA_EVALUATION_H_

#include <vector>

#include <Eigen/Core>

#include "pfslda/corpus.h"

namespace pfslda {

enum class CoherenceFormula {
  kStandardPmi,   // log p(i,j) / (p(i) p(j))
  kInvertedFraction,  // log p(i) p(j) / p(i,j)
};

struct CoherenceReport {
  std::vector<double> per_topic;
  double mean = 0.0;
  int top_n = 0;
  CoherenceFormula formula = CoherenceFormula::kStandardPmi;
};

// Indices of the n largest entries, ties broken by lower index.
std::vector<int> top_words(const Eigen::Ref<const Eigen::VectorXd>& weights, int n);

// Mean pairwise PMI of each topic's top_n words under document co-occurrence
// in `reference`. Marginals are max(df, 1)/M; joint probabilities are add-one
// smoothed as (df_ij + 1) / (M + 1).
CoherenceReport topic_coherence(const Eigen::Ref<const Eigen::MatrixXd>& beta,
                                const Corpus& reference, int top_n,
                                CoherenceFormula formula = CoherenceFormula::kStandardPmi);

double rmse(const std::vector<double>& predictions, const std::vector<double>& targets);

// Mann-Whitney statistic with ties counted as one half.
double auc(const std::vector<double>& scores, const std::vector<double>& labels);

std::vector<int> select_relevant(const Eigen::Ref<const Eigen::VectorXd>& varphi,
                                 double threshold);

struct SelectionMetrics {
  double precision = 1.0;
  double recall = 0.0;
  int selected_count = 0;
  bool empty_selection = false;  // precision defaulted to 1
};

SelectionMetrics selection_metrics(const std::vector<int>& selected,
                                   const std::vector<int>& truth);

// Pearson correlation of each word's per-document count with the target;
// zero for words whose count never varies.
std::vector<double> word_target_correlation(const Corpus& corpus);

// Top n words by |correlation| (or signed correlation), ties by lower index.
std::vector<int> correlation_topn(const Corpus& corpus, int n, bool absolute = true);

// sum_v max_k beta_kv * pi_v after zeroing entries below 1e-8.
double disjointness_overlap(const Eigen::Ref<const Eigen::MatrixXd>& beta,
                            const Eigen::Ref<const Eigen::VectorXd>& pi);

}  // namespace pfslda

#endif  // PFSLDA_EVALUATION_H_
