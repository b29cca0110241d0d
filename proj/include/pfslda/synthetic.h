#ifndef PFSLDA_SYNTHETIC_H_
#define PFSLDA_SYNTHETIC_H_

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "pfslda/corpus.h"

namespace pfslda {

struct SyntheticConfig {
  int vocab_size = 100;
  int relevant_count = 50;
  int num_topics = 5;
  double p = 0.25;
  Eigen::VectorXd alpha;  // empty means all ones
  int num_docs = 1000;
  int doc_length = 4000;
  double eta_low = -2.0;   // eta_k equally spaced on [eta_low, eta_high]
  double eta_high = 2.0;
  double delta = 0.5;      // target noise variance
  int datasets = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticTruth {
  Eigen::MatrixXd true_beta;  // K x V, zero off the relevant words
  Eigen::VectorXd true_pi;    // V, zero on the relevant words
  Eigen::VectorXd true_eta;
  double true_delta = 0.0;
  std::vector<bool> relevance_mask;
  long long beta_channel_tokens = 0;  // tokens whose switch was on
  long long total_tokens = 0;

  std::vector<int> relevant_words() const;
};

// Dataset i uses seed + i.
std::pair<Corpus, SyntheticTruth> generate_dataset(const SyntheticConfig& config,
                                                   int dataset_index);

// Fraction of tokens that fall on relevant words.
double empirical_channel_rate(const Corpus& corpus, const SyntheticTruth& truth);

void save_truth(const SyntheticTruth& truth, const std::filesystem::path& path);
SyntheticTruth load_truth(const std::filesystem::path& path);

}  // namespace pfslda

#endif  // PFSLDA_SYNTHETIC_H_
