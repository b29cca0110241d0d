#include <cmath>

#include <doctest.h>

#include "helpers.h"
#include "pfslda/evaluation.h"
#include "pfslda/prediction.h"
#include "pfslda/sampling.h"
#include "pfslda/synthetic.h"

using namespace pfslda;

namespace {

// Model parameters equal to the generating truth, zeros lifted to 1e-10.
ModelParams params_from_truth(const SyntheticTruth& truth, double p) {
  ModelParams m;
  m.p = p;
  m.beta_logits = truth.true_beta.array().max(1e-10).log().matrix();
  m.pi_logits = truth.true_pi.array().max(1e-10).log().matrix();
  m.eta = truth.true_eta;
  m.log_delta = std::log(truth.true_delta);
  return m;
}

}  // namespace

TEST_SUITE("prediction") {

TEST_CASE("single topic is degenerate") {
  ModelConfig config;
  config.num_topics = 1;
  ModelParams m;
  m.beta_logits = Eigen::MatrixXd::Zero(1, 3);
  m.pi_logits = Eigen::VectorXd::Zero(3);
  m.eta = Eigen::VectorXd::Constant(1, 1.75);
  const Document doc = Document::from_entries({{0, 2}, {2, 1}});
  CHECK(map_theta(doc, m, config)[0] == doctest::Approx(1.0));
  CHECK(predict_target(doc, m, config) == doctest::Approx(1.75));
}

TEST_CASE("empty document returns the uniform point") {
  ModelConfig config;
  config.num_topics = 4;
  ModelParams m;
  m.beta_logits = Eigen::MatrixXd::Random(4, 3);
  m.pi_logits = Eigen::VectorXd::Zero(3);
  m.eta = Eigen::VectorXd::Zero(4);
  const Eigen::VectorXd theta = map_theta(Document{}, m, config);
  CHECK((theta.array() - 0.25).abs().maxCoeff() < 1e-12);
}

TEST_CASE("null weights") {
  ModelConfig config;
  config.num_topics = 3;
  ModelParams m;
  m.beta_logits = Eigen::MatrixXd::Random(3, 4);
  m.pi_logits = Eigen::VectorXd::Zero(4);
  m.eta = Eigen::VectorXd::Zero(3);
  const Document doc = Document::from_entries({{1, 3}, {3, 2}});
  CHECK(predict_target(doc, m, config) == doctest::Approx(0.0));
  config.target_type = TargetType::kBinary;
  CHECK(predict_target(doc, m, config) == doctest::Approx(0.5));
}

TEST_CASE("document drawn from one topic of disjoint topics") {
  SyntheticConfig sc;
  sc.num_docs = 1;
  auto [unused, truth] = generate_dataset(sc, 0);
  ModelConfig config;
  const ModelParams m = params_from_truth(truth, 0.25);

  Rng rng(3);
  std::vector<WordCount> entries;
  const Eigen::VectorXd topic = truth.true_beta.row(2).transpose();
  for (int n = 0; n < 200; ++n) entries.push_back({sample_categorical(topic, rng), 1});
  const Document doc = Document::from_entries(entries);
  Eigen::Index best = 0;
  map_theta(doc, m, config).maxCoeff(&best);
  CHECK(best == 2);
}

TEST_CASE("map_theta increases the objective and stays on the simplex") {
  SyntheticConfig sc;
  sc.num_docs = 20;
  auto [corpus, truth] = generate_dataset(sc, 1);
  ModelConfig config;
  const ModelParams m = params_from_truth(truth, 0.25);
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(5, 0.2);
  for (const auto& doc : corpus.documents) {
    const Eigen::VectorXd theta = map_theta(doc, m, config);
    CHECK(theta.sum() == doctest::Approx(1.0));
    CHECK((theta.array() >= 0.0).all());
    CHECK(map_objective(doc, theta, m, config) >= map_objective(doc, uniform, m, config));
  }
}

TEST_CASE("well-specified model predicts within twice the noise scale") {
  SyntheticConfig sc;
  sc.num_docs = 300;
  auto [corpus, truth] = generate_dataset(sc, 2);
  auto [train, val, test] = split_corpus(corpus, 0.8, 0.1, 0.1, 0);
  ModelConfig config;
  const ModelParams m = params_from_truth(truth, 0.25);
  const double err = rmse(predict_corpus(test, m, config), test.targets);
  CHECK(err <= 2.0 * std::sqrt(truth.true_delta));
}

}  // TEST_SUITE
