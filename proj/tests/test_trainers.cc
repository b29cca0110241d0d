#include <cmath>
#include <numeric>
#include <random>

#include <doctest.h>

#include "helpers.h"
#include "pfslda/elbo.h"
#include "pfslda/evaluation.h"
#include "pfslda/oracle.h"
#include "pfslda/special.h"
#include "pfslda/synthetic.h"
#include "pfslda/trainers.h"

using namespace pfslda;

namespace {

double elbo_of(const TinyInstance& t) {
  return compute_elbo(t.corpus, t.params, t.state, t.config).total;
}

SyntheticConfig small_synthetic() {
  SyntheticConfig s;
  s.num_docs = 120;
  s.doc_length = 200;
  s.vocab_size = 20;
  s.relevant_count = 10;
  s.num_topics = 3;
  return s;
}

}  // namespace

TEST_SUITE("trainers") {

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.learning_rate = -1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.convergence_tol = -1e-3;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.restarts = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK(parse_trainer_kind("ca") == TrainerKind::kCa);
  CHECK_THROWS_AS(parse_trainer_kind("lbfgs"), Error);
}

TEST_CASE("varphi update: symmetric evidence gives one half") {
  TinyInstance t = random_tiny_instance(2, 3, 4, 1, 6);
  t.config.p = 0.5;
  t.params.p = 0.5;
  t.params.pi_logits = t.params.log_beta().row(0).transpose();
  ca_update_varphi(t.corpus, t.params, &t.state, t.config);
  const std::vector<int> df = document_frequency(t.corpus);
  for (int j = 0; j < 4; ++j) {
    if (df[static_cast<std::size_t>(j)] > 0) CHECK(t.state.varphi()[j] == doctest::Approx(0.5));
  }
}

TEST_CASE("varphi update matches the grid oracle") {
  const std::vector<double> grid = unit_grid(1000);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TinyInstance t = random_tiny_instance(40 + seed, 3, 5, 2, 8);
    VariationalState updated = t.state;
    ca_update_varphi(t.corpus, t.params, &updated, t.config);
    const std::vector<int> df = document_frequency(t.corpus);
    for (int j = 0; j < 5; ++j) {
      if (df[static_cast<std::size_t>(j)] == 0) {
        CHECK(updated.varphi_logits[j] == t.state.varphi_logits[j]);
        continue;
      }
      const Objective f = [&](const Eigen::VectorXd& x) {
        VariationalState s = t.state;
        s.varphi_logits[j] = std::log(x[0]) - std::log1p(-x[0]);
        return compute_elbo(t.corpus, t.params, s, t.config).total;
      };
      const GridOptimum best = grid_optimal_coordinate(f, Eigen::VectorXd::Zero(1), 0, grid);
      CHECK(std::abs(sigmoid(updated.varphi_logits[j]) - best.best_value) <= 1e-3 + 1e-12);
    }
  }
}

TEST_CASE("varphi update: prior near one forces inclusion") {
  TinyInstance t = random_tiny_instance(3, 3, 4, 2, 6);
  t.config.p = 1.0 - 1e-12;
  t.params.p = t.config.p;
  ca_update_varphi(t.corpus, t.params, &t.state, t.config);
  const std::vector<int> df = document_frequency(t.corpus);
  for (int j = 0; j < 4; ++j) {
    if (df[static_cast<std::size_t>(j)] > 0) CHECK(t.state.varphi()[j] > 0.999);
  }
}

TEST_CASE("phi update special cases") {
  TinyInstance t = random_tiny_instance(7, 2, 5, 3, 8);
  t.state.varphi_logits.setConstant(-800.0);  // varphi = 0
  ca_update_phi(t.corpus, 0, t.params, &t.state, t.config);
  const Eigen::VectorXd expect =
      softmax_simplex(expected_log_theta(t.state.gamma.row(0).transpose()));
  for (Eigen::Index n = 0; n < t.state.phi[0].rows(); ++n) {
    CHECK((t.state.phi[0].row(n).transpose() - expect).cwiseAbs().maxCoeff() < 1e-12);
  }

  TinyInstance one = random_tiny_instance(7, 2, 5, 1, 8);
  ca_update_phi(one.corpus, 1, one.params, &one.state, one.config);
  CHECK((one.state.phi[1].array() == 1.0).all());
}

TEST_CASE("each closed-form update never decreases the ELBO") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TinyInstance t = random_tiny_instance(60 + seed, 3, 6, 2, 8);
    double before = elbo_of(t);
    auto check_step = [&](const char* name) {
      const double after = elbo_of(t);
      INFO(name << " seed " << seed);
      CHECK(after >= before - 1e-8);
      before = after;
    };
    for (std::size_t d = 0; d < t.corpus.num_docs(); ++d) {
      ca_update_phi(t.corpus, d, t.params, &t.state, t.config);
      check_step("phi");
      ca_update_gamma(t.corpus, d, t.params, &t.state, t.config, 25, 0.1);
      check_step("gamma");
    }
    ca_update_varphi(t.corpus, t.params, &t.state, t.config);
    check_step("varphi");
    ca_update_pi(t.corpus, t.state, &t.params, t.config);
    check_step("pi");
    ca_update_beta(t.corpus, t.state, &t.params, t.config);
    check_step("beta");
    ca_update_eta_delta(t.corpus, t.state, &t.params, t.config);
    check_step("eta_delta");
  }
}

TEST_CASE("gamma update: LDA fixed point when the target term is flat") {
  TinyInstance t = random_tiny_instance(12, 2, 6, 3, 8);
  t.params.eta.setZero();
  for (auto& y : t.corpus.targets) y = 0.0;
  ca_update_phi(t.corpus, 0, t.params, &t.state, t.config);
  Eigen::VectorXd fixed = Eigen::VectorXd::Ones(3);
  const auto& doc = t.corpus.documents[0];
  for (std::size_t n = 0; n < doc.entries.size(); ++n) {
    fixed += doc.entries[n].count * t.state.phi[0].row(static_cast<Eigen::Index>(n)).transpose();
  }
  t.state.gamma.row(0) = fixed.transpose();
  ca_update_gamma(t.corpus, 0, t.params, &t.state, t.config, 25, 0.1);
  CHECK((t.state.gamma.row(0).transpose() - fixed).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("gamma update: ascent from the LDA fixed point with a live target") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TinyInstance t = random_tiny_instance(80 + seed, 2, 6, 3, 8);
    ca_update_phi(t.corpus, 0, t.params, &t.state, t.config);
    Eigen::VectorXd fixed = Eigen::VectorXd::Ones(3);
    const auto& doc = t.corpus.documents[0];
    for (std::size_t n = 0; n < doc.entries.size(); ++n) {
      fixed += doc.entries[n].count * t.state.phi[0].row(static_cast<Eigen::Index>(n)).transpose();
    }
    t.state.gamma.row(0) = fixed.transpose();
    const double before = elbo_of(t);
    ca_update_gamma(t.corpus, 0, t.params, &t.state, t.config, 25, 0.1);
    CHECK(elbo_of(t) >= before - 1e-8);
  }
}

TEST_CASE("gamma gradient matches finite differences") {
  TinyInstance t = random_tiny_instance(14, 2, 6, 3, 8);
  const std::vector<std::size_t> docs{0, 1};
  const GradientBundle g = compute_gradients(t.corpus, docs, t.params, t.state, t.config);
  const Objective f = [&](const Eigen::VectorXd& x) {
    TinyInstance s = t;
    s.state.gamma.row(0) = x.transpose();
    return elbo_of(s);
  };
  const Eigen::VectorXd gamma = t.state.gamma.row(0).transpose();
  const Eigen::VectorXd fd = finite_difference_gradient(f, gamma, 1e-6);
  // d/d gamma = (d/d log gamma) / gamma
  const Eigen::VectorXd analytic = g.d_log_gamma.row(0).transpose().cwiseQuotient(gamma);
  for (Eigen::Index k = 0; k < 3; ++k) {
    CHECK(std::abs(fd[k] - analytic[k]) / std::max(std::abs(fd[k]), 1e-8) < 1e-4);
  }
}

TEST_CASE("pi update") {
  Corpus c = testing::dense_corpus({{1, 4, 0}, {1, 2, 2}}, {0.0, 1.0});
  ModelConfig config;
  config.num_topics = 2;
  auto [params, state] = init_params(config, c.documents, 3, 1);
  state.varphi_logits.setConstant(-1000.0);
  ca_update_pi(c, state, &params, config);
  CHECK(params.pi()[0] == doctest::Approx(0.2));
  CHECK(params.pi()[1] == doctest::Approx(0.6));
  CHECK(params.pi()[2] == doctest::Approx(0.2));

  state.varphi_logits[1] = 1000.0;
  ca_update_pi(c, state, &params, config);
  CHECK(params.pi()[1] < 1e-12);
  CHECK(params.pi()[0] == doctest::Approx(0.5));
}

TEST_CASE("beta update") {
  Corpus c = testing::dense_corpus({{1, 4, 0}, {1, 2, 2}}, {0.0, 1.0});
  ModelConfig config;
  config.num_topics = 1;
  auto [params, state] = init_params(config, c.documents, 3, 1);
  state.varphi_logits.setConstant(1000.0);
  ca_update_beta(c, state, &params, config);
  CHECK(params.beta()(0, 0) == doctest::Approx(0.2));
  CHECK(params.beta()(0, 1) == doctest::Approx(0.6));
  CHECK(params.beta()(0, 2) == doctest::Approx(0.2));

  config.num_topics = 2;
  auto [p2, s2] = init_params(config, c.documents, 3, 1);
  s2.varphi_logits << 1000.0, -1000.0, 1000.0;
  ca_update_beta(c, s2, &p2, config);
  CHECK(p2.beta().col(1).maxCoeff() < 1e-11);
}

TEST_CASE("eta and delta update") {
  SUBCASE("constant target with one topic") {
    Corpus c = testing::dense_corpus({{1, 2}, {3, 0}, {0, 1}}, {2.5, 2.5, 2.5});
    ModelConfig config;
    config.num_topics = 1;
    auto [params, state] = init_params(config, c.documents, 2, 1);
    ca_update_eta_delta(c, state, &params, config);
    CHECK(params.eta[0] == doctest::Approx(2.5).epsilon(1e-5));
    CHECK(params.delta() == doctest::Approx(1e-6));
  }
  SUBCASE("noise independent of theta gives the sample variance") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<std::vector<int>> rows;
    std::vector<double> y;
    for (int d = 0; d < 2000; ++d) {
      rows.push_back({1 + d % 3, 2});
      y.push_back(noise(rng));
    }
    Corpus c = testing::dense_corpus(rows, y);
    ModelConfig config;
    config.num_topics = 1;
    auto [params, state] = init_params(config, c.documents, 2, 1);
    ca_update_eta_delta(c, state, &params, config);
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
    double var = 0.0;
    for (double v : y) var += (v - mean) * (v - mean);
    var /= y.size();
    CHECK(params.delta() == doctest::Approx(var).epsilon(1e-4));
    CHECK(std::abs(params.delta() - 1.0) < 5.0 * std::sqrt(2.0 / y.size()));
  }
  SUBCASE("binary targets are rejected") {
    TinyInstance t = random_tiny_instance(1, 3, 4, 2, 5, TargetType::kBinary);
    CHECK_THROWS_AS(ca_update_eta_delta(t.corpus, t.state, &t.params, t.config), Error);
  }
}

TEST_CASE("coordinate ascent trace is monotone") {
  auto [corpus, truth] = generate_dataset(small_synthetic(), 0);
  ModelConfig mc;
  mc.num_topics = 3;
  mc.seed = 4;
  TrainConfig tc;
  tc.trainer = TrainerKind::kCa;
  tc.ca_sweeps = 15;
  tc.convergence_tol = 0.0;
  const TrainResult r = train(corpus, nullptr, mc, tc);
  REQUIRE(r.trace.records.size() == 15);
  for (std::size_t i = 1; i < r.trace.records.size(); ++i) {
    CHECK(r.trace.records[i].elbo >= r.trace.records[i - 1].elbo - 1e-6);
  }
}

TEST_CASE("coordinate ascent with one topic and no channel recovers unigram frequencies") {
  Corpus c = testing::dense_corpus({{1, 4, 0}, {1, 2, 2}, {0, 0, 5}}, {0.5, 1.0, -0.5});
  ModelConfig mc;
  mc.num_topics = 1;
  mc.channel_enabled = false;
  mc.p = 1.0;
  TrainConfig tc;
  tc.trainer = TrainerKind::kCa;
  tc.ca_sweeps = 3;
  const TrainResult r = train(c, nullptr, mc, tc);
  const Eigen::MatrixXd beta = r.params.beta();
  CHECK(beta(0, 0) == doctest::Approx(2.0 / 15.0));
  CHECK(beta(0, 1) == doctest::Approx(6.0 / 15.0));
  CHECK(beta(0, 2) == doctest::Approx(7.0 / 15.0));
}

TEST_CASE("sgd: determinism, trace and baseline path") {
  auto [corpus, truth] = generate_dataset(small_synthetic(), 1);
  auto [train_set, val, test] = split_corpus(corpus, 0.8, 0.2, 0.0, 3);
  ModelConfig mc;
  mc.num_topics = 3;
  mc.seed = 9;
  TrainConfig tc;
  tc.epochs = 5;
  tc.batch_size = 16;
  tc.seed = 2;

  const TrainResult a = train_sgd(train_set, &val, mc, tc);
  const TrainResult b = train_sgd(train_set, &val, mc, tc);
  CHECK(a.params.beta_logits == b.params.beta_logits);
  CHECK(a.params.eta == b.params.eta);
  CHECK(a.state.varphi_logits == b.state.varphi_logits);
  REQUIRE(a.trace.records.size() == 5);
  for (const auto& rec : a.trace.records) CHECK(std::isfinite(rec.val_metric));

  testing::TempDir dir;
  a.trace.write_csv(dir / "trace.csv");
  const std::string csv = testing::read_file(dir / "trace.csv");
  CHECK(csv.rfind("step,elbo,val_metric\n", 0) == 0);

  mc.channel_enabled = false;
  mc.p = 1.0;
  const TrainResult base = train_sgd(train_set, &val, mc, tc);
  CHECK(std::isfinite(validation_metric(val, base.params, mc)));
}

TEST_CASE("sgd improves the ELBO and early stopping restores the best model") {
  auto [corpus, truth] = generate_dataset(small_synthetic(), 2);
  auto [train_set, val, test] = split_corpus(corpus, 0.8, 0.2, 0.0, 3);
  ModelConfig mc;
  mc.num_topics = 3;
  TrainConfig tc;
  tc.epochs = 40;
  tc.batch_size = 16;
  const TrainResult r = train_sgd(train_set, &val, mc, tc);
  CHECK(r.trace.records.back().elbo > r.trace.records.front().elbo);

  tc.early_stopping = true;
  tc.patience = 2;
  const TrainResult es = train_sgd(train_set, &val, mc, tc);
  double best = 1e300;
  for (const auto& rec : es.trace.records) best = std::min(best, rec.val_metric);
  CHECK(validation_metric(val, es.params, mc) == doctest::Approx(best));

  CHECK_THROWS_AS(train_sgd(train_set, nullptr, mc, tc), Error);
}

TEST_CASE("restarts keep the run with the highest ELBO") {
  auto [corpus, truth] = generate_dataset(small_synthetic(), 3);
  ModelConfig mc;
  mc.num_topics = 3;
  mc.seed = 4;
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 16;
  tc.seed = 6;
  for (TrainerKind kind : {TrainerKind::kSgd, TrainerKind::kCa}) {
    tc.trainer = kind;
    tc.ca_sweeps = 3;
    std::vector<TrainResult> singles;
    for (int r = 0; r < 3; ++r) {
      ModelConfig m = mc;
      TrainConfig t = tc;
      m.seed += r;
      t.seed += r;
      singles.push_back(train(corpus, nullptr, m, t));
    }
    TrainConfig many = tc;
    many.restarts = 3;
    const TrainResult best = train(corpus, nullptr, mc, many);
    double top = -1e300;
    for (const auto& r : singles) {
      CHECK(r.elbo == doctest::Approx(compute_elbo(corpus, r.params, r.state, mc).total));
      top = std::max(top, r.elbo);
    }
    CHECK(best.elbo == top);
    bool matches = false;
    for (const auto& r : singles) matches = matches || r.params.beta_logits == best.params.beta_logits;
    CHECK(matches);
  }
}

TEST_CASE("trainers reject mismatched inputs") {
  auto [corpus, truth] = generate_dataset(small_synthetic(), 0);
  ModelConfig mc;
  mc.target_type = TargetType::kBinary;
  CHECK_THROWS_AS(train_sgd(corpus, nullptr, mc, TrainConfig{}), Error);
  mc = {};
  TrainConfig tc;
  tc.trainer = TrainerKind::kCa;
  Corpus binary = corpus;
  binary.target_type = TargetType::kBinary;
  for (auto& y : binary.targets) y = y > 0 ? 1.0 : 0.0;
  mc.target_type = TargetType::kBinary;
  CHECK_THROWS_AS(train(binary, nullptr, mc, tc), Error);
}

}  // TEST_SUITE
