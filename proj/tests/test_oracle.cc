#include <cmath>
#include <numeric>

#include <doctest.h>

#include "helpers.h"
#include "pfslda/elbo.h"
#include "pfslda/oracle.h"
#include "pfslda/special.h"

using namespace pfslda;

namespace {

double log_normal(double y, double mean, double var) {
  return -0.5 * std::log(2.0 * M_PI * var) - (y - mean) * (y - mean) / (2.0 * var);
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("single topic is exact") {
  TinyInstance t = random_tiny_instance(5, 1, 4, 1, 6);
  const Document& doc = t.corpus.documents[0];
  const double y = t.corpus.targets[0];
  const double p = t.config.p;
  const Eigen::MatrixXd beta = t.params.beta();
  const Eigen::VectorXd pi = t.params.pi();
  double expect = log_normal(y, t.params.eta[0], t.params.delta());
  for (const auto& e : doc.entries) expect += e.count * std::log(p * beta(0, e.word) + (1 - p) * pi[e.word]);
  const OracleEstimate est = mc_marginal_loglik(doc, y, t.params, t.config, 10000, 1);
  CHECK(est.method == OracleMethod::kExact);
  CHECK(est.stderr_value == 0.0);
  CHECK(est.value == doctest::Approx(expect).epsilon(1e-12));

  const OracleEstimate empty = mc_marginal_loglik(Document{}, y, t.params, t.config, 10000, 1);
  CHECK(empty.value == doctest::Approx(log_normal(y, t.params.eta[0], t.params.delta())));
}

TEST_CASE("independent seeds agree") {
  TinyInstance t = random_tiny_instance(8, 1, 4, 2, 3);
  const Document& doc = t.corpus.documents[0];
  const OracleEstimate a = mc_marginal_loglik(doc, t.corpus.targets[0], t.params, t.config, 100000, 1);
  const OracleEstimate b = mc_marginal_loglik(doc, t.corpus.targets[0], t.params, t.config, 100000, 2);
  CHECK(a.method == OracleMethod::kMonteCarlo);
  CHECK(std::abs(a.value - b.value) <= 3.0 * std::hypot(a.stderr_value, b.stderr_value));
}

TEST_CASE("Monte-Carlo estimate converges to quadrature for two topics") {
  // With K = 2, theta_1 ~ Uniform(0, 1) under alpha = 1, so a fine midpoint rule is exact enough.
  TinyInstance t = random_tiny_instance(13, 1, 4, 2, 4);
  const Document& doc = t.corpus.documents[0];
  const double y = t.corpus.targets[0];
  const double p = t.config.p;
  const Eigen::MatrixXd beta = t.params.beta();
  const Eigen::VectorXd pi = t.params.pi();
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = (i + 0.5) / n;
    double lik = std::exp(log_normal(y, t.params.eta[0] * a + t.params.eta[1] * (1 - a), t.params.delta()));
    for (const auto& e : doc.entries) {
      const double mix = beta(0, e.word) * a + beta(1, e.word) * (1 - a);
      lik *= std::pow(p * mix + (1 - p) * pi[e.word], e.count);
    }
    sum += lik;
  }
  const double quad = std::log(sum / n);
  const OracleEstimate mc = mc_marginal_loglik(doc, y, t.params, t.config, 200000, 3);
  CHECK(std::abs(mc.value - quad) <= 4.0 * mc.stderr_value + 1e-9);
}

TEST_CASE("argument checks") {
  TinyInstance t = random_tiny_instance(1, 1, 4, 2, 3);
  CHECK_THROWS_AS(mc_marginal_loglik(t.corpus.documents[0], 0.0, t.params, t.config, 100, 1), Error);
  const Document long_doc = Document::from_entries({{0, 13}});
  CHECK_THROWS_AS(mc_marginal_loglik(long_doc, 0.0, t.params, t.config, 10000, 1), Error);
}

TEST_CASE("finite differences") {
  const Objective half_sq = [](const Eigen::VectorXd& x) { return 0.5 * x.squaredNorm(); };
  Eigen::VectorXd x(2);
  x << 1.0, 2.0;
  CHECK((finite_difference_gradient(half_sq, x, 1e-4) - x).cwiseAbs().maxCoeff() < 1e-8);
  const Objective flat = [](const Eigen::VectorXd&) { return 3.0; };
  CHECK(finite_difference_gradient(flat, x, 1e-4).isZero());
}

TEST_CASE("finite differences of the ELBO match compute_gradients") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    TinyInstance t = random_tiny_instance(200 + seed, 2, 5, 2, 6);
    std::vector<std::size_t> docs(t.corpus.num_docs());
    std::iota(docs.begin(), docs.end(), 0);
    const Eigen::VectorXd analytic =
        pack_gradient(compute_gradients(t.corpus, docs, t.params, t.state, t.config));
    const Objective f = [&](const Eigen::VectorXd& z) {
      ModelParams p = t.params;
      VariationalState s = t.state;
      unpack_coordinates(z, &p, &s);
      return compute_elbo(t.corpus, p, s, t.config).total;
    };
    const Eigen::VectorXd fd = finite_difference_gradient(f, pack_coordinates(t.params, t.state), 1e-5);
    for (Eigen::Index i = 0; i < fd.size(); ++i) {
      const double scale = std::max(std::abs(fd[i]), std::abs(analytic[i]));
      if (scale > 1e-8) CHECK(std::abs(fd[i] - analytic[i]) / scale < 1e-4);
    }
  }
}

TEST_CASE("pack and unpack are inverse") {
  TinyInstance t = random_tiny_instance(3, 3, 5, 2, 6);
  const Eigen::VectorXd x = pack_coordinates(t.params, t.state);
  ModelParams p = t.params;
  VariationalState s = t.state;
  p.eta.setZero();
  s.gamma.setOnes();
  unpack_coordinates(x, &p, &s);
  CHECK(p.eta == t.params.eta);
  CHECK((s.gamma - t.state.gamma).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(pack_coordinates(p, s).isApprox(x));
}

TEST_CASE("grid search") {
  const std::vector<double> grid = unit_grid(10);
  REQUIRE(grid.size() == 11);
  CHECK(grid.front() == 0.0);
  CHECK(grid.back() == 1.0);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2);

  const Objective parabola = [](const Eigen::VectorXd& z) { return -(z[1] - 0.33) * (z[1] - 0.33); };
  const GridOptimum best = grid_optimal_coordinate(parabola, x, 1, grid);
  CHECK(best.best_value == doctest::Approx(0.3));
  CHECK(best.best_index == 3);

  const Objective rising = [](const Eigen::VectorXd& z) { return z[0]; };
  CHECK(grid_optimal_coordinate(rising, x, 0, grid).best_value == 1.0);
  const Objective flat = [](const Eigen::VectorXd&) { return 0.0; };
  CHECK(grid_optimal_coordinate(flat, x, 0, grid).best_index == 0);
  CHECK_THROWS_AS(grid_optimal_coordinate(flat, x, 5, grid), Error);
}

TEST_CASE("verify suite passes") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (const auto& c : run_verify_suite(seed, 20000)) {
      INFO(c.name << " seed " << seed << " value " << c.value);
      CHECK(c.pass);
    }
  }
}

}  // TEST_SUITE
