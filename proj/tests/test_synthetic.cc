#include <cmath>

#include <doctest.h>

#include "helpers.h"
#include "pfslda/synthetic.h"

using namespace pfslda;

TEST_SUITE("synthetic") {

TEST_CASE("defaults give fifty relevant words with disjoint supports") {
  SyntheticConfig sc;
  sc.num_docs = 50;
  auto [corpus, truth] = generate_dataset(sc, 0);
  int relevant = 0;
  for (bool b : truth.relevance_mask) relevant += b ? 1 : 0;
  CHECK(relevant == 50);
  CHECK(truth.relevant_words().size() == 50);
  CHECK(corpus.vocab_size() == 100);
  for (int v = 0; v < 100; ++v) {
    if (truth.relevance_mask[static_cast<std::size_t>(v)]) {
      CHECK(truth.true_pi[v] == 0.0);
    } else {
      CHECK(truth.true_beta.col(v).maxCoeff() == 0.0);
    }
  }
  for (int k = 0; k < 5; ++k) CHECK(truth.true_beta.row(k).sum() == doctest::Approx(1.0));
  CHECK(truth.true_pi.sum() == doctest::Approx(1.0));
  CHECK(truth.true_eta[0] == doctest::Approx(-2.0));
  CHECK(truth.true_eta[4] == doctest::Approx(2.0));
  for (const auto& doc : corpus.documents) CHECK(doc.total == sc.doc_length);
}

TEST_CASE("channel rate matches the inclusion prior") {
  for (double p : {0.25, 0.9}) {
    SyntheticConfig sc;
    sc.p = p;
    sc.num_docs = 200;
    auto [corpus, truth] = generate_dataset(sc, 1);
    const double rate = empirical_channel_rate(corpus, truth);
    CHECK(std::abs(rate - p) < 0.02);
    CHECK(rate == doctest::Approx(static_cast<double>(truth.beta_channel_tokens) / truth.total_tokens));
  }
}

TEST_CASE("channel rate counts tokens on relevant words") {
  Corpus c = testing::dense_corpus({{2, 1, 1}}, {0.0});
  SyntheticTruth truth;
  truth.relevance_mask = {true, false, false};
  CHECK(empirical_channel_rate(c, truth) == doctest::Approx(0.5));
}

TEST_CASE("generation is deterministic per seed and index") {
  SyntheticConfig sc;
  sc.num_docs = 30;
  sc.seed = 7;
  auto [a, ta] = generate_dataset(sc, 2);
  auto [b, tb] = generate_dataset(sc, 2);
  CHECK(a.documents == b.documents);
  CHECK(a.targets == b.targets);
  CHECK(ta.relevance_mask == tb.relevance_mask);
  auto [c, tc] = generate_dataset(sc, 3);
  CHECK_FALSE(a.documents == c.documents);
}

TEST_CASE("truth round trip") {
  testing::TempDir dir;
  SyntheticConfig sc;
  sc.num_docs = 10;
  auto [corpus, truth] = generate_dataset(sc, 0);
  save_truth(truth, dir / "truth.txt");
  const SyntheticTruth back = load_truth(dir / "truth.txt");
  CHECK(back.relevance_mask == truth.relevance_mask);
  CHECK((back.true_beta - truth.true_beta).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.true_pi - truth.true_pi).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.true_eta == truth.true_eta);
  CHECK(back.true_delta == truth.true_delta);
}

TEST_CASE("invalid configurations") {
  SyntheticConfig sc;
  sc.relevant_count = 0;
  CHECK_THROWS_AS(sc.validate(), Error);
  sc = {};
  sc.relevant_count = 101;
  CHECK_THROWS_AS(sc.validate(), Error);
  sc = {};
  sc.p = 0.0;
  CHECK_THROWS_AS(sc.validate(), Error);
  sc = {};
  sc.delta = -1.0;
  CHECK_THROWS_AS(generate_dataset(sc, 0), Error);
}

}  // TEST_SUITE
