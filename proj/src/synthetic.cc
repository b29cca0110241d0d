#include "pfslda/synthetic.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "pfslda/sampling.h"
#include "pfslda/text_io.h"

namespace pfslda {

void SyntheticConfig::validate() const {
  if (vocab_size < 2) throw Error("synthetic vocabulary needs at least 2 words");
  if (relevant_count < 1 || relevant_count >= vocab_size) {
    throw Error("relevant_count must lie in [1, V)");
  }
  if (num_topics < 1) throw Error("number of topics must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw Error("p must lie in (0, 1)");
  if (alpha.size() != 0) {
    if (alpha.size() != num_topics) throw Error("alpha length must equal K");
    if ((alpha.array() <= 0.0).any()) throw Error("alpha entries must be positive");
  }
  if (num_docs < 1 || doc_length < 0) throw Error("invalid document count or length");
  if (!(delta > 0.0)) throw Error("delta must be positive");
  if (datasets < 1) throw Error("datasets must be >= 1");
}

std::vector<int> SyntheticTruth::relevant_words() const {
  std::vector<int> out;
  for (std::size_t v = 0; v < relevance_mask.size(); ++v) {
    if (relevance_mask[v]) out.push_back(static_cast<int>(v));
  }
  return out;
}

std::pair<Corpus, SyntheticTruth> generate_dataset(const SyntheticConfig& config,
                                                   int dataset_index) {
  config.validate();
  const int v_total = config.vocab_size;
  const int k_total = config.num_topics;
  const int n_rel = config.relevant_count;
  Rng rng(config.seed + static_cast<std::uint64_t>(dataset_index));

  std::vector<int> order(static_cast<std::size_t>(v_total));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> relevant(order.begin(), order.begin() + n_rel);
  std::vector<int> irrelevant(order.begin() + n_rel, order.end());
  std::sort(relevant.begin(), relevant.end());
  std::sort(irrelevant.begin(), irrelevant.end());

  SyntheticTruth truth;
  truth.relevance_mask.assign(static_cast<std::size_t>(v_total), false);
  for (int w : relevant) truth.relevance_mask[static_cast<std::size_t>(w)] = true;

  truth.true_beta = Eigen::MatrixXd::Zero(k_total, v_total);
  for (int k = 0; k < k_total; ++k) {
    const Eigen::VectorXd row = sample_dirichlet(Eigen::VectorXd::Ones(n_rel), rng);
    for (int i = 0; i < n_rel; ++i) truth.true_beta(k, relevant[static_cast<std::size_t>(i)]) = row[i];
  }
  truth.true_pi = Eigen::VectorXd::Zero(v_total);
  {
    const auto n_irr = static_cast<Eigen::Index>(irrelevant.size());
    const Eigen::VectorXd pi = sample_dirichlet(Eigen::VectorXd::Ones(n_irr), rng);
    for (Eigen::Index i = 0; i < n_irr; ++i) truth.true_pi[irrelevant[static_cast<std::size_t>(i)]] = pi[i];
  }
  if (k_total == 1) {
    truth.true_eta = Eigen::VectorXd::Constant(1, 0.5 * (config.eta_low + config.eta_high));
  } else {
    truth.true_eta = Eigen::VectorXd::LinSpaced(k_total, config.eta_low, config.eta_high);
  }
  truth.true_delta = config.delta;

  const Eigen::VectorXd alpha =
      config.alpha.size() == 0 ? Eigen::VectorXd::Ones(k_total) : config.alpha;
  std::bernoulli_distribution coin(config.p);
  std::normal_distribution<double> noise(0.0, std::sqrt(config.delta));

  Corpus corpus;
  std::vector<std::string> tokens;
  tokens.reserve(static_cast<std::size_t>(v_total));
  for (int w = 0; w < v_total; ++w) tokens.push_back("w" + std::to_string(w));
  corpus.vocab = Vocab(std::move(tokens));
  corpus.target_type = TargetType::kReal;

  std::vector<int> counts(static_cast<std::size_t>(v_total));
  for (int d = 0; d < config.num_docs; ++d) {
    const Eigen::VectorXd theta = sample_dirichlet(alpha, rng);
    std::fill(counts.begin(), counts.end(), 0);
    for (int n = 0; n < config.doc_length; ++n) {
      const int z = sample_categorical(theta, rng);
      int word;
      if (coin(rng)) {
        word = sample_categorical(truth.true_beta.row(z).transpose(), rng);
        ++truth.beta_channel_tokens;
      } else {
        word = sample_categorical(truth.true_pi, rng);
      }
      ++counts[static_cast<std::size_t>(word)];
      ++truth.total_tokens;
    }
    std::vector<WordCount> entries;
    for (int w = 0; w < v_total; ++w) {
      if (counts[static_cast<std::size_t>(w)] > 0) entries.push_back({w, counts[static_cast<std::size_t>(w)]});
    }
    corpus.documents.push_back(Document::from_entries(std::move(entries)));
    corpus.targets.push_back(truth.true_eta.dot(theta) + noise(rng));
  }
  return {std::move(corpus), std::move(truth)};
}

double empirical_channel_rate(const Corpus& corpus, const SyntheticTruth& truth) {
  if (truth.relevance_mask.size() != corpus.vocab_size()) {
    throw Error("truth mask and corpus vocabulary differ in size");
  }
  long long on = 0;
  long long total = 0;
  for (const auto& doc : corpus.documents) {
    for (const auto& e : doc.entries) {
      total += e.count;
      if (truth.relevance_mask[static_cast<std::size_t>(e.word)]) on += e.count;
    }
  }
  if (total == 0) throw Error("corpus has no tokens");
  return static_cast<double>(on) / static_cast<double>(total);
}

void save_truth(const SyntheticTruth& truth, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (std::size_t v = 0; v < truth.relevance_mask.size(); ++v) {
    out << (v ? " " : "") << (truth.relevance_mask[v] ? 1 : 0);
  }
  out << "\nTRUE_BETA\n";
  for (Eigen::Index k = 0; k < truth.true_beta.rows(); ++k) {
    write_row(out, truth.true_beta.row(k).transpose());
  }
  out << "TRUE_PI\n";
  write_row(out, truth.true_pi);
  out << "TRUE_ETA\n";
  write_row(out, truth.true_eta);
  out << "TRUE_DELTA\n" << format_double(truth.true_delta) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

SyntheticTruth load_truth(const std::filesystem::path& path) {
  auto in = open_input(path);
  const std::string what = path.string();
  std::string line;
  SyntheticTruth truth;
  if (!read_line(in, &line)) throw Error(what + ": empty truth file");
  for (auto token : split_whitespace(line)) {
    if (token != "0" && token != "1") throw Error(what + ": relevance mask must be 0/1");
    truth.relevance_mask.push_back(token == "1");
  }
  const auto v = static_cast<Eigen::Index>(truth.relevance_mask.size());
  if (v == 0) throw Error(what + ": empty relevance mask");

  auto expect = [&](const char* name) {
    if (!read_line(in, &line) || line != name) throw Error(what + ": expected block " + name);
  };
  auto row = [&](const char* name) {
    if (!read_line(in, &line)) throw Error(what + ": truncated block " + name);
    return parse_row(line, what + " " + name);
  };
  expect("TRUE_BETA");
  std::vector<Eigen::VectorXd> rows;
  while (read_line(in, &line) && line != "TRUE_PI") {
    rows.push_back(parse_row(line, what + " TRUE_BETA"));
    if (rows.back().size() != v) throw Error(what + ": TRUE_BETA row width differs from mask");
  }
  if (line != "TRUE_PI" || rows.empty()) throw Error(what + ": malformed TRUE_BETA block");
  truth.true_beta.resize(static_cast<Eigen::Index>(rows.size()), v);
  for (std::size_t k = 0; k < rows.size(); ++k) truth.true_beta.row(static_cast<Eigen::Index>(k)) = rows[k].transpose();
  truth.true_pi = row("TRUE_PI");
  if (truth.true_pi.size() != v) throw Error(what + ": TRUE_PI width differs from mask");
  expect("TRUE_ETA");
  truth.true_eta = row("TRUE_ETA");
  expect("TRUE_DELTA");
  truth.true_delta = row("TRUE_DELTA")[0];
  return truth;
}

}  // namespace pfslda
