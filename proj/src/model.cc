#include "pfslda/model.h"

#include <cmath>
#include <map>
#include <random>

#include "pfslda/special.h"
#include "pfslda/text_io.h"

namespace pfslda {

Eigen::VectorXd ModelConfig::alpha_vector() const {
  if (alpha.size() == 0) return Eigen::VectorXd::Ones(num_topics);
  return alpha;
}

void ModelConfig::validate() const {
  if (num_topics < 1) throw Error("number of topics must be >= 1");
  if (!(p > 0.0 && p <= 1.0)) throw Error("word inclusion prior p must lie in (0, 1]");
  if (alpha.size() != 0) {
    if (alpha.size() != num_topics) throw Error("alpha length must equal K");
    if ((alpha.array() <= 0.0).any()) throw Error("alpha entries must be positive");
  }
}

Eigen::VectorXd softmax_simplex(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  Eigen::VectorXd out = (logits.array() - logits.maxCoeff()).exp();
  out /= out.sum();
  return out;
}

Eigen::VectorXd log_softmax(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  return logits.array() - log_sum_exp(logits);
}

Eigen::MatrixXd ModelParams::beta() const {
  Eigen::MatrixXd out(beta_logits.rows(), beta_logits.cols());
  for (Eigen::Index k = 0; k < beta_logits.rows(); ++k) {
    out.row(k) = softmax_simplex(beta_logits.row(k).transpose()).transpose();
  }
  return out;
}

Eigen::MatrixXd ModelParams::log_beta() const {
  Eigen::MatrixXd out(beta_logits.rows(), beta_logits.cols());
  for (Eigen::Index k = 0; k < beta_logits.rows(); ++k) {
    out.row(k) = log_softmax(beta_logits.row(k).transpose()).transpose();
  }
  return out;
}

Eigen::VectorXd ModelParams::pi() const { return softmax_simplex(pi_logits); }
Eigen::VectorXd ModelParams::log_pi() const { return log_softmax(pi_logits); }
double ModelParams::delta() const { return std::exp(log_delta); }

Eigen::VectorXd VariationalState::varphi() const {
  return varphi_logits.unaryExpr([](double x) { return sigmoid(x); });
}

VariationalState init_state(const ModelConfig& config,
                            const std::vector<Document>& docs, int vocab_size) {
  const int k = config.num_topics;
  const Eigen::VectorXd alpha = config.alpha_vector();
  VariationalState state;
  state.gamma.resize(static_cast<Eigen::Index>(docs.size()), k);
  state.phi.reserve(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const double share = static_cast<double>(docs[d].total) / k;
    state.gamma.row(static_cast<Eigen::Index>(d)) = (alpha.array() + share).transpose();
    state.phi.push_back(Eigen::MatrixXd::Constant(
        static_cast<Eigen::Index>(docs[d].entries.size()), k, 1.0 / k));
  }
  state.varphi_logits = Eigen::VectorXd::Zero(vocab_size);
  return state;
}

std::pair<ModelParams, VariationalState> init_params(
    const ModelConfig& config, const std::vector<Document>& docs,
    int vocab_size, std::uint64_t seed) {
  config.validate();
  if (vocab_size < 1) throw Error("vocabulary size must be >= 1");
  const int k = config.num_topics;
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> noise(1.0);
  std::normal_distribution<double> small(0.0, 0.1);

  ModelParams params;
  params.p = config.p;
  params.beta_logits.resize(k, vocab_size);
  for (int i = 0; i < k; ++i) {
    for (int v = 0; v < vocab_size; ++v) params.beta_logits(i, v) = std::log1p(noise(rng));
  }
  params.pi_logits.resize(vocab_size);
  for (int v = 0; v < vocab_size; ++v) params.pi_logits[v] = std::log1p(noise(rng));
  params.eta.resize(k);
  for (int i = 0; i < k; ++i) params.eta[i] = small(rng);
  params.log_delta = 0.0;

  return {std::move(params), init_state(config, docs, vocab_size)};
}

Eigen::VectorXd expected_log_theta(const Eigen::Ref<const Eigen::VectorXd>& gamma) {
  if ((gamma.array() <= 0.0).any() || !gamma.allFinite()) {
    throw Error("Dirichlet parameters must be positive and finite");
  }
  const double psi_total = digamma(gamma.sum());
  Eigen::VectorXd out(gamma.size());
  for (Eigen::Index i = 0; i < gamma.size(); ++i) out[i] = digamma(gamma[i]) - psi_total;
  return out;
}

Eigen::MatrixXd expected_theta_outer(const Eigen::Ref<const Eigen::VectorXd>& gamma) {
  if ((gamma.array() <= 0.0).any() || !gamma.allFinite()) {
    throw Error("Dirichlet parameters must be positive and finite");
  }
  const double total = gamma.sum();
  const Eigen::VectorXd mean = gamma / total;
  Eigen::MatrixXd out = mean * mean.transpose();
  const double scale = 1.0 / (total + 1.0);
  out -= scale * (mean * mean.transpose());
  out.diagonal() += scale * mean;
  return out;
}

namespace {

constexpr const char* kHeader = "pfslda-model v1";

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path) {
  const auto& c = checkpoint.config;
  const auto& m = checkpoint.params;
  auto out = open_output(path);
  out << kHeader << '\n';
  out << "K=" << m.num_topics() << " V=" << m.vocab_size()
      << " p=" << format_double(m.p) << " target_type=" << to_string(c.target_type)
      << " channel=" << (c.channel_enabled ? 1 : 0) << '\n';
  out << "BETA_LOGITS\n";
  for (Eigen::Index k = 0; k < m.beta_logits.rows(); ++k) {
    write_row(out, m.beta_logits.row(k).transpose());
  }
  out << "PI_LOGITS\n";
  write_row(out, m.pi_logits);
  out << "ETA\n";
  write_row(out, m.eta);
  out << "LOG_DELTA\n" << format_double(m.log_delta) << '\n';
  out << "VARPHI_LOGITS\n";
  write_row(out, checkpoint.varphi_logits);
  if (!out) throw Error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto in = open_input(path);
  const std::string what = path.string();
  std::string line;
  if (!read_line(in, &line) || line != kHeader) {
    throw Error(what + ": missing '" + std::string(kHeader) + "' header");
  }
  if (!read_line(in, &line)) throw Error(what + ": missing configuration line");
  std::map<std::string, std::string> fields;
  for (auto token : split_whitespace(line)) {
    auto eq = token.find('=');
    if (eq == std::string_view::npos) {
      throw Error(what + ": malformed configuration field '" + std::string(token) + "'");
    }
    fields[std::string(token.substr(0, eq))] = std::string(token.substr(eq + 1));
  }
  for (const char* key : {"K", "V", "p", "target_type", "channel"}) {
    if (fields.count(key) == 0) throw Error(what + ": missing field " + key);
  }
  long long k = 0;
  long long v = 0;
  double p = 0.0;
  if (!parse_int(fields["K"], &k) || !parse_int(fields["V"], &v) ||
      !parse_double(fields["p"], &p) || k < 1 || v < 1) {
    throw Error(what + ": invalid K, V or p");
  }
  if (fields["channel"] != "0" && fields["channel"] != "1") {
    throw Error(what + ": channel must be 0 or 1");
  }

  Checkpoint cp;
  cp.config.num_topics = static_cast<int>(k);
  cp.config.p = p;
  cp.config.target_type = parse_target_type(fields["target_type"]);
  cp.config.channel_enabled = fields["channel"] == "1";
  cp.config.validate();
  cp.params.p = p;

  auto expect_block = [&](const char* name) {
    if (!read_line(in, &line) || line != name) {
      throw Error(what + ": expected block " + name);
    }
  };
  auto read_row = [&](const char* name, Eigen::Index expected) {
    if (!read_line(in, &line)) throw Error(what + ": truncated block " + name);
    Eigen::VectorXd row = parse_row(line, what + " " + name);
    if (row.size() != expected) {
      throw Error(what + ": block " + std::string(name) + " expects " +
                  std::to_string(expected) + " values, got " + std::to_string(row.size()));
    }
    return row;
  };

  expect_block("BETA_LOGITS");
  cp.params.beta_logits.resize(k, v);
  for (Eigen::Index i = 0; i < k; ++i) {
    cp.params.beta_logits.row(i) = read_row("BETA_LOGITS", v).transpose();
  }
  expect_block("PI_LOGITS");
  cp.params.pi_logits = read_row("PI_LOGITS", v);
  expect_block("ETA");
  cp.params.eta = read_row("ETA", k);
  expect_block("LOG_DELTA");
  cp.params.log_delta = read_row("LOG_DELTA", 1)[0];
  expect_block("VARPHI_LOGITS");
  cp.varphi_logits = read_row("VARPHI_LOGITS", v);
  return cp;
}

}  // namespace pfslda
