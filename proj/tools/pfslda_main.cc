// Command-line pipeline: simulate, train, predict, eval, select, filter, verify.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pfslda/corpus.h"
#include "pfslda/elbo.h"
#include "pfslda/evaluation.h"
#include "pfslda/model.h"
#include "pfslda/oracle.h"
#include "pfslda/prediction.h"
#include "pfslda/synthetic.h"
#include "pfslda/text_io.h"
#include "pfslda/trainers.h"

namespace fs = std::filesystem;

namespace {

using namespace pfslda;

const std::map<std::string, TargetType> kTargetTypes{{"real", TargetType::kReal},
                                                     {"binary", TargetType::kBinary}};
const std::map<std::string, TrainerKind> kTrainers{{"sgd", TrainerKind::kSgd},
                                                   {"ca", TrainerKind::kCa}};
const std::map<std::string, CoherenceFormula> kFormulas{
    {"standard", CoherenceFormula::kStandardPmi},
    {"paper", CoherenceFormula::kInvertedFraction},
    {"inverted", CoherenceFormula::kInvertedFraction}};

std::string fmt(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return buf;
}

ModelConfig config_from_checkpoint(const Checkpoint& cp) {
  ModelConfig config = cp.config;
  config.num_topics = cp.params.num_topics();
  return config;
}

void check_vocab(const Corpus& corpus, const ModelParams& params) {
  if (static_cast<int>(corpus.vocab_size()) != params.vocab_size()) {
    throw Error("corpus vocabulary has " + std::to_string(corpus.vocab_size()) +
                " words but the model has " + std::to_string(params.vocab_size()));
  }
}

std::vector<int> read_indices(const fs::path& path) {
  auto in = open_input(path);
  std::vector<int> out;
  std::string line;
  int number = 0;
  while (read_line(in, &line)) {
    ++number;
    auto tokens = split_whitespace(line);
    if (tokens.empty()) continue;
    long long value = 0;
    if (!parse_int(tokens[0], &value) || value < 0) {
      throw Error(path.string() + ":" + std::to_string(number) + ": expected a word index");
    }
    out.push_back(static_cast<int>(value));
  }
  return out;
}

void write_indices(const std::vector<int>& indices, const Vocab* vocab, const fs::path& path) {
  auto out = open_output(path);
  for (int v : indices) {
    out << v;
    if (vocab != nullptr) out << ' ' << vocab->token(static_cast<std::size_t>(v));
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string out;
  std::uint64_t seed = 0;
  SyntheticConfig synth;
  double train_frac = 0.8;
  double val_frac = 0.1;
  double test_frac = 0.1;
};

void write_dataset(const SyntheticConfig& config, int index, const SimulateArgs& args,
                   const fs::path& dir) {
  fs::create_directories(dir);
  auto [corpus, truth] = generate_dataset(config, index);
  save_corpus(corpus, dir / "vocab.txt", dir / "docs.txt", dir / "targets.txt");
  save_truth(truth, dir / "truth.txt");
  auto [train, val, test] = split_corpus(corpus, args.train_frac, args.val_frac, args.test_frac,
                                         config.seed + static_cast<std::uint64_t>(index));
  save_documents(train.documents, dir / "train_docs.txt");
  save_targets(train.targets, dir / "train_targets.txt");
  save_documents(val.documents, dir / "val_docs.txt");
  save_targets(val.targets, dir / "val_targets.txt");
  save_documents(test.documents, dir / "test_docs.txt");
  save_targets(test.targets, dir / "test_targets.txt");
}

void run_simulate(const SimulateArgs& args) {
  SyntheticConfig config = args.synth;
  config.seed = args.seed;
  config.validate();
  const fs::path out(args.out);
  if (config.datasets == 1) {
    write_dataset(config, 0, args, out);
    return;
  }
  for (int i = 0; i < config.datasets; ++i) {
    write_dataset(config, i, args, out / ("dataset_" + std::to_string(i)));
  }
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string corpus, targets, vocab, out, trace, val_corpus, val_targets;
  int k = 5;
  double p = 0.25;
  std::string channel = "on";
  TargetType target_type = TargetType::kReal;
  std::uint64_t seed = 0;
  TrainConfig train;
};

void run_train(const TrainArgs& args) {
  const Corpus corpus = load_corpus(args.vocab, args.corpus, args.targets, args.target_type);
  Corpus val;
  const bool has_val = !args.val_corpus.empty();
  if (has_val != !args.val_targets.empty()) {
    throw Error("--val-corpus and --val-targets must be given together");
  }
  if (has_val) val = load_corpus(args.vocab, args.val_corpus, args.val_targets, args.target_type);

  ModelConfig model;
  model.num_topics = args.k;
  model.p = args.channel == "on" ? args.p : 1.0;
  model.target_type = args.target_type;
  model.channel_enabled = args.channel == "on";
  model.seed = args.seed;
  TrainConfig train = args.train;
  train.seed = args.seed;

  TrainResult result = pfslda::train(corpus, has_val ? &val : nullptr, model, train);
  Checkpoint cp{model, result.params, result.state.varphi_logits};
  save_checkpoint(cp, args.out);
  if (!args.trace.empty()) result.trace.write_csv(args.trace);
  const auto& last = result.trace.records.back();
  std::cout << "trained " << to_string(train.trainer) << " for " << result.epochs_run
            << (train.trainer == TrainerKind::kSgd ? " epochs" : " sweeps")
            << (result.converged ? " (converged)" : "") << ", final ELBO " << fmt(result.elbo);
  if (has_val) {
    std::cout << ", validation " << (args.target_type == TargetType::kReal ? "RMSE " : "AUC ")
              << fmt(last.val_metric);
  }
  std::cout << '\n';
}

// ----------------------------------------------------------------- predict

struct PredictArgs {
  std::string model, corpus, vocab, out;
};

void run_predict(const PredictArgs& args) {
  const Checkpoint cp = load_checkpoint(args.model);
  const Corpus corpus = load_documents(args.vocab, args.corpus);
  check_vocab(corpus, cp.params);
  const std::vector<double> scores = predict_corpus(corpus, cp.params, config_from_checkpoint(cp));
  save_targets(scores, args.out);
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string model, corpus, targets, vocab, metrics = "coherence,rmse,selected,overlap";
  std::string truth, csv;
  int top_n = 50;
  double threshold = 0.99;
  CoherenceFormula formula = CoherenceFormula::kStandardPmi;
};

void run_eval(const EvalArgs& args) {
  const Checkpoint cp = load_checkpoint(args.model);
  const ModelConfig config = config_from_checkpoint(cp);
  const Corpus corpus = load_corpus(args.vocab, args.corpus, args.targets, config.target_type);
  check_vocab(corpus, cp.params);

  std::vector<std::string> wanted;
  {
    std::stringstream ss(args.metrics);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) wanted.push_back(item);
    }
  }
  if (wanted.empty()) throw Error("--metrics lists no metrics");

  std::vector<std::pair<std::string, double>> rows;
  const Eigen::VectorXd varphi =
      config.channel_enabled
          ? Eigen::VectorXd(cp.varphi_logits.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); }))
          : Eigen::VectorXd::Ones(cp.params.vocab_size());
  const std::vector<int> selected = select_relevant(varphi, args.threshold);
  std::vector<double> scores;
  bool have_selection_metrics = false;
  SelectionMetrics sm;

  for (const auto& name : wanted) {
    if (name == "coherence") {
      const int top_n = std::min<int>(args.top_n, cp.params.vocab_size());
      const CoherenceReport report = topic_coherence(cp.params.beta(), corpus, top_n, args.formula);
      for (std::size_t k = 0; k < report.per_topic.size(); ++k) {
        rows.emplace_back("coherence_topic_" + std::to_string(k), report.per_topic[k]);
      }
      rows.emplace_back("coherence_mean", report.mean);
    } else if (name == "rmse" || name == "auc") {
      if (scores.empty()) scores = predict_corpus(corpus, cp.params, config);
      rows.emplace_back(name, name == "rmse" ? rmse(scores, corpus.targets)
                                             : auc(scores, corpus.targets));
    } else if (name == "precision" || name == "recall") {
      if (!have_selection_metrics) {
        const fs::path truth_path =
            args.truth.empty() ? fs::path(args.corpus).parent_path() / "truth.txt" : fs::path(args.truth);
        const SyntheticTruth truth = load_truth(truth_path);
        if (truth.relevance_mask.size() != corpus.vocab_size()) {
          throw Error("truth mask size does not match the vocabulary");
        }
        sm = selection_metrics(selected, truth.relevant_words());
        have_selection_metrics = true;
      }
      rows.emplace_back(name, name == "precision" ? sm.precision : sm.recall);
    } else if (name == "selected") {
      rows.emplace_back("selected_count", static_cast<double>(selected.size()));
    } else if (name == "overlap") {
      rows.emplace_back("disjointness_overlap", disjointness_overlap(cp.params.beta(), cp.params.pi()));
    } else {
      throw Error("unknown metric '" + name +
                  "' (expected coherence, rmse, auc, precision, recall, selected, overlap)");
    }
  }

  for (const auto& [name, value] : rows) std::cout << name << ' ' << fmt(value) << '\n';
  if (have_selection_metrics && sm.empty_selection) {
    std::cout << "note: empty selection, precision reported as 1 by convention\n";
  }
  if (!args.csv.empty()) {
    auto out = open_output(args.csv);
    out << "metric,value\n";
    for (const auto& [name, value] : rows) out << name << ',' << format_double(value) << '\n';
    if (!out) throw Error("failed writing " + args.csv);
  }
}

// ------------------------------------------------------------------ select

struct SelectArgs {
  std::string model, out, vocab;
  double threshold = 0.99;
};

void run_select(const SelectArgs& args) {
  const Checkpoint cp = load_checkpoint(args.model);
  if (!cp.config.channel_enabled) throw Error("model was trained without the switch channel");
  const Eigen::VectorXd varphi =
      cp.varphi_logits.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  const std::vector<int> selected = select_relevant(varphi, args.threshold);
  Vocab vocab;
  if (!args.vocab.empty()) {
    vocab = load_vocab(args.vocab);
    if (static_cast<int>(vocab.size()) != cp.params.vocab_size()) {
      throw Error("vocabulary size does not match the model");
    }
  }
  write_indices(selected, args.vocab.empty() ? nullptr : &vocab, args.out);
  std::cout << "selected " << selected.size() << " of " << cp.params.vocab_size() << " words\n";
}

// ------------------------------------------------------------------ filter

struct FilterArgs {
  std::string corpus, targets, vocab, by, model, out, stopwords, keep;
  int n = 0;
  double threshold = 0.99;
  double max_doc_frac = 0.5;
  int min_doc_count = 10;
  TargetType target_type = TargetType::kReal;
};

void run_filter(const FilterArgs& args) {
  Corpus corpus = args.targets.empty()
                      ? load_documents(args.vocab, args.corpus)
                      : load_corpus(args.vocab, args.corpus, args.targets, args.target_type);
  std::vector<bool> mask;
  if (args.by == "varphi" || (args.by == "correlation" && args.n == 0)) {
    if (args.model.empty()) throw Error("--model is required for this filter");
  }
  auto varphi_selection = [&] {
    const Checkpoint cp = load_checkpoint(args.model);
    check_vocab(corpus, cp.params);
    const Eigen::VectorXd varphi =
        cp.varphi_logits.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    return select_relevant(varphi, args.threshold);
  };

  if (args.by == "varphi") {
    mask = mask_from_indices(varphi_selection(), corpus.vocab_size());
  } else if (args.by == "correlation") {
    if (args.targets.empty()) throw Error("--targets is required for the correlation filter");
    const int n = args.n > 0 ? args.n : static_cast<int>(varphi_selection().size());
    mask = mask_from_indices(correlation_topn(corpus, n), corpus.vocab_size());
  } else if (args.by == "frequency") {
    std::set<std::string> stop;
    if (!args.stopwords.empty()) stop = load_stopwords(args.stopwords);
    mask = build_vocab_filter(corpus, stop, args.max_doc_frac, args.min_doc_count);
  } else if (args.by == "list") {
    if (args.keep.empty()) throw Error("--keep is required for the list filter");
    mask = mask_from_indices(read_indices(args.keep), corpus.vocab_size());
  }

  const Corpus filtered = apply_vocab_mask(corpus, mask);
  const fs::path out(args.out);
  fs::create_directories(out);
  save_vocab(filtered.vocab, out / "vocab.txt");
  save_documents(filtered.documents, out / "docs.txt");
  if (!args.targets.empty()) save_targets(filtered.targets, out / "targets.txt");
  std::vector<int> kept;
  for (std::size_t v = 0; v < mask.size(); ++v) {
    if (mask[v]) kept.push_back(static_cast<int>(v));
  }
  write_indices(kept, nullptr, out / "keep.txt");
  std::cout << "kept " << kept.size() << " of " << corpus.vocab_size() << " words\n";
}

// ------------------------------------------------------------------ verify

struct VerifyArgs {
  std::uint64_t seed = 0;
  int samples = 100000;
};

bool run_verify(const VerifyArgs& args) {
  bool ok = true;
  for (const auto& c : run_verify_suite(args.seed, args.samples)) {
    std::cout << c.name << ' ' << fmt(c.value) << ' ' << fmt(c.reference) << ' '
              << (c.pass ? "PASS" : "FAIL") << '\n';
    ok = ok && c.pass;
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prediction-focused supervised LDA"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate synthetic datasets with known truth");
  simulate->add_option("--out", sim.out, "Output directory")->required();
  simulate->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  simulate->add_option("--v", sim.synth.vocab_size, "Vocabulary size")->capture_default_str();
  simulate->add_option("--relevant", sim.synth.relevant_count, "Number of relevant words")
      ->capture_default_str();
  simulate->add_option("--k", sim.synth.num_topics, "Number of topics")->capture_default_str();
  simulate->add_option("--p", sim.synth.p, "Word inclusion prior")->capture_default_str();
  simulate->add_option("--docs", sim.synth.num_docs, "Documents per dataset")->capture_default_str();
  simulate->add_option("--doc-len", sim.synth.doc_length, "Tokens per document")->capture_default_str();
  simulate->add_option("--delta", sim.synth.delta, "Target noise variance")->capture_default_str();
  simulate->add_option("--datasets", sim.synth.datasets,
                       "Number of datasets; more than one writes dataset_<i> subdirectories")
      ->capture_default_str();

  TrainArgs tr;
  std::string trainer_name = "sgd";
  auto* train = app.add_subcommand("train", "Fit a model");
  train->add_option("--corpus", tr.corpus, "Documents file")->required()->check(CLI::ExistingFile);
  train->add_option("--targets", tr.targets, "Targets file")->required()->check(CLI::ExistingFile);
  train->add_option("--vocab", tr.vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  train->add_option("--k", tr.k, "Number of topics")->capture_default_str();
  train->add_option("--p", tr.p, "Word inclusion prior")->capture_default_str();
  train->add_option("--channel", tr.channel, "Switch channel; off gives plain sLDA")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  train->add_option("--trainer", tr.train.trainer, "Optimizer")
      ->transform(CLI::CheckedTransformer(kTrainers, CLI::ignore_case))
      ->default_str("sgd");
  train->add_option("--epochs", tr.train.epochs, "SGD epochs")->capture_default_str();
  train->add_option("--batch-size", tr.train.batch_size, "SGD batch size")->capture_default_str();
  train->add_option("--lr", tr.train.learning_rate, "ADAM step size")->capture_default_str();
  train->add_option("--sweeps", tr.train.ca_sweeps, "Coordinate-ascent sweeps")->capture_default_str();
  train->add_option("--tol", tr.train.convergence_tol,
                    "Relative ELBO change that stops training; 0 disables")
      ->capture_default_str();
  train->add_option("--seed", tr.seed, "Random seed")->capture_default_str();
  train->add_option("--target-type", tr.target_type, "Target type")
      ->transform(CLI::CheckedTransformer(kTargetTypes, CLI::ignore_case))
      ->default_str("real");
  train->add_option("--out", tr.out, "Model checkpoint to write")->required();
  train->add_option("--trace", tr.trace, "Training trace CSV to write");
  train->add_option("--val-corpus", tr.val_corpus, "Validation documents")->check(CLI::ExistingFile);
  train->add_option("--val-targets", tr.val_targets, "Validation targets")->check(CLI::ExistingFile);
  train->add_flag("--early-stopping", tr.train.early_stopping,
                  "Stop when the validation metric stalls; needs a validation set");
  train->add_option("--restarts", tr.train.restarts,
                    "Independent initializations; the highest final ELBO is kept")
      ->capture_default_str();
  train->add_option("--workers", tr.train.workers, "Threads for ELBO and gradient sums")
      ->capture_default_str();

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Predict targets for documents");
  predict->add_option("--model", pr.model, "Model checkpoint")->required()->check(CLI::ExistingFile);
  predict->add_option("--corpus", pr.corpus, "Documents file")->required()->check(CLI::ExistingFile);
  predict->add_option("--vocab", pr.vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  predict->add_option("--out", pr.out, "Scores file, one per line")->required();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Evaluate a trained model");
  eval->add_option("--model", ev.model, "Model checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--corpus", ev.corpus, "Documents file")->required()->check(CLI::ExistingFile);
  eval->add_option("--targets", ev.targets, "Targets file")->required()->check(CLI::ExistingFile);
  eval->add_option("--vocab", ev.vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  eval->add_option("--metrics", ev.metrics,
                   "Comma-separated: coherence,rmse,auc,precision,recall,selected,overlap")
      ->capture_default_str();
  eval->add_option("--top-n", ev.top_n, "Top words per topic for coherence")->capture_default_str();
  eval->add_option("--threshold", ev.threshold, "Relevance threshold on varphi")->capture_default_str();
  eval->add_option("--coherence-formula", ev.formula, "PMI orientation")
      ->transform(CLI::CheckedTransformer(kFormulas, CLI::ignore_case))
      ->default_str("standard");
  eval->add_option("--truth", ev.truth,
                   "Synthetic truth file for precision/recall (default: truth.txt next to --corpus)")
      ->check(CLI::ExistingFile);
  eval->add_option("--csv", ev.csv, "Also write the report as CSV");

  SelectArgs se;
  auto* select = app.add_subcommand("select", "List words with varphi above the threshold");
  select->add_option("--model", se.model, "Model checkpoint")->required()->check(CLI::ExistingFile);
  select->add_option("--threshold", se.threshold, "Relevance threshold")->capture_default_str();
  select->add_option("--out", se.out, "Selected word indices, one per line")->required();
  select->add_option("--vocab", se.vocab, "Vocabulary file; adds tokens to the output")
      ->check(CLI::ExistingFile);

  FilterArgs fi;
  auto* filter = app.add_subcommand("filter", "Restrict a corpus to a subset of its vocabulary");
  filter->add_option("--corpus", fi.corpus, "Documents file")->required()->check(CLI::ExistingFile);
  filter->add_option("--vocab", fi.vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  filter->add_option("--targets", fi.targets, "Targets file, copied to the output")
      ->check(CLI::ExistingFile);
  filter->add_option("--target-type", fi.target_type, "Target type")
      ->transform(CLI::CheckedTransformer(kTargetTypes, CLI::ignore_case))
      ->default_str("real");
  filter->add_option("--by", fi.by, "Filter rule")
      ->required()
      ->check(CLI::IsMember({"varphi", "correlation", "frequency", "list"}));
  filter->add_option("--model", fi.model, "Model checkpoint for the varphi rule")
      ->check(CLI::ExistingFile);
  filter->add_option("--n", fi.n,
                     "Words kept by the correlation rule; 0 matches the varphi selection of --model")
      ->capture_default_str();
  filter->add_option("--threshold", fi.threshold, "Relevance threshold for the varphi rule")
      ->capture_default_str();
  filter->add_option("--stopwords", fi.stopwords, "Stopword list for the frequency rule")
      ->check(CLI::ExistingFile);
  filter->add_option("--max-doc-frac", fi.max_doc_frac,
                     "Frequency rule: drop words in more than this fraction of documents")
      ->capture_default_str();
  filter->add_option("--min-doc-count", fi.min_doc_count,
                     "Frequency rule: drop words in fewer documents than this")
      ->capture_default_str();
  filter->add_option("--keep", fi.keep, "Word indices to keep for the list rule")
      ->check(CLI::ExistingFile);
  filter->add_option("--out", fi.out, "Output directory")->required();

  VerifyArgs ve;
  auto* verify = app.add_subcommand("verify", "Compare the ELBO and its gradients against oracles");
  verify->add_option("--seed", ve.seed, "Random seed")->capture_default_str();
  verify->add_option("--samples", ve.samples, "Monte-Carlo samples")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) run_simulate(sim);
    if (*train) run_train(tr);
    if (*predict) run_predict(pr);
    if (*eval) run_eval(ev);
    if (*select) run_select(se);
    if (*filter) run_filter(fi);
    if (*verify && !run_verify(ve)) return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
