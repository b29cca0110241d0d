#include "pfslda/corpus.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <unordered_set>

#include "pfslda/text_io.h"

namespace pfslda {

namespace {

std::string where(const std::filesystem::path& path, std::size_t line_no) {
  return path.string() + ":" + std::to_string(line_no + 1);
}

std::vector<Document> load_docs_file(const std::filesystem::path& path,
                                     std::size_t vocab_size) {
  auto in = open_input(path);
  std::vector<Document> docs;
  std::string line;
  for (std::size_t line_no = 0; read_line(in, &line); ++line_no) {
    std::map<int, int> counts;
    for (auto token : split_whitespace(line)) {
      auto colon = token.find(':');
      long long index = 0;
      long long count = 0;
      if (colon == std::string_view::npos ||
          !parse_int(token.substr(0, colon), &index) ||
          !parse_int(token.substr(colon + 1), &count)) {
        throw Error(where(path, line_no) + ": malformed entry '" +
                    std::string(token) + "', expected index:count");
      }
      if (index < 0 || static_cast<std::size_t>(index) >= vocab_size) {
        throw Error(where(path, line_no) + ": word index " +
                    std::to_string(index) + " out of range for V=" +
                    std::to_string(vocab_size));
      }
      if (count < 1) {
        throw Error(where(path, line_no) + ": count must be >= 1, got " +
                    std::to_string(count));
      }
      counts[static_cast<int>(index)] += static_cast<int>(count);
    }
    std::vector<WordCount> entries;
    entries.reserve(counts.size());
    for (auto [w, c] : counts) entries.push_back({w, c});
    docs.push_back(Document::from_entries(std::move(entries)));
  }
  return docs;
}

std::vector<double> load_targets_file(const std::filesystem::path& path,
                                      TargetType type) {
  auto in = open_input(path);
  std::vector<double> targets;
  std::string line;
  for (std::size_t line_no = 0; read_line(in, &line); ++line_no) {
    auto tokens = split_whitespace(line);
    double value = 0.0;
    if (tokens.size() != 1 || !parse_double(tokens[0], &value) ||
        !std::isfinite(value)) {
      throw Error(where(path, line_no) + ": expected one finite number");
    }
    if (type == TargetType::kBinary && value != 0.0 && value != 1.0) {
      throw Error(where(path, line_no) + ": binary target must be 0 or 1");
    }
    targets.push_back(value);
  }
  return targets;
}

}  // namespace

std::string to_string(TargetType type) {
  return type == TargetType::kReal ? "real" : "binary";
}

TargetType parse_target_type(const std::string& name) {
  if (name == "real") return TargetType::kReal;
  if (name == "binary") return TargetType::kBinary;
  throw Error("unknown target type '" + name + "' (expected real|binary)");
}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty()) throw Error("vocabulary must contain at least one token");
  std::unordered_set<std::string> seen;
  for (const auto& t : tokens_) {
    if (t.empty()) throw Error("vocabulary contains an empty token");
    if (!seen.insert(t).second) throw Error("duplicate vocabulary token '" + t + "'");
  }
}

Document Document::from_entries(std::vector<WordCount> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const WordCount& a, const WordCount& b) { return a.word < b.word; });
  Document doc;
  for (const auto& e : entries) {
    if (e.count <= 0) continue;
    if (!doc.entries.empty() && doc.entries.back().word == e.word) {
      doc.entries.back().count += e.count;
    } else {
      doc.entries.push_back(e);
    }
    doc.total += e.count;
  }
  return doc;
}

void Corpus::validate() const {
  if (documents.size() != targets.size()) {
    throw Error("corpus has " + std::to_string(documents.size()) +
                " documents but " + std::to_string(targets.size()) + " targets");
  }
  for (std::size_t d = 0; d < documents.size(); ++d) {
    int total = 0;
    for (const auto& e : documents[d].entries) {
      if (e.word < 0 || static_cast<std::size_t>(e.word) >= vocab.size()) {
        throw Error("document " + std::to_string(d) + " references word " +
                    std::to_string(e.word) + " outside the vocabulary");
      }
      total += e.count;
    }
    if (total != documents[d].total) {
      throw Error("document " + std::to_string(d) + " has inconsistent total");
    }
    if (target_type == TargetType::kBinary && targets[d] != 0.0 && targets[d] != 1.0) {
      throw Error("binary target " + std::to_string(d) + " is not 0 or 1");
    }
  }
}

Vocab load_vocab(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::string> tokens;
  std::string line;
  for (std::size_t line_no = 0; read_line(in, &line); ++line_no) {
    if (line.empty()) throw Error(where(path, line_no) + ": empty vocabulary token");
    tokens.push_back(line);
  }
  try {
    return Vocab(std::move(tokens));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::set<std::string> load_stopwords(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::set<std::string> words;
  std::string line;
  while (read_line(in, &line)) {
    for (auto token : split_whitespace(line)) words.emplace(token);
  }
  return words;
}

Corpus load_corpus(const std::filesystem::path& vocab_path,
                   const std::filesystem::path& docs_path,
                   const std::filesystem::path& targets_path,
                   TargetType target_type) {
  Corpus corpus;
  corpus.vocab = load_vocab(vocab_path);
  corpus.documents = load_docs_file(docs_path, corpus.vocab.size());
  corpus.targets = load_targets_file(targets_path, target_type);
  corpus.target_type = target_type;
  if (corpus.documents.size() != corpus.targets.size()) {
    throw Error(docs_path.string() + " has " + std::to_string(corpus.documents.size()) +
                " documents but " + targets_path.string() + " has " +
                std::to_string(corpus.targets.size()) + " targets");
  }
  return corpus;
}

Corpus load_documents(const std::filesystem::path& vocab_path,
                      const std::filesystem::path& docs_path) {
  Corpus corpus;
  corpus.vocab = load_vocab(vocab_path);
  corpus.documents = load_docs_file(docs_path, corpus.vocab.size());
  corpus.targets.assign(corpus.documents.size(), 0.0);
  return corpus;
}

void save_vocab(const Vocab& vocab, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& t : vocab.tokens()) out << t << '\n';
}

void save_documents(const std::vector<Document>& docs,
                    const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& doc : docs) {
    bool first = true;
    for (const auto& e : doc.entries) {
      if (!first) out << ' ';
      out << e.word << ':' << e.count;
      first = false;
    }
    out << '\n';
  }
}

void save_targets(const std::vector<double>& targets,
                  const std::filesystem::path& path) {
  auto out = open_output(path);
  for (double y : targets) out << format_double(y) << '\n';
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& vocab_path,
                 const std::filesystem::path& docs_path,
                 const std::filesystem::path& targets_path) {
  save_vocab(corpus.vocab, vocab_path);
  save_documents(corpus.documents, docs_path);
  save_targets(corpus.targets, targets_path);
}

std::vector<int> document_frequency(const Corpus& corpus) {
  std::vector<int> df(corpus.vocab_size(), 0);
  for (const auto& doc : corpus.documents) {
    for (const auto& e : doc.entries) ++df[static_cast<std::size_t>(e.word)];
  }
  return df;
}

std::vector<bool> build_vocab_filter(const Corpus& corpus,
                                     const std::set<std::string>& stopwords,
                                     double max_doc_frac, int min_doc_count) {
  if (!(max_doc_frac > 0.0 && max_doc_frac <= 1.0)) {
    throw Error("max_doc_frac must lie in (0, 1]");
  }
  if (min_doc_count < 0) throw Error("min_doc_count must be >= 0");
  const auto df = document_frequency(corpus);
  const double max_df = max_doc_frac * static_cast<double>(corpus.num_docs());
  std::vector<bool> mask(corpus.vocab_size(), true);
  for (std::size_t v = 0; v < mask.size(); ++v) {
    if (stopwords.count(corpus.vocab.token(v)) > 0 ||
        static_cast<double>(df[v]) > max_df || df[v] < min_doc_count) {
      mask[v] = false;
    }
  }
  return mask;
}

Corpus apply_vocab_mask(const Corpus& corpus, const std::vector<bool>& mask) {
  if (mask.size() != corpus.vocab_size()) {
    throw Error("mask length " + std::to_string(mask.size()) +
                " does not match vocabulary size " +
                std::to_string(corpus.vocab_size()));
  }
  std::vector<int> new_index(mask.size(), -1);
  std::vector<std::string> tokens;
  for (std::size_t v = 0; v < mask.size(); ++v) {
    if (mask[v]) {
      new_index[v] = static_cast<int>(tokens.size());
      tokens.push_back(corpus.vocab.token(v));
    }
  }
  if (tokens.empty()) throw Error("vocabulary mask removes every word");

  Corpus out;
  out.vocab = Vocab(std::move(tokens));
  out.targets = corpus.targets;
  out.target_type = corpus.target_type;
  out.documents.reserve(corpus.num_docs());
  for (const auto& doc : corpus.documents) {
    std::vector<WordCount> entries;
    for (const auto& e : doc.entries) {
      const int w = new_index[static_cast<std::size_t>(e.word)];
      if (w >= 0) entries.push_back({w, e.count});
    }
    out.documents.push_back(Document::from_entries(std::move(entries)));
  }
  return out;
}

std::vector<bool> mask_from_indices(const std::vector<int>& indices,
                                    std::size_t vocab_size) {
  std::vector<bool> mask(vocab_size, false);
  for (int v : indices) {
    if (v < 0 || static_cast<std::size_t>(v) >= vocab_size) {
      throw Error("word index " + std::to_string(v) + " out of range");
    }
    mask[static_cast<std::size_t>(v)] = true;
  }
  return mask;
}

SplitIndices split_indices(std::size_t num_docs, double train_frac,
                           double val_frac, double test_frac,
                           std::uint64_t seed) {
  if (train_frac < 0 || val_frac < 0 || test_frac < 0 ||
      std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
    throw Error("split fractions must be nonnegative and sum to 1");
  }
  if (train_frac > 0 && val_frac > 0 && test_frac > 0 && num_docs < 3) {
    throw Error("cannot split fewer than 3 documents three ways");
  }
  const double m = static_cast<double>(num_docs);
  const auto n_val = static_cast<std::size_t>(std::floor(val_frac * m + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(test_frac * m + 1e-9));
  const std::size_t n_train = num_docs - n_val - n_test;

  std::vector<std::size_t> perm(num_docs);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  SplitIndices out;
  out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                 perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  out.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

Corpus subset(const Corpus& corpus, const std::vector<std::size_t>& indices) {
  Corpus out;
  out.vocab = corpus.vocab;
  out.target_type = corpus.target_type;
  out.documents.reserve(indices.size());
  out.targets.reserve(indices.size());
  for (auto i : indices) {
    out.documents.push_back(corpus.documents.at(i));
    out.targets.push_back(corpus.targets.at(i));
  }
  return out;
}

std::tuple<Corpus, Corpus, Corpus> split_corpus(const Corpus& corpus,
                                                double train_frac,
                                                double val_frac,
                                                double test_frac,
                                                std::uint64_t seed) {
  auto idx = split_indices(corpus.num_docs(), train_frac, val_frac, test_frac, seed);
  return {subset(corpus, idx.train), subset(corpus, idx.val), subset(corpus, idx.test)};
}

}  // namespace pfslda
