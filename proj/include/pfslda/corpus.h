#ifndef PFSLDA_CORPUS_H_
#define PFSLDA_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "pfslda/error.h"

namespace pfslda {

enum class TargetType { kReal, kBinary };

std::string to_string(TargetType type);
TargetType parse_target_type(const std::string& name);

class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
};

struct WordCount {
  int word = 0;
  int count = 0;

  bool operator==(const WordCount&) const = default;
};

// Sparse bag of words. Entries are sorted by word index with no duplicates.
struct Document {
  std::vector<WordCount> entries;
  int total = 0;

  static Document from_entries(std::vector<WordCount> entries);
  bool empty() const { return entries.empty(); }
  bool operator==(const Document&) const = default;
};

struct Corpus {
  Vocab vocab;
  std::vector<Document> documents;
  std::vector<double> targets;
  TargetType target_type = TargetType::kReal;

  std::size_t num_docs() const { return documents.size(); }
  std::size_t vocab_size() const { return vocab.size(); }

  // Throws if counts reference words outside the vocabulary, targets are
  // misaligned, or binary targets are not 0/1.
  void validate() const;
};

Vocab load_vocab(const std::filesystem::path& path);
std::set<std::string> load_stopwords(const std::filesystem::path& path);

Corpus load_corpus(const std::filesystem::path& vocab_path,
                   const std::filesystem::path& docs_path,
                   const std::filesystem::path& targets_path,
                   TargetType target_type);

// Documents only; targets are zero-filled. Used for prediction inputs.
Corpus load_documents(const std::filesystem::path& vocab_path,
                      const std::filesystem::path& docs_path);

void save_vocab(const Vocab& vocab, const std::filesystem::path& path);
void save_documents(const std::vector<Document>& docs,
                    const std::filesystem::path& path);
void save_targets(const std::vector<double>& targets,
                  const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& vocab_path,
                 const std::filesystem::path& docs_path,
                 const std::filesystem::path& targets_path);

// Per-word document frequency (presence, not token count).
std::vector<int> document_frequency(const Corpus& corpus);

// Mask is false for stopwords, words with df > max_doc_frac * M, and words
// with df < min_doc_count.
std::vector<bool> build_vocab_filter(const Corpus& corpus,
                                     const std::set<std::string>& stopwords,
                                     double max_doc_frac, int min_doc_count);

Corpus apply_vocab_mask(const Corpus& corpus, const std::vector<bool>& mask);

std::vector<bool> mask_from_indices(const std::vector<int>& indices,
                                    std::size_t vocab_size);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Validation and test sizes are floor(frac * M); the remainder goes to train.
// Each part lists document indices in ascending order.
SplitIndices split_indices(std::size_t num_docs, double train_frac,
                           double val_frac, double test_frac,
                           std::uint64_t seed);

Corpus subset(const Corpus& corpus, const std::vector<std::size_t>& indices);

std::tuple<Corpus, Corpus, Corpus> split_corpus(const Corpus& corpus,
                                                double train_frac,
                                                double val_frac,
                                                double test_frac,
                                                std::uint64_t seed);

}  // namespace pfslda

#endif  // PFSLDA_CORPUS_H_
