#ifndef PFSLDA_TESTS_HELPERS_H_
#define PFSLDA_TESTS_HELPERS_H_

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "pfslda/corpus.h"

namespace pfslda::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("pfslda_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Vocab numbered_vocab(int v) {
  std::vector<std::string> tokens;
  for (int i = 0; i < v; ++i) tokens.push_back("w" + std::to_string(i));
  return Vocab(std::move(tokens));
}

// Documents given as dense count vectors.
inline Corpus dense_corpus(const std::vector<std::vector<int>>& counts,
                           std::vector<double> targets) {
  Corpus c;
  c.vocab = numbered_vocab(counts.empty() ? 0 : static_cast<int>(counts[0].size()));
  for (const auto& row : counts) {
    std::vector<WordCount> entries;
    for (std::size_t v = 0; v < row.size(); ++v) {
      if (row[v] > 0) entries.push_back({static_cast<int>(v), row[v]});
    }
    c.documents.push_back(Document::from_entries(std::move(entries)));
  }
  c.targets = std::move(targets);
  return c;
}

}  // namespace pfslda::testing

#endif  // PFSLDA_TESTS_HELPERS_H_
