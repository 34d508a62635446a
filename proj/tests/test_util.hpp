#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "hst/hst.hpp"

namespace testutil {

// Scratch directory removed when the test section ends.
class TempDir {
public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("hst_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Hand-rolled corpus: gloss g's statement k gets a deterministic embedding
// spread over the unit sphere, independent of the library's generators.
inline hst::DescriptionCorpus make_corpus(int n_glosses, int statements_per_gloss,
                                          int dimension, unsigned variant = 0) {
  hst::DescriptionCorpus corpus;
  corpus.dimension = dimension;
  std::int64_t next_id = 0;
  for (int g = 0; g < n_glosses; ++g) {
    hst::GlossEntry entry;
    entry.gloss_id = g;
    entry.gloss_text = "g" + std::to_string(g);
    for (int k = 0; k < statements_per_gloss; ++k) {
      hst::SubactionStatement s;
      s.statement_id = next_id++;
      s.gloss_id = g;
      s.position = k;
      s.text = "g" + std::to_string(g) + "k" + std::to_string(k);
      s.embedding.assign(dimension, 0.0);
      for (int i = 0; i < dimension; ++i) {
        const double angle = 0.7 * g + 0.19 * k + 0.31 * i + 0.05 * variant;
        s.embedding[i] = std::cos(angle) + 0.1 * std::sin(3.0 * angle);
      }
      entry.statements.push_back(std::move(s));
    }
    corpus.glosses.push_back(std::move(entry));
  }
  return corpus;
}

inline hst::Matrix random_matrix(hst::Mcg64& rng, std::size_t rows, std::size_t cols) {
  hst::Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.next_gaussian();
  return m;
}

// Row-stochastic matrix with the sharpness of trained logits.
inline hst::LogitMatrix random_probs(hst::Mcg64& rng, std::size_t rows, std::size_t cols,
                                     double peakiness = 1.0) {
  hst::LogitMatrix m{hst::Matrix(rows, cols)};
  for (double& v : m.scores.data()) v = peakiness * rng.next_gaussian();
  hst::softmax_rows(m.scores);
  return m;
}

}  // namespace testutil
