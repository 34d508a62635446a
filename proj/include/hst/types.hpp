#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hst/error.hpp"
#include "hst/linalg.hpp"

namespace hst {

using EmbeddingVector = std::vector<double>;

// One ordered sub-action description of a gloss, with its text embedding.
struct SubactionStatement {
  std::int64_t statement_id = 0;
  int gloss_id = 0;
  int position = 0;  // sub-action index k, 0-based
  std::string text;
  EmbeddingVector embedding;
};

struct GlossEntry {
  int gloss_id = 0;
  std::string gloss_text;
  std::vector<SubactionStatement> statements;  // ordered by position
};

// The full description corpus: every gloss of the vocabulary with its
// ordered sub-action statements. Gloss ids are 0..N-1; the CTC blank is the
// extra class N everywhere downstream.
struct DescriptionCorpus {
  int dimension = 0;
  std::vector<GlossEntry> glosses;

  int vocabulary_size() const { return static_cast<int>(glosses.size()); }

  std::vector<const SubactionStatement*> all_statements() const {
    std::vector<const SubactionStatement*> out;
    for (const auto& g : glosses)
      for (const auto& s : g.statements) out.push_back(&s);
    return out;
  }

  const SubactionStatement* find_statement(std::int64_t statement_id) const {
    for (const auto& g : glosses)
      for (const auto& s : g.statements)
        if (s.statement_id == statement_id) return &s;
    return nullptr;
  }

  // Successor of (gloss, position) at position+1, or null when absent.
  const SubactionStatement* successor_of(const SubactionStatement& s) const {
    for (const auto& g : glosses) {
      if (g.gloss_id != s.gloss_id) continue;
      for (const auto& t : g.statements)
        if (t.position == s.position + 1) return &t;
    }
    return nullptr;
  }
};

// Per-frame visual (or aligned) features, T x d.
struct VisualSequence {
  std::string video_id;
  Matrix frames;

  std::size_t length() const { return frames.rows(); }
  std::size_t dimension() const { return frames.cols(); }
};

// A gloss label sequence. Never contains the blank class.
struct GlossSequence {
  std::vector<int> labels;

  bool operator==(const GlossSequence&) const = default;
};

// Per-frame class scores, T x (N+1). The last column is the CTC blank.
struct LogitMatrix {
  Matrix scores;

  std::size_t frames() const { return scores.rows(); }
  int num_classes() const { return static_cast<int>(scores.cols()) - 1; }
  int blank_index() const { return num_classes(); }
};

inline void check_embedding(const EmbeddingVector& v, int expected_dimension) {
  require(!v.empty(), ErrorCode::dimension_mismatch, "embedding has dimension 0");
  require(static_cast<int>(v.size()) == expected_dimension, ErrorCode::dimension_mismatch,
          "embedding dimension " + std::to_string(v.size()) + " does not match corpus dimension " +
              std::to_string(expected_dimension));
  for (double x : v)
    require(std::isfinite(x), ErrorCode::not_finite, "embedding contains a non-finite value");
}

inline void check_labels(const GlossSequence& seq, int num_classes) {
  for (int y : seq.labels)
    require(y >= 0 && y < num_classes, ErrorCode::validation,
            "gloss id " + std::to_string(y) + " outside vocabulary of size " +
                std::to_string(num_classes));
}

}  // namespace hst
