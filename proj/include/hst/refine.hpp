#pragma once

#include <string>
#include <vector>

#include "hst/error.hpp"
#include "hst/path_search.hpp"
#include "hst/tree.hpp"
#include "hst/types.hpp"

namespace hst {

struct RefinerConfig {
  double alpha = 1.5;         // update scale
  bool normalize_rows = true; // renormalize refined rows to sum 1
};

// Per-frame, per-class multiplicative coefficients alpha^c, where c counts
// how many nodes on the frame's selected path carry the class. The blank
// column is never updated and stays at 1.
struct UpdateMatrix {
  Matrix coefficients;
};

inline UpdateMatrix build_update_matrix(const PathSelection& path, const SubactionTree& tree,
                                        int frames, int num_classes,
                                        const RefinerConfig& config) {
  require(config.alpha > 0.0, ErrorCode::config, "refiner: alpha must be > 0");
  require(frames >= 1, ErrorCode::validation, "refiner: need at least one frame");
  require(num_classes >= 1, ErrorCode::validation, "refiner: need at least one class");

  // alpha^c by repeated multiplication; c never exceeds the tree depth.
  std::vector<double> alpha_pow(static_cast<std::size_t>(tree.depth()) + 1, 1.0);
  for (std::size_t c = 1; c < alpha_pow.size(); ++c)
    alpha_pow[c] = alpha_pow[c - 1] * config.alpha;

  if (path.granularity == Granularity::per_frame) {
    require(static_cast<int>(path.entries.size()) == frames, ErrorCode::consistency,
            "refiner: path covers " + std::to_string(path.entries.size()) +
                " frames, logits have " + std::to_string(frames));
  } else {
    require(path.entries.size() == 1, ErrorCode::consistency,
            "refiner: per-video path must hold exactly one entry");
  }

  UpdateMatrix w{Matrix(static_cast<std::size_t>(frames), static_cast<std::size_t>(num_classes) + 1, 1.0)};
  std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);

  for (std::size_t e = 0; e < path.entries.size(); ++e) {
    const PathEntry& entry = path.entries[e];
    require(entry.steps.size() <= static_cast<std::size_t>(tree.depth()), ErrorCode::consistency,
            "refiner: path entry has more steps than the tree depth");
    std::fill(counts.begin(), counts.end(), 0);
    for (const PathStep& step : entry.steps) {
      require(step.node_id >= 0 && step.node_id < static_cast<int>(tree.nodes.size()),
              ErrorCode::consistency,
              "refiner: path references node " + std::to_string(step.node_id) +
                  " absent from the tree");
      for (int g : tree.node(step.node_id).gloss_ids) {
        require(g >= 0 && g < num_classes, ErrorCode::consistency,
                "refiner: tree gloss id outside the class range");
        ++counts[g];
      }
    }
    if (path.granularity == Granularity::per_frame) {
      auto row = w.coefficients.row(e);
      for (int g = 0; g < num_classes; ++g) row[g] = alpha_pow[counts[g]];
    } else {
      for (int t = 0; t < frames; ++t) {  // broadcast the single selection
        auto row = w.coefficients.row(t);
        for (int g = 0; g < num_classes; ++g) row[g] = alpha_pow[counts[g]];
      }
    }
  }
  return w;
}

// l_updated = l_origin (.) W, optionally renormalizing every row to sum 1.
// With alpha = 1 and no normalization this is the identity, bit for bit.
inline LogitMatrix refine_logits(const LogitMatrix& origin, const UpdateMatrix& w,
                                 const RefinerConfig& config) {
  require(origin.scores.rows() == w.coefficients.rows() &&
              origin.scores.cols() == w.coefficients.cols(),
          ErrorCode::shape, "refine_logits: logits and update matrix shapes differ");

  LogitMatrix updated{Matrix(origin.scores.rows(), origin.scores.cols())};
  for (std::size_t r = 0; r < origin.scores.rows(); ++r) {
    const auto src = origin.scores.row(r);
    const auto coef = w.coefficients.row(r);
    auto dst = updated.scores.row(r);
    double sum = 0.0;
    for (std::size_t c = 0; c < src.size(); ++c) {
      if (config.normalize_rows)
        require(src[c] >= 0.0, ErrorCode::domain,
                "refine_logits: negative probability under row normalization");
      dst[c] = src[c] * coef[c];
      sum += dst[c];
    }
    if (config.normalize_rows) {
      require(sum > 0.0, ErrorCode::domain, "refine_logits: row sums to zero");
      for (double& v : dst) v /= sum;
    }
  }
  return updated;
}

}  // namespace hst
