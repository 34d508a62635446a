#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hst/error.hpp"
#include "hst/path_search.hpp"
#include "hst/tree.hpp"
#include "hst/types.hpp"

namespace hst {

// Per-frame argmax class; frames whose argmax is the blank yield no label.
// Ties go to the lower class index.
inline std::vector<std::optional<int>> pseudo_labels(const LogitMatrix& logits) {
  std::vector<std::optional<int>> out;
  out.reserve(logits.frames());
  for (std::size_t t = 0; t < logits.frames(); ++t) {
    const auto row = logits.scores.row(t);
    int best = 0;
    for (std::size_t k = 1; k < row.size(); ++k)
      if (row[k] > row[best]) best = static_cast<int>(k);
    if (best == logits.blank_index())
      out.push_back(std::nullopt);
    else
      out.push_back(best);
  }
  return out;
}

struct LayerPartition {
  std::vector<int> positives;  // layer nodes carrying the pseudo label's gloss
  std::vector<int> negatives;  // the rest of the layer
};

// Splits the full node set of one layer by whether it contains statements of
// the given gloss. The candidate set is the entire layer, independent of the
// selected path.
inline LayerPartition select_pos_neg(const SubactionTree& tree, int gloss_id, int layer) {
  require(layer >= 1 && layer <= tree.depth(), ErrorCode::validation,
          "select_pos_neg: layer " + std::to_string(layer) + " outside 1.." +
              std::to_string(tree.depth()));
  LayerPartition part;
  for (const TreeNode& n : tree.nodes) {
    if (n.level != layer) continue;
    if (n.contains_gloss(gloss_id))
      part.positives.push_back(n.node_id);
    else
      part.negatives.push_back(n.node_id);
  }
  return part;
}

struct ContrastiveFrame {
  int frame = 0;
  EmbeddingVector feature;
  int pseudo_label = 0;
};

// Frames with a non-blank pseudo label, plus the per-gloss layer partitions
// they index into.
struct ContrastiveBatch {
  std::vector<ContrastiveFrame> frames;
  std::map<int, std::vector<LayerPartition>> partitions;  // gloss -> [layer 1..depth]
};

inline ContrastiveBatch make_contrastive_batch(const SubactionTree& tree,
                                               const VisualSequence& seq,
                                               const LogitMatrix& origin_logits) {
  require(seq.length() == origin_logits.frames(), ErrorCode::shape,
          "contrastive: features and logits disagree on frame count");
  require(static_cast<int>(seq.dimension()) == tree.dimension, ErrorCode::dimension_mismatch,
          "contrastive: feature dimension differs from tree dimension");

  ContrastiveBatch batch;
  const auto labels = pseudo_labels(origin_logits);
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (!labels[t]) continue;
    const auto row = seq.frames.row(t);
    batch.frames.push_back(
        {static_cast<int>(t), EmbeddingVector(row.begin(), row.end()), *labels[t]});
    if (!batch.partitions.count(*labels[t])) {
      std::vector<LayerPartition> layers;
      for (int layer = 1; layer <= tree.depth(); ++layer)
        layers.push_back(select_pos_neg(tree, *labels[t], layer));
      batch.partitions.emplace(*labels[t], std::move(layers));
    }
  }
  return batch;
}

struct ContrastiveResult {
  double value = 0.0;
  std::size_t term_count = 0;
  std::vector<std::size_t> per_layer_terms;               // index 0 = layer 1
  std::optional<std::vector<EmbeddingVector>> gradients;  // d(value)/d(feature), per batch frame
};

namespace contrastive_detail {

inline double log_sum_exp_over(const std::vector<double>& xs) {
  double mx = xs.front();
  for (double x : xs) mx = std::max(mx, x);
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

// d cos(v, t) / d v = t/(|v||t|) - cos(v, t) v/|v|^2; zero for degenerate norms.
inline void add_cosine_gradient(EmbeddingVector& acc, double weight,
                                const EmbeddingVector& v, const EmbeddingVector& t) {
  const double nv = norm(v);
  const double nt = norm(t);
  if (nv == 0.0 || nt == 0.0) return;
  const double c = dot(v, t) / (nv * nt);
  for (std::size_t i = 0; i < v.size(); ++i)
    acc[i] += weight * (t[i] / (nv * nt) - c * v[i] / (nv * nv));
}

}  // namespace contrastive_detail

// Layer-wise contrastive loss. For a frame feature v and layer k:
//
//   term = -(1/N_pos) * log( sum_{i in pos} exp(cos(v, t_i))
//                          / sum_{j in neg} exp(cos(v, t_j)) )
//
// with the denominator over negatives only, which can make individual terms
// (and the total) negative. Layers with an empty positive or negative set
// contribute nothing; the total is the mean over contributing (frame, layer)
// pairs, and it is an error when no pair contributes.
inline ContrastiveResult contrastive_loss(const ContrastiveBatch& batch,
                                          const SubactionTree& tree,
                                          bool with_gradients = false) {
  ContrastiveResult result;
  result.per_layer_terms.assign(static_cast<std::size_t>(tree.depth()), 0);

  struct Term {
    std::size_t frame_index;
    int layer;
    double value;
  };
  std::vector<Term> terms;

  for (std::size_t f = 0; f < batch.frames.size(); ++f) {
    const ContrastiveFrame& frame = batch.frames[f];
    const auto it = batch.partitions.find(frame.pseudo_label);
    require(it != batch.partitions.end(), ErrorCode::consistency,
            "contrastive: batch lacks partitions for gloss " +
                std::to_string(frame.pseudo_label));
    for (int layer = 1; layer <= tree.depth(); ++layer) {
      const LayerPartition& part = it->second[static_cast<std::size_t>(layer - 1)];
      if (part.positives.empty() || part.negatives.empty()) continue;

      std::vector<double> pos_cos, neg_cos;
      for (int id : part.positives) pos_cos.push_back(cosine(frame.feature, tree.node(id).centroid));
      for (int id : part.negatives) neg_cos.push_back(cosine(frame.feature, tree.node(id).centroid));

      const double n_pos = static_cast<double>(part.positives.size());
      const double lse_pos = contrastive_detail::log_sum_exp_over(pos_cos);
      const double lse_neg = contrastive_detail::log_sum_exp_over(neg_cos);
      const double value = -(lse_pos - lse_neg) / n_pos;

      terms.push_back({f, layer, value});
      ++result.per_layer_terms[static_cast<std::size_t>(layer - 1)];
    }
  }

  require(!terms.empty(), ErrorCode::no_signal,
          "contrastive: every (frame, layer) term was skipped");
  result.term_count = terms.size();
  double sum = 0.0;
  for (const Term& t : terms) sum += t.value;
  result.value = sum / static_cast<double>(terms.size());

  if (!with_gradients) return result;

  std::vector<EmbeddingVector> grads(batch.frames.size());
  for (auto& g : grads) g.assign(batch.frames.empty() ? 0 : batch.frames.front().feature.size(), 0.0);
  const double term_weight = 1.0 / static_cast<double>(terms.size());

  for (const Term& term : terms) {
    const ContrastiveFrame& frame = batch.frames[term.frame_index];
    const LayerPartition& part =
        batch.partitions.at(frame.pseudo_label)[static_cast<std::size_t>(term.layer - 1)];
    const double n_pos = static_cast<double>(part.positives.size());

    std::vector<double> pos_cos, neg_cos;
    for (int id : part.positives) pos_cos.push_back(cosine(frame.feature, tree.node(id).centroid));
    for (int id : part.negatives) neg_cos.push_back(cosine(frame.feature, tree.node(id).centroid));
    const double lse_pos = contrastive_detail::log_sum_exp_over(pos_cos);
    const double lse_neg = contrastive_detail::log_sum_exp_over(neg_cos);

    // d term / d cos_i = -(softmax over positives)/N_pos, + for negatives.
    for (std::size_t i = 0; i < part.positives.size(); ++i) {
      const double w = -term_weight * std::exp(pos_cos[i] - lse_pos) / n_pos;
      contrastive_detail::add_cosine_gradient(grads[term.frame_index], w, frame.feature,
                                              tree.node(part.positives[i]).centroid);
    }
    for (std::size_t j = 0; j < part.negatives.size(); ++j) {
      const double w = term_weight * std::exp(neg_cos[j] - lse_neg) / n_pos;
      contrastive_detail::add_cosine_gradient(grads[term.frame_index], w, frame.feature,
                                              tree.node(part.negatives[j]).centroid);
    }
  }
  result.gradients = std::move(grads);
  return result;
}

}  // namespace hst
