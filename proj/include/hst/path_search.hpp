#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hst/error.hpp"
#include "hst/io.hpp"
#include "hst/tree.hpp"
#include "hst/types.hpp"

namespace hst {

enum class Granularity { per_frame, per_video };

struct SearchConfig {
  Granularity granularity = Granularity::per_frame;
  int window_radius = 2;  // frames pooled symmetrically around t
};

struct PathStep {
  int level = 0;
  int node_id = 0;
  double score = 0.0;
};

struct PathEntry {
  int frame = 0;  // -1 for a per-video selection
  std::vector<PathStep> steps;

  bool operator==(const PathEntry&) const = default;
};

struct PathSelection {
  Granularity granularity = Granularity::per_frame;
  std::vector<PathEntry> entries;

  bool operator==(const PathSelection&) const = default;
};

// Cosine similarity; 0 for a zero-norm operand, with the flag reported when
// the caller wants to distinguish that case from true orthogonality.
inline double cosine(std::span<const double> u, std::span<const double> v,
                     bool* zero_norm = nullptr) {
  require(u.size() == v.size(), ErrorCode::dimension_mismatch,
          "cosine: vectors have different dimensions");
  const double nu = norm(u);
  const double nv = norm(v);
  if (zero_norm) *zero_norm = (nu == 0.0 || nv == 0.0);
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return dot(u, v) / (nu * nv);
}

// Mean of the frames in the clipped window [t-r, t+r].
inline EmbeddingVector pool_feature(const VisualSequence& seq, int t, int radius) {
  require(t >= 0 && t < static_cast<int>(seq.length()), ErrorCode::validation,
          "pool_feature: frame index out of range");
  require(radius >= 0, ErrorCode::config, "pool_feature: negative radius");
  const int lo = std::max(0, t - radius);
  const int hi = std::min(static_cast<int>(seq.length()) - 1, t + radius);
  EmbeddingVector mean(seq.dimension(), 0.0);
  for (int i = lo; i <= hi; ++i) add_scaled(mean, 1.0, seq.frames.row(i));
  for (double& x : mean) x /= static_cast<double>(hi - lo + 1);
  return mean;
}

namespace detail {

// Greedy per-level argmax descent; candidates at each level are the children
// of the previous choice. Ties go to the lower node id (candidate lists are
// in increasing id order, so strict comparison suffices).
inline std::vector<PathStep> descend(const SubactionTree& tree,
                                     std::span<const double> query) {
  std::vector<PathStep> steps;
  const std::vector<int>* candidates = &tree.level1_ids;
  for (int level = 1; level <= tree.depth(); ++level) {
    int best_id = -1;
    double best_score = 0.0;
    for (int id : *candidates) {
      const double s = cosine(query, tree.node(id).centroid);
      if (best_id < 0 || s > best_score) {
        best_id = id;
        best_score = s;
      }
    }
    require(best_id >= 0, ErrorCode::validation, "search_path: empty candidate set");
    steps.push_back({level, best_id, best_score});
    candidates = &tree.node(best_id).children;
  }
  return steps;
}

}  // namespace detail

inline PathSelection search_path(const SubactionTree& tree, const VisualSequence& seq,
                                 const SearchConfig& config) {
  require(static_cast<int>(seq.dimension()) == tree.dimension, ErrorCode::dimension_mismatch,
          "search_path: feature dimension differs from tree dimension");
  require(seq.length() >= 1, ErrorCode::empty_input, "search_path: empty sequence");

  PathSelection selection;
  selection.granularity = config.granularity;
  if (config.granularity == Granularity::per_video) {
    EmbeddingVector query(seq.dimension(), 0.0);
    for (std::size_t t = 0; t < seq.length(); ++t) add_scaled(query, 1.0, seq.frames.row(t));
    for (double& x : query) x /= static_cast<double>(seq.length());
    selection.entries.push_back({-1, detail::descend(tree, query)});
  } else {
    for (int t = 0; t < static_cast<int>(seq.length()); ++t) {
      const auto query = pool_feature(seq, t, config.window_radius);
      selection.entries.push_back({t, detail::descend(tree, query)});
    }
  }
  return selection;
}

// Independent re-implementation used to cross-check search_path: similarities
// recomputed by explicit summation, argmax replayed by sorting candidates on
// (score desc, id asc). Must agree with search_path exactly.
inline PathSelection search_path_oracle(const SubactionTree& tree, const VisualSequence& seq,
                                        const SearchConfig& config) {
  require(tree.nodes.size() <= 200, ErrorCode::oracle_too_large,
          "search_path_oracle: tree has more than 200 nodes");
  require(static_cast<int>(seq.dimension()) == tree.dimension, ErrorCode::dimension_mismatch,
          "search_path_oracle: feature dimension differs from tree dimension");

  const auto oracle_cosine = [](const std::vector<double>& a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] * b[i];
    double na = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) na += a[i] * a[i];
    double nb = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) nb += b[i] * b[i];
    if (na == 0.0 || nb == 0.0) return 0.0;
    return d / (std::sqrt(na) * std::sqrt(nb));
  };

  const auto pooled_query = [&](int lo, int hi) {
    std::vector<double> q(seq.dimension(), 0.0);
    for (int i = lo; i <= hi; ++i) {
      const auto row = seq.frames.row(i);
      for (std::size_t c = 0; c < q.size(); ++c) q[c] += row[c];
    }
    for (double& x : q) x /= static_cast<double>(hi - lo + 1);
    return q;
  };

  const auto descend = [&](const std::vector<double>& query) {
    std::vector<PathStep> steps;
    std::vector<int> candidates = tree.level1_ids;
    for (int level = 1; level <= tree.depth(); ++level) {
      std::vector<PathStep> scored;
      for (int id : candidates) scored.push_back({level, id, oracle_cosine(query, tree.node(id).centroid)});
      std::stable_sort(scored.begin(), scored.end(), [](const PathStep& a, const PathStep& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.node_id < b.node_id;
      });
      require(!scored.empty(), ErrorCode::validation, "oracle: empty candidate set");
      steps.push_back(scored.front());
      candidates = tree.node(scored.front().node_id).children;
    }
    return steps;
  };

  PathSelection selection;
  selection.granularity = config.granularity;
  if (config.granularity == Granularity::per_video) {
    selection.entries.push_back({-1, descend(pooled_query(0, static_cast<int>(seq.length()) - 1))});
  } else {
    for (int t = 0; t < static_cast<int>(seq.length()); ++t) {
      const int lo = std::max(0, t - config.window_radius);
      const int hi = std::min(static_cast<int>(seq.length()) - 1, t + config.window_radius);
      selection.entries.push_back({t, descend(pooled_query(lo, hi))});
    }
  }
  return selection;
}

// ---------------------------------------------------------------------------
// JSON report

inline std::string granularity_name(Granularity g) {
  return g == Granularity::per_frame ? "per-frame" : "per-video";
}

inline Granularity granularity_from_name(const std::string& name) {
  if (name == "per-frame") return Granularity::per_frame;
  if (name == "per-video") return Granularity::per_video;
  fail(ErrorCode::parse, "unknown granularity '" + name + "'");
}

inline void save_path(const PathSelection& selection, const std::filesystem::path& path,
                      const SearchConfig* config = nullptr) {
  nlohmann::ordered_json j;
  j["granularity"] = granularity_name(selection.granularity);
  if (config) {
    j["config"] = {{"granularity", granularity_name(config->granularity)},
                   {"window_radius", config->window_radius}};
  }
  auto& entries = j["entries"] = nlohmann::ordered_json::array();
  for (const PathEntry& e : selection.entries) {
    nlohmann::ordered_json ej;
    ej["frame"] = e.frame;
    auto& steps = ej["steps"] = nlohmann::ordered_json::array();
    for (const PathStep& s : e.steps)
      steps.push_back({{"level", s.level}, {"node_id", s.node_id}, {"score", s.score}});
    entries.push_back(std::move(ej));
  }
  auto out = open_for_write(path);
  out << j.dump(2) << '\n';
  require(out.good(), ErrorCode::io, "write failed for " + path.string());
}

inline PathSelection load_path(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse, path.string() + ": " + e.what());
  }
  PathSelection selection;
  try {
    selection.granularity = granularity_from_name(j.at("granularity").get<std::string>());
    for (const auto& ej : j.at("entries")) {
      PathEntry e;
      e.frame = ej.at("frame").get<int>();
      for (const auto& sj : ej.at("steps"))
        e.steps.push_back({sj.at("level").get<int>(), sj.at("node_id").get<int>(),
                           sj.at("score").get<double>()});
      selection.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse, path.string() + ": " + e.what());
  }
  return selection;
}

}  // namespace hst
