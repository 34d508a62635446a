#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hst/error.hpp"
#include "hst/linalg.hpp"
#include "hst/rng.hpp"

namespace hst {

struct KmeansOptions {
  int max_iterations = 100;
  double convergence_epsilon = 1e-6;
};

struct KmeansResult {
  std::vector<int> assignments;
  std::vector<std::vector<double>> centroids;
  std::vector<double> wcss_trace;  // one entry per Lloyd iteration
  int iterations = 0;
};

namespace detail {

inline int nearest_centroid(std::span<const double> point,
                            const std::vector<std::vector<double>>& centroids) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < static_cast<int>(centroids.size()); ++c) {
    const double d = squared_distance(point, centroids[c]);
    if (d < best_d) {  // strict: equidistant points keep the lowest index
      best_d = d;
      best = c;
    }
  }
  return best;
}

// k-means++ seeding: first centre uniform, later centres sampled with
// probability proportional to squared distance from the nearest chosen one.
inline std::vector<std::vector<double>> seed_centroids(
    const std::vector<std::vector<double>>& points, int k, Mcg64& rng) {
  const std::size_t n = points.size();
  std::vector<std::vector<double>> centroids;
  centroids.reserve(k);
  centroids.push_back(points[rng.next_index(n)]);

  std::vector<double> d2(n, 0.0);
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids) best = std::min(best, squared_distance(points[i], c));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total <= 0.0) {
      pick = rng.next_index(n);  // all points coincide with a centre
    } else {
      const double r = rng.next_unit() * total;
      double cum = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        cum += d2[i];
        if (cum > r) {
          pick = i;
          break;
        }
      }
    }
    centroids.push_back(points[pick]);
  }
  return centroids;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding from a seeded Mcg64 stream.
// Guarantees: no empty clusters on return, deterministic for fixed
// (points, k, seed), and a within-cluster-sum-of-squares trace that is
// checked to be non-increasing after every iteration.
inline KmeansResult kmeans(const std::vector<std::vector<double>>& points, int k,
                           std::uint64_t seed, const KmeansOptions& options = {}) {
  require(!points.empty(), ErrorCode::empty_input, "kmeans: no points");
  require(k >= 1, ErrorCode::config, "kmeans: k must be >= 1");
  require(k <= static_cast<int>(points.size()), ErrorCode::infeasible,
          "kmeans: k = " + std::to_string(k) + " exceeds point count " +
              std::to_string(points.size()));
  require(options.max_iterations >= 1, ErrorCode::config, "kmeans: max_iterations must be >= 1");
  require(options.convergence_epsilon > 0.0, ErrorCode::config,
          "kmeans: convergence_epsilon must be > 0");
  const std::size_t dim = points.front().size();
  for (const auto& p : points)
    require(p.size() == dim, ErrorCode::dimension_mismatch,
            "kmeans: points have mixed dimensions");

  Mcg64 rng(seed);
  KmeansResult result;
  result.centroids = detail::seed_centroids(points, k, rng);
  result.assignments.assign(points.size(), 0);

  std::vector<std::size_t> cluster_size(k, 0);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    // Assignment step.
    std::fill(cluster_size.begin(), cluster_size.end(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      result.assignments[i] = detail::nearest_centroid(points[i], result.centroids);
      ++cluster_size[result.assignments[i]];
    }

    // Empty-cluster repair: hand the point farthest from its own centroid to
    // each empty cluster. Donor clusters must keep at least one member.
    for (int c = 0; c < k; ++c) {
      if (cluster_size[c] > 0) continue;
      std::size_t farthest = points.size();
      double farthest_d = -1.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        const int a = result.assignments[i];
        if (cluster_size[a] <= 1) continue;
        const double d = squared_distance(points[i], result.centroids[a]);
        if (d > farthest_d) {
          farthest_d = d;
          farthest = i;
        }
      }
      require(farthest < points.size(), ErrorCode::infeasible,
              "kmeans: cannot repair empty cluster");
      --cluster_size[result.assignments[farthest]];
      result.assignments[farthest] = c;
      ++cluster_size[c];
    }

    // Update step: centroids become the means of their members.
    std::vector<std::vector<double>> updated(k, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < points.size(); ++i)
      add_scaled(updated[result.assignments[i]], 1.0, points[i]);
    for (int c = 0; c < k; ++c)
      for (double& x : updated[c]) x /= static_cast<double>(cluster_size[c]);

    double displacement = 0.0;
    for (int c = 0; c < k; ++c)
      displacement = std::max(displacement,
                              std::sqrt(squared_distance(updated[c], result.centroids[c])));
    result.centroids = std::move(updated);

    double wcss = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
      wcss += squared_distance(points[i], result.centroids[result.assignments[i]]);
    if (!result.wcss_trace.empty()) {
      const double prev = result.wcss_trace.back();
      require(wcss <= prev + 1e-9 * std::max(1.0, prev), ErrorCode::validation,
              "kmeans: WCSS increased across a Lloyd iteration");
    }
    result.wcss_trace.push_back(wcss);
    result.iterations = iter + 1;

    if (displacement < options.convergence_epsilon) break;
  }
  return result;
}

}  // namespace hst
