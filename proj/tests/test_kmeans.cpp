#include <catch2/catch_amalgamated.hpp>

#include "hst/hst.hpp"
#include "test_util.hpp"

using namespace hst;

namespace {

double wcss_of(const std::vector<std::vector<double>>& points, const std::vector<int>& assign,
               int k) {
  std::vector<std::vector<double>> sums(k, std::vector<double>(points[0].size(), 0.0));
  std::vector<int> counts(k, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    add_scaled(sums[assign[i]], 1.0, points[i]);
    ++counts[assign[i]];
  }
  for (int c = 0; c < k; ++c)
    for (double& x : sums[c]) x /= counts[c];
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    total += squared_distance(points[i], sums[assign[i]]);
  return total;
}

}  // namespace

TEST_CASE("kmeans: k = 1 yields the arithmetic mean") {
  const std::vector<std::vector<double>> points = {{1.0, 2.0}, {3.0, 4.0}, {-2.0, 6.0}};
  const auto result = kmeans(points, 1, 42);
  REQUIRE(result.centroids.size() == 1);
  CHECK(result.centroids[0][0] == Catch::Approx((1.0 + 3.0 - 2.0) / 3.0).margin(1e-12));
  CHECK(result.centroids[0][1] == Catch::Approx((2.0 + 4.0 + 6.0) / 3.0).margin(1e-12));
  for (int a : result.assignments) CHECK(a == 0);
}

TEST_CASE("kmeans: two tight pairs split into their own clusters") {
  const std::vector<std::vector<double>> points = {
      {0.0, 0.0}, {0.1, 0.0}, {10.0, 10.0}, {10.1, 10.0}};

  // Exhaustive oracle over every 2-partition: the pairing {0,1}/{2,3}
  // minimises the within-cluster sum of squares.
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_assign;
  for (int mask = 1; mask < 15; ++mask) {  // skip all-in-one assignments
    std::vector<int> assign(4);
    for (int i = 0; i < 4; ++i) assign[i] = (mask >> i) & 1;
    const double w = wcss_of(points, assign, 2);
    if (w < best) {
      best = w;
      best_assign = assign;
    }
  }
  CHECK(best_assign[0] == best_assign[1]);
  CHECK(best_assign[2] == best_assign[3]);
  CHECK(best_assign[0] != best_assign[2]);

  for (std::uint64_t seed : {1ull, 7ull, 1234ull}) {
    const auto result = kmeans(points, 2, seed);
    CHECK(result.assignments[0] == result.assignments[1]);
    CHECK(result.assignments[2] == result.assignments[3]);
    CHECK(result.assignments[0] != result.assignments[2]);
    CHECK(result.wcss_trace.back() == Catch::Approx(best).margin(1e-12));
  }
}

TEST_CASE("kmeans: fixed seed is reproducible") {
  Mcg64 rng(55);
  std::vector<std::vector<double>> points;
  for (int i = 0; i < 40; ++i) {
    std::vector<double> p(3);
    for (double& x : p) x = rng.next_gaussian();
    points.push_back(std::move(p));
  }
  const auto a = kmeans(points, 5, 99);
  const auto b = kmeans(points, 5, 99);
  CHECK(a.assignments == b.assignments);
  CHECK(a.centroids == b.centroids);
  CHECK(a.wcss_trace == b.wcss_trace);
}

TEST_CASE("kmeans: WCSS never increases across Lloyd iterations") {
  Mcg64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> points;
    const int n = 10 + static_cast<int>(rng.next_index(40));
    for (int i = 0; i < n; ++i) {
      std::vector<double> p(4);
      for (double& x : p) x = rng.next_gaussian();
      points.push_back(std::move(p));
    }
    const int k = 2 + static_cast<int>(rng.next_index(5));
    const auto result = kmeans(points, k, rng.next_u64());
    for (std::size_t i = 1; i < result.wcss_trace.size(); ++i)
      CHECK(result.wcss_trace[i] <= result.wcss_trace[i - 1] + 1e-9);
  }
}

TEST_CASE("kmeans: no empty clusters even for degenerate inputs") {
  const std::vector<std::vector<double>> identical(6, std::vector<double>{1.0, 1.0});
  const auto result = kmeans(identical, 3, 7);
  std::vector<int> counts(3, 0);
  for (int a : result.assignments) ++counts[a];
  for (int c : counts) CHECK(c > 0);
}

TEST_CASE("kmeans: infeasible and empty inputs are rejected") {
  const std::vector<std::vector<double>> points = {{0.0}, {1.0}};
  try {
    kmeans(points, 3, 1);
    FAIL("expected infeasibility error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::infeasible);
  }
  try {
    kmeans({}, 1, 1);
    FAIL("expected empty-input error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::empty_input);
  }
}
