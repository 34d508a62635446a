#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "hst/hst.hpp"
#include "test_util.hpp"

using namespace hst;
using testutil::TempDir;

TEST_CASE("tree: single statement yields one node per level") {
  const auto corpus = testutil::make_corpus(1, 1, 3);
  const auto tree = build_tree(corpus, TreeConfig{});
  validate_tree(tree, &corpus);
  REQUIRE(tree.nodes.size() == 3);
  for (int level = 1; level <= 3; ++level) {
    const auto ids = tree.nodes_at_level(level);
    REQUIRE(ids.size() == 1);
    CHECK(tree.node(ids[0]).member_statement_ids ==
          std::vector<std::int64_t>{corpus.glosses[0].statements[0].statement_id});
  }
}

TEST_CASE("tree: sqrt rule gives ceil(sqrt(M)) level-1 nodes") {
  const auto corpus = testutil::make_corpus(10, 4, 6);  // M = 40
  const auto tree = build_tree(corpus, TreeConfig{});
  CHECK(tree.level1_ids.size() == 7);  // ceil(sqrt(40))
  validate_tree(tree, &corpus);
}

TEST_CASE("tree: successor statements join their level-1 node's clustering set") {
  const auto corpus = testutil::make_corpus(5, 4, 6);
  const auto tree = build_tree(corpus, TreeConfig{});
  validate_tree(tree, &corpus);

  const auto idx_successor = [&](std::int64_t id) -> std::optional<std::int64_t> {
    const auto* s = corpus.find_statement(id);
    const auto* next = corpus.successor_of(*s);
    if (!next) return std::nullopt;
    return next->statement_id;
  };

  for (int level1 : tree.level1_ids) {
    const TreeNode& e = tree.node(level1);
    std::set<std::int64_t> level2_union;
    for (int c : e.children)
      for (std::int64_t s : tree.node(c).member_statement_ids) level2_union.insert(s);
    for (std::int64_t member : e.member_statement_ids) {
      CHECK(level2_union.count(member) == 1);
      if (const auto next = idx_successor(member)) CHECK(level2_union.count(*next) == 1);
    }
  }
}

TEST_CASE("tree: fixed n1 controls the level-1 width") {
  const auto corpus = testutil::make_corpus(6, 3, 5);
  TreeConfig config;
  config.branching_rule = BranchingRule::fixed_count;
  config.n1 = 4;
  const auto tree = build_tree(corpus, config);
  CHECK(tree.level1_ids.size() == 4);
  validate_tree(tree, &corpus);
}

TEST_CASE("tree: shallow depths stop at the requested level") {
  const auto corpus = testutil::make_corpus(4, 3, 5);
  for (int depth : {1, 2}) {
    TreeConfig config;
    config.depth = depth;
    const auto tree = build_tree(corpus, config);
    validate_tree(tree, &corpus);
    for (const auto& n : tree.nodes) CHECK(n.level <= depth);
    // Every gloss appears at every built level.
    for (int level = 1; level <= depth; ++level) {
      std::set<int> seen;
      for (const auto& n : tree.nodes)
        if (n.level == level) seen.insert(n.gloss_ids.begin(), n.gloss_ids.end());
      CHECK(seen.size() == static_cast<std::size_t>(corpus.vocabulary_size()));
    }
  }
}

TEST_CASE("tree: depth outside 1..3 is a config error") {
  const auto corpus = testutil::make_corpus(2, 2, 4);
  TreeConfig config;
  config.depth = 4;
  try {
    build_tree(corpus, config);
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
  }
}

TEST_CASE("tree: centroids are unit norm") {
  const auto corpus = testutil::make_corpus(6, 4, 7);
  const auto tree = build_tree(corpus, TreeConfig{});
  for (const auto& n : tree.nodes) CHECK(norm(n.centroid) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("tree: save/load round trip preserves structure and gloss sets") {
  TempDir dir;
  const auto corpus = testutil::make_corpus(7, 3, 5);
  const auto tree = build_tree(corpus, TreeConfig{});
  save_tree(tree, dir / "tree.json");
  const auto back = load_tree(dir / "tree.json");
  validate_tree(back, &corpus);

  REQUIRE(back.nodes.size() == tree.nodes.size());
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    CHECK(back.nodes[i].level == tree.nodes[i].level);
    CHECK(back.nodes[i].parent_id == tree.nodes[i].parent_id);
    CHECK(back.nodes[i].children == tree.nodes[i].children);
    CHECK(back.nodes[i].centroid == tree.nodes[i].centroid);
    CHECK(back.nodes[i].member_statement_ids == tree.nodes[i].member_statement_ids);
    CHECK(back.nodes[i].gloss_ids == tree.nodes[i].gloss_ids);
  }
}

TEST_CASE("tree: identical build is byte-identical on disk") {
  TempDir dir;
  const auto corpus = testutil::make_corpus(8, 4, 6);
  TreeConfig config;
  config.seed = 21;
  save_tree(build_tree(corpus, config), dir / "a.json");
  save_tree(build_tree(corpus, config), dir / "b.json");
  CHECK(testutil::read_text(dir / "a.json") == testutil::read_text(dir / "b.json"));
}

TEST_CASE("tree: tampered files fail validation") {
  TempDir dir;
  const auto corpus = testutil::make_corpus(4, 3, 5);
  const auto tree = build_tree(corpus, TreeConfig{});
  save_tree(tree, dir / "tree.json");

  auto j = nlohmann::json::parse(testutil::read_text(dir / "tree.json"));

  SECTION("orphaned subtree") {
    // Detach the first level-2 node from its parent's child list.
    for (auto& node : j["nodes"]) {
      if (node["level"] == 1 && !node["children"].empty()) {
        node["children"].erase(0);
        break;
      }
    }
    testutil::write_text(dir / "bad.json", j.dump());
    try {
      load_tree(dir / "bad.json");
      FAIL("expected validation error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::validation);
    }
  }
  SECTION("leaf with two members") {
    for (auto& node : j["nodes"]) {
      if (node["level"] == 3) {
        node["member_statement_ids"].push_back(12345);
        break;
      }
    }
    testutil::write_text(dir / "bad.json", j.dump());
    CHECK_THROWS_AS(load_tree(dir / "bad.json"), Error);
  }
}

TEST_CASE("tree: kmeans errors propagate") {
  const auto corpus = testutil::make_corpus(1, 2, 4);  // M = 2
  TreeConfig config;
  config.branching_rule = BranchingRule::fixed_count;
  config.n1 = 5;
  try {
    build_tree(corpus, config);
    FAIL("expected infeasibility");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::infeasible);
  }
}
