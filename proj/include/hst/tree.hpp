#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hst/error.hpp"
#include "hst/io.hpp"
#include "hst/kmeans.hpp"
#include "hst/types.hpp"

namespace hst {

enum class BranchingRule { sqrt_rule, fixed_count };

struct TreeConfig {
  std::optional<int> n1;  // level-1 cluster count under fixed_count
  BranchingRule branching_rule = BranchingRule::sqrt_rule;
  std::uint64_t seed = 7;
  int max_iterations = 100;
  double convergence_epsilon = 1e-6;
  int depth = 3;
};

struct TreeNode {
  int node_id = 0;
  int level = 0;
  std::optional<int> parent_id;
  std::vector<int> children;
  EmbeddingVector centroid;                        // unit L2 norm unless degenerate
  std::vector<std::int64_t> member_statement_ids;  // sorted
  std::vector<int> gloss_ids;                      // sorted owners of the members

  bool contains_gloss(int gloss_id) const {
    return std::binary_search(gloss_ids.begin(), gloss_ids.end(), gloss_id);
  }
};

// The sub-action tree: statements clustered into broad groups (level 1),
// re-clustered with their temporal successors into finer groups (level 2),
// and kept as individual statement leaves (level 3).
struct SubactionTree {
  int dimension = 0;
  TreeConfig config;
  std::vector<TreeNode> nodes;  // node_id == index
  std::vector<int> level1_ids;

  int depth() const { return config.depth; }

  const TreeNode& node(int id) const {
    require(id >= 0 && id < static_cast<int>(nodes.size()), ErrorCode::consistency,
            "tree: unknown node id " + std::to_string(id));
    return nodes[static_cast<std::size_t>(id)];
  }

  std::vector<int> nodes_at_level(int level) const {
    std::vector<int> out;
    for (const auto& n : nodes)
      if (n.level == level) out.push_back(n.node_id);
    return out;
  }

  int num_glosses() const {
    int max_id = -1;
    for (const auto& n : nodes)
      for (int g : n.gloss_ids) max_id = std::max(max_id, g);
    return max_id + 1;
  }
};

namespace detail {

inline int cluster_count(BranchingRule rule, std::optional<int> fixed, std::size_t set_size) {
  if (rule == BranchingRule::fixed_count) {
    require(fixed.has_value(), ErrorCode::config, "fixed-count branching requires n1");
    return std::min<int>(*fixed, static_cast<int>(set_size));
  }
  return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(set_size))));
}

struct StatementIndex {
  std::vector<const SubactionStatement*> statements;        // corpus order
  std::map<std::int64_t, const SubactionStatement*> by_id;  // id -> statement
  std::map<std::int64_t, std::int64_t> successor;           // id -> id at position+1
};

inline StatementIndex index_statements(const DescriptionCorpus& corpus) {
  StatementIndex idx;
  idx.statements = corpus.all_statements();
  for (const auto* s : idx.statements) idx.by_id[s->statement_id] = s;
  for (const auto& g : corpus.glosses)
    for (std::size_t k = 0; k + 1 < g.statements.size(); ++k)
      idx.successor[g.statements[k].statement_id] = g.statements[k + 1].statement_id;
  return idx;
}

inline TreeNode make_cluster_node(int node_id, int level, std::optional<int> parent,
                                  std::vector<std::int64_t> member_ids,
                                  const StatementIndex& idx) {
  TreeNode n;
  n.node_id = node_id;
  n.level = level;
  n.parent_id = parent;
  std::sort(member_ids.begin(), member_ids.end());
  n.member_statement_ids = std::move(member_ids);

  std::set<int> glosses;
  std::vector<double> mean;
  for (std::int64_t id : n.member_statement_ids) {
    const auto* s = idx.by_id.at(id);
    glosses.insert(s->gloss_id);
    if (mean.empty()) mean.assign(s->embedding.size(), 0.0);
    add_scaled(mean, 1.0, s->embedding);
  }
  for (double& x : mean) x /= static_cast<double>(n.member_statement_ids.size());
  n.centroid = normalized(std::move(mean));
  n.gloss_ids.assign(glosses.begin(), glosses.end());
  return n;
}

}  // namespace detail

inline void check_tree_config(const TreeConfig& config) {
  require(config.depth >= 1 && config.depth <= 3, ErrorCode::config,
          "tree depth must be 1, 2 or 3");
  require(!config.n1 || *config.n1 >= 1, ErrorCode::config, "n1 must be >= 1");
  require(config.max_iterations >= 1, ErrorCode::config, "max_iterations must be >= 1");
  require(config.convergence_epsilon > 0.0, ErrorCode::config,
          "convergence_epsilon must be > 0");
}

// Builds the tree. Level 1 clusters all statement embeddings; each level-1
// group is then re-clustered together with the position+1 successor of every
// member, which lets a statement surface in several level-2 subtrees; at
// depth 3 every level-2 member becomes its own leaf. Cluster counts follow
// the branching rule (ceil(sqrt(set size)) by default). Deterministic for a
// fixed (corpus, config).
inline SubactionTree build_tree(const DescriptionCorpus& corpus, const TreeConfig& config) {
  check_tree_config(config);
  require(!corpus.glosses.empty(), ErrorCode::empty_input, "build_tree: empty corpus");

  const auto idx = detail::index_statements(corpus);
  const std::size_t total = idx.statements.size();

  SubactionTree tree;
  tree.dimension = corpus.dimension;
  tree.config = config;

  KmeansOptions kopts{config.max_iterations, config.convergence_epsilon};

  // Level 1 over every statement embedding.
  std::vector<std::vector<double>> points;
  points.reserve(total);
  for (const auto* s : idx.statements) points.push_back(s->embedding);
  const int n1 = detail::cluster_count(config.branching_rule, config.n1, total);
  const auto level1 = kmeans(points, n1, derive_seed(config.seed, 1), kopts);

  std::vector<std::vector<std::int64_t>> level1_members(n1);
  for (std::size_t i = 0; i < total; ++i)
    level1_members[level1.assignments[i]].push_back(idx.statements[i]->statement_id);

  for (int c = 0; c < n1; ++c) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(
        detail::make_cluster_node(id, 1, std::nullopt, level1_members[c], idx));
    tree.level1_ids.push_back(id);
  }

  if (config.depth >= 2) {
    for (std::size_t i = 0; i < tree.level1_ids.size(); ++i) {
      const int parent_id = tree.level1_ids[i];

      // Temporal augmentation: the clustering set is the node's members plus
      // the immediate successor of each member, deduplicated.
      std::set<std::int64_t> member_set(tree.nodes[parent_id].member_statement_ids.begin(),
                                        tree.nodes[parent_id].member_statement_ids.end());
      for (std::int64_t id : tree.nodes[parent_id].member_statement_ids) {
        auto it = idx.successor.find(id);
        if (it != idx.successor.end()) member_set.insert(it->second);
      }
      const std::vector<std::int64_t> set_ids(member_set.begin(), member_set.end());

      std::vector<std::vector<double>> set_points;
      set_points.reserve(set_ids.size());
      for (std::int64_t id : set_ids) set_points.push_back(idx.by_id.at(id)->embedding);

      const int k2 = detail::cluster_count(config.branching_rule, config.n1, set_ids.size());
      const auto level2 = kmeans(set_points, k2, derive_seed(config.seed, 2, i), kopts);

      std::vector<std::vector<std::int64_t>> groups(k2);
      for (std::size_t p = 0; p < set_ids.size(); ++p)
        groups[level2.assignments[p]].push_back(set_ids[p]);

      for (int c = 0; c < k2; ++c) {
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(detail::make_cluster_node(node_id, 2, parent_id, groups[c], idx));
        tree.nodes[parent_id].children.push_back(node_id);
      }
    }
  }

  if (config.depth >= 3) {
    const auto level2_ids = tree.nodes_at_level(2);
    for (int parent_id : level2_ids) {
      for (std::int64_t member : tree.nodes[parent_id].member_statement_ids) {
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(detail::make_cluster_node(node_id, 3, parent_id, {member}, idx));
        tree.nodes[parent_id].children.push_back(node_id);
      }
    }
  }

  return tree;
}

// Structural validation; pass the corpus to additionally check membership
// relations against it.
inline void validate_tree(const SubactionTree& tree, const DescriptionCorpus* corpus = nullptr) {
  check_tree_config(tree.config);
  require(tree.dimension >= 1, ErrorCode::validation, "tree: dimension must be >= 1");
  require(!tree.nodes.empty(), ErrorCode::validation, "tree: no nodes");

  const int depth = tree.config.depth;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const TreeNode& n = tree.nodes[i];
    require(n.node_id == static_cast<int>(i), ErrorCode::validation,
            "tree: node ids must be dense and in order");
    require(n.level >= 1 && n.level <= depth, ErrorCode::validation,
            "tree: node level outside 1..depth");
    require(!n.member_statement_ids.empty(), ErrorCode::validation,
            "tree: node without member statements");
    require(!n.gloss_ids.empty(), ErrorCode::validation, "tree: node without gloss ids");
    require(static_cast<int>(n.centroid.size()) == tree.dimension, ErrorCode::validation,
            "tree: centroid dimension mismatch");
    const double cn = norm(n.centroid);
    require(cn == 0.0 || std::abs(cn - 1.0) <= 1e-9, ErrorCode::validation,
            "tree: centroid is neither zero nor unit norm");

    if (n.level == 1) {
      require(!n.parent_id, ErrorCode::validation, "tree: level-1 node with a parent");
    } else {
      require(n.parent_id.has_value(), ErrorCode::validation,
              "tree: non-root node without a parent");
      const TreeNode& p = tree.node(*n.parent_id);
      require(p.level + 1 == n.level, ErrorCode::validation,
              "tree: child level must be parent level + 1");
      require(std::count(p.children.begin(), p.children.end(), n.node_id) == 1,
              ErrorCode::validation, "tree: parent does not list node as child exactly once");
    }
    for (int c : n.children) {
      const TreeNode& child = tree.node(c);
      require(child.parent_id && *child.parent_id == n.node_id, ErrorCode::validation,
              "tree: child does not point back to parent");
    }
    if (n.level == depth) {
      require(n.children.empty(), ErrorCode::validation,
              "tree: node at the deepest level has children");
    } else {
      require(!n.children.empty(), ErrorCode::validation,
              "tree: internal node without children (uniform depth violated)");
    }
    if (depth == 3 && n.level == 3)
      require(n.member_statement_ids.size() == 1, ErrorCode::validation,
              "tree: leaf must hold exactly one statement");
  }

  // Reachability from the level-1 roots (no orphans).
  std::vector<char> reached(tree.nodes.size(), 0);
  std::vector<int> stack(tree.level1_ids.begin(), tree.level1_ids.end());
  for (int id : tree.level1_ids)
    require(tree.node(id).level == 1, ErrorCode::validation, "tree: level1_ids entry not level 1");
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    require(!reached[id], ErrorCode::validation, "tree: node reached twice (cycle or shared child)");
    reached[id] = 1;
    for (int c : tree.node(id).children) stack.push_back(c);
  }
  for (std::size_t i = 0; i < tree.nodes.size(); ++i)
    require(reached[i], ErrorCode::validation,
            "tree: orphan node " + std::to_string(i) + " unreachable from level 1");

  if (!corpus) return;

  require(corpus->dimension == tree.dimension, ErrorCode::dimension_mismatch,
          "tree: corpus dimension differs from tree dimension");
  const auto idx = detail::index_statements(*corpus);

  // Level-1 member sets partition the statement ids.
  std::set<std::int64_t> seen;
  std::size_t level1_total = 0;
  for (int id : tree.level1_ids) {
    for (std::int64_t s : tree.node(id).member_statement_ids) {
      require(seen.insert(s).second, ErrorCode::validation,
              "tree: statement assigned to two level-1 nodes");
      ++level1_total;
    }
  }
  require(level1_total == idx.statements.size() &&
              seen.size() == idx.by_id.size(),
          ErrorCode::validation, "tree: level-1 members do not partition the corpus");
  for (const auto& [id, s] : idx.by_id)
    require(seen.count(id) == 1, ErrorCode::validation,
            "tree: statement " + std::to_string(id) + " missing from level 1");

  // gloss_ids must equal the owners of the member statements.
  for (const TreeNode& n : tree.nodes) {
    std::set<int> owners;
    for (std::int64_t s : n.member_statement_ids) {
      auto it = idx.by_id.find(s);
      require(it != idx.by_id.end(), ErrorCode::validation,
              "tree: member statement not present in corpus");
      owners.insert(it->second->gloss_id);
    }
    require(std::vector<int>(owners.begin(), owners.end()) == n.gloss_ids,
            ErrorCode::validation, "tree: gloss_ids differ from member owners");
  }

  // Children of a level-1 node partition exactly its augmented clustering set.
  if (depth >= 2) {
    for (int id : tree.level1_ids) {
      const TreeNode& e = tree.node(id);
      std::set<std::int64_t> expected(e.member_statement_ids.begin(),
                                      e.member_statement_ids.end());
      for (std::int64_t s : e.member_statement_ids) {
        auto it = idx.successor.find(s);
        if (it != idx.successor.end()) expected.insert(it->second);
      }
      std::set<std::int64_t> actual;
      std::size_t child_total = 0;
      for (int c : e.children) {
        for (std::int64_t s : tree.node(c).member_statement_ids) {
          require(actual.insert(s).second, ErrorCode::validation,
                  "tree: statement in two sibling level-2 nodes");
          ++child_total;
        }
      }
      require(actual == expected && child_total == expected.size(), ErrorCode::validation,
              "tree: level-2 members differ from the augmented clustering set");
    }
  }

  // At depth 3 every corpus statement must appear in at least one leaf, and
  // leaf count equals the total level-2 membership.
  if (depth == 3) {
    std::set<std::int64_t> leaf_statements;
    std::size_t leaf_count = 0;
    std::size_t level2_members = 0;
    for (const TreeNode& n : tree.nodes) {
      if (n.level == 3) {
        ++leaf_count;
        leaf_statements.insert(n.member_statement_ids.front());
      }
      if (n.level == 2) level2_members += n.member_statement_ids.size();
    }
    require(leaf_count == level2_members, ErrorCode::validation,
            "tree: leaf count differs from total level-2 membership");
    for (const auto& [id, s] : idx.by_id)
      require(leaf_statements.count(id) == 1, ErrorCode::validation,
              "tree: statement " + std::to_string(id) + " has no leaf");
  }

  // Every gloss appears at every level.
  for (int level = 1; level <= depth; ++level) {
    std::set<int> glosses;
    for (const TreeNode& n : tree.nodes)
      if (n.level == level) glosses.insert(n.gloss_ids.begin(), n.gloss_ids.end());
    for (const auto& g : corpus->glosses)
      require(glosses.count(g.gloss_id) == 1, ErrorCode::validation,
              "tree: gloss " + std::to_string(g.gloss_id) + " missing at level " +
                  std::to_string(level));
  }
}

// ---------------------------------------------------------------------------
// JSON serialization

inline std::string branching_rule_name(BranchingRule rule) {
  return rule == BranchingRule::sqrt_rule ? "sqrt-rule" : "fixed-count";
}

inline BranchingRule branching_rule_from_name(const std::string& name) {
  if (name == "sqrt-rule") return BranchingRule::sqrt_rule;
  if (name == "fixed-count") return BranchingRule::fixed_count;
  fail(ErrorCode::parse, "unknown branching rule '" + name + "'");
}

inline nlohmann::ordered_json tree_config_to_json(const TreeConfig& config) {
  nlohmann::ordered_json j;
  if (config.n1)
    j["n1"] = *config.n1;
  else
    j["n1"] = nullptr;
  j["branching_rule"] = branching_rule_name(config.branching_rule);
  j["seed"] = config.seed;
  j["max_iterations"] = config.max_iterations;
  j["convergence_epsilon"] = config.convergence_epsilon;
  j["depth"] = config.depth;
  return j;
}

inline TreeConfig tree_config_from_json(const nlohmann::json& j) {
  TreeConfig config;
  if (j.contains("n1") && !j.at("n1").is_null()) config.n1 = j.at("n1").get<int>();
  if (j.contains("branching_rule"))
    config.branching_rule = branching_rule_from_name(j.at("branching_rule").get<std::string>());
  if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("max_iterations")) config.max_iterations = j.at("max_iterations").get<int>();
  if (j.contains("convergence_epsilon"))
    config.convergence_epsilon = j.at("convergence_epsilon").get<double>();
  if (j.contains("depth")) config.depth = j.at("depth").get<int>();
  return config;
}

inline void save_tree(const SubactionTree& tree, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["dimension"] = tree.dimension;
  j["config"] = tree_config_to_json(tree.config);
  auto& nodes = j["nodes"] = nlohmann::ordered_json::array();
  for (const TreeNode& n : tree.nodes) {
    nlohmann::ordered_json nj;
    nj["node_id"] = n.node_id;
    nj["level"] = n.level;
    if (n.parent_id)
      nj["parent_id"] = *n.parent_id;
    else
      nj["parent_id"] = nullptr;
    nj["children"] = n.children;
    nj["centroid"] = n.centroid;
    nj["member_statement_ids"] = n.member_statement_ids;
    nj["gloss_ids"] = n.gloss_ids;
    nodes.push_back(std::move(nj));
  }
  auto out = open_for_write(path);
  out << j.dump(2) << '\n';
  require(out.good(), ErrorCode::io, "write failed for " + path.string());
}

inline SubactionTree load_tree(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse, path.string() + ": " + e.what());
  }

  SubactionTree tree;
  try {
    tree.dimension = j.at("dimension").get<int>();
    tree.config = tree_config_from_json(j.at("config"));
    for (const auto& nj : j.at("nodes")) {
      TreeNode n;
      n.node_id = nj.at("node_id").get<int>();
      n.level = nj.at("level").get<int>();
      if (!nj.at("parent_id").is_null()) n.parent_id = nj.at("parent_id").get<int>();
      n.children = nj.at("children").get<std::vector<int>>();
      n.centroid = nj.at("centroid").get<std::vector<double>>();
      n.member_statement_ids = nj.at("member_statement_ids").get<std::vector<std::int64_t>>();
      n.gloss_ids = nj.at("gloss_ids").get<std::vector<int>>();
      tree.nodes.push_back(std::move(n));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse, path.string() + ": " + e.what());
  }
  for (const TreeNode& n : tree.nodes)
    if (n.level == 1) tree.level1_ids.push_back(n.node_id);
  validate_tree(tree);
  return tree;
}

}  // namespace hst
