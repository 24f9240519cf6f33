#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace efg {

using NodeId = std::size_t;

struct TreeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A finite rooted forest given by a parent array. "Tree" follows the game
// literature: several roots are allowed.
class Tree {
 public:
  Tree() = default;
  static Tree build(const std::vector<std::optional<NodeId>>& parents);
  static Tree chain(std::size_t n);
  // k roots, every node below depth `depth` has k children; ids in preorder
  static Tree full_branching(std::size_t k, std::size_t depth);
  static Tree from_canonical(const std::string& code);

  std::size_t size() const { return parent_.size(); }
  std::optional<NodeId> parent(NodeId n) const { return parent_.at(n); }
  std::size_t height(NodeId n) const { return height_.at(n); }
  const std::vector<NodeId>& children(NodeId n) const { return children_.at(n); }
  const std::vector<NodeId>& roots() const { return roots_; }
  const std::vector<std::optional<NodeId>>& parents() const { return parent_; }
  std::size_t max_height() const;  // 0 for the empty tree
  std::vector<NodeId> at_height(std::size_t h) const;

  bool below(NodeId a, NodeId b) const;  // a <_T b, strict
  bool below_or_equal(NodeId a, NodeId b) const { return a == b || below(a, b); }
  bool comparable(NodeId a, NodeId b) const { return below_or_equal(a, b) || below(b, a); }
  // nodes strictly above `from`, or every node when `from` is empty
  std::vector<NodeId> above(std::optional<NodeId> from) const;
  std::vector<NodeId> path_to(NodeId n) const;  // root first, n last
  // tree order refines the numbering: a <_T b implies a < b
  bool ordered_by_ids() const;

  bool is_antichain(const std::vector<NodeId>& nodes) const;
  bool is_branch(const std::vector<NodeId>& nodes) const;  // a chain closed downward
  bool is_downward_closed(const std::vector<NodeId>& nodes) const;
  // the subtree on a downward closed set, renumbered in increasing id order
  Tree restrict_to(const std::vector<NodeId>& nodes) const;

  // isomorphism-invariant code: each root as "(" + sorted child codes + ")"
  std::string canonical() const;
  bool operator==(const Tree& o) const { return parent_ == o.parent_; }

 private:
  std::vector<std::optional<NodeId>> parent_;
  std::vector<std::size_t> height_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<NodeId> roots_;
};

enum class ProductOrder { Preorder, ByHeight };

// Pairs (s, sigma) of equal height ordered coordinatewise.
struct ProductTree {
  Tree tree;
  std::vector<std::pair<NodeId, NodeId>> pairs;  // product node -> (left node, right node)
  std::optional<NodeId> find(NodeId left, NodeId right) const;
};

ProductTree tree_product(const Tree& left, const Tree& right, ProductOrder order = ProductOrder::Preorder);

// <_T-minimal elements of {t : lo <= t < hi}
std::vector<NodeId> minimal_antichain(const Tree& t, NodeId lo, NodeId hi);

// Increasing finite pieces of an antichain: piece n holds the first n+1 ids.
class ChainCover {
 public:
  explicit ChainCover(std::vector<NodeId> antichain);
  std::vector<NodeId> piece(std::size_t n) const;
  std::size_t stable_from() const { return members_.size() - 1; }
  const std::vector<NodeId>& members() const { return members_; }

 private:
  std::vector<NodeId> members_;
};

ChainCover antichain_chain_cover(const std::vector<NodeId>& antichain);

// A strictly increasing run of stage indices below `target`, ending at target-1.
struct Ladder {
  std::size_t target = 0;
  std::vector<std::size_t> steps;
  std::string str() const;
};

// is_special(stage) marks the stages a ladder must avoid; throws TreeError when invalid
void validate_ladder(const Ladder& l, const std::vector<bool>& is_special);
std::vector<Ladder> all_ladders(std::size_t target, const std::vector<bool>& is_special);
// the increasing enumeration of allowed stages in (floor, target), when that is a ladder
std::optional<Ladder> canonical_ladder(std::size_t target, const std::vector<bool>& is_special,
                                       std::optional<std::size_t> floor = std::nullopt);

// every forest with 1..max_nodes nodes up to isomorphism, ids in preorder
std::vector<Tree> all_forests(std::size_t max_nodes);

}  // namespace efg
