#include "efg/trees.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

namespace efg {

Tree Tree::build(const std::vector<std::optional<NodeId>>& parents) {
  Tree t;
  const std::size_t n = parents.size();
  for (std::size_t i = 0; i < n; ++i)
    if (parents[i] && *parents[i] >= n)
      throw TreeError("node " + std::to_string(i) + " has dangling parent " + std::to_string(*parents[i]));
  t.parent_ = parents;
  t.height_.assign(n, 0);
  t.children_.assign(n, {});
  // heights by walking up; a walk longer than n means a cycle
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t h = 0;
    std::optional<NodeId> cur = parents[i];
    while (cur) {
      if (++h > n) throw TreeError("cycle through node " + std::to_string(i));
      cur = parents[*cur];
    }
    t.height_[i] = h;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (parents[i])
      t.children_[*parents[i]].push_back(i);
    else
      t.roots_.push_back(i);
  }
  return t;
}

Tree Tree::chain(std::size_t n) {
  std::vector<std::optional<NodeId>> p(n);
  for (std::size_t i = 1; i < n; ++i) p[i] = i - 1;
  return build(p);
}

Tree Tree::full_branching(std::size_t k, std::size_t depth) {
  std::vector<std::optional<NodeId>> p;
  std::function<void(std::optional<NodeId>, std::size_t)> grow = [&](std::optional<NodeId> par, std::size_t level) {
    if (level >= depth) return;
    for (std::size_t i = 0; i < k; ++i) {
      p.push_back(par);
      grow(p.size() - 1, level + 1);
    }
  };
  grow(std::nullopt, 0);
  return build(p);
}

Tree Tree::from_canonical(const std::string& code) {
  std::vector<std::optional<NodeId>> p;
  std::vector<NodeId> open;
  for (char c : code) {
    if (c == '(') {
      p.push_back(open.empty() ? std::nullopt : std::optional<NodeId>(open.back()));
      open.push_back(p.size() - 1);
    } else if (c == ')') {
      if (open.empty()) throw TreeError("unbalanced tree code");
      open.pop_back();
    } else {
      throw TreeError("bad character in tree code");
    }
  }
  if (!open.empty()) throw TreeError("unbalanced tree code");
  return build(p);
}

std::size_t Tree::max_height() const {
  std::size_t m = 0;
  for (auto h : height_) m = std::max(m, h);
  return m;
}

std::vector<NodeId> Tree::at_height(std::size_t h) const {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < size(); ++i)
    if (height_[i] == h) out.push_back(i);
  return out;
}

bool Tree::below(NodeId a, NodeId b) const {
  if (height_.at(a) >= height_.at(b)) return false;
  std::optional<NodeId> cur = parent_[b];
  while (cur) {
    if (*cur == a) return true;
    cur = parent_[*cur];
  }
  return false;
}

std::vector<NodeId> Tree::above(std::optional<NodeId> from) const {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < size(); ++i)
    if (!from || below(*from, i)) out.push_back(i);
  return out;
}

std::vector<NodeId> Tree::path_to(NodeId n) const {
  std::vector<NodeId> out{n};
  while (parent_.at(out.back())) out.push_back(*parent_[out.back()]);
  std::reverse(out.begin(), out.end());
  return out;
}

bool Tree::ordered_by_ids() const {
  for (NodeId i = 0; i < size(); ++i)
    if (parent_[i] && *parent_[i] >= i) return false;
  return true;
}

bool Tree::is_antichain(const std::vector<NodeId>& nodes) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = i + 1; j < nodes.size(); ++j)
      if (comparable(nodes[i], nodes[j])) return false;
  return true;
}

bool Tree::is_branch(const std::vector<NodeId>& nodes) const {
  if (nodes.empty()) return true;
  NodeId top = nodes.front();
  for (NodeId n : nodes)
    if (height_.at(n) > height_.at(top)) top = n;
  auto path = path_to(top);
  std::set<NodeId> want(path.begin(), path.end()), have(nodes.begin(), nodes.end());
  return want == have && have.size() == nodes.size();
}

bool Tree::is_downward_closed(const std::vector<NodeId>& nodes) const {
  std::set<NodeId> s(nodes.begin(), nodes.end());
  for (NodeId n : s) {
    if (n >= size()) return false;
    if (parent_[n] && !s.count(*parent_[n])) return false;
  }
  return true;
}

Tree Tree::restrict_to(const std::vector<NodeId>& nodes) const {
  if (!is_downward_closed(nodes)) throw TreeError("restriction to a set that is not downward closed");
  std::vector<NodeId> sorted(nodes.begin(), nodes.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::map<NodeId, NodeId> renum;
  for (std::size_t i = 0; i < sorted.size(); ++i) renum[sorted[i]] = i;
  std::vector<std::optional<NodeId>> p(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    if (parent_[sorted[i]]) p[i] = renum.at(*parent_[sorted[i]]);
  return build(p);
}

std::string Tree::canonical() const {
  std::function<std::string(NodeId)> code = [&](NodeId n) {
    std::vector<std::string> parts;
    for (NodeId c : children_[n]) parts.push_back(code(c));
    std::sort(parts.begin(), parts.end());
    std::string s = "(";
    for (auto& p : parts) s += p;
    return s + ")";
  };
  std::vector<std::string> parts;
  for (NodeId r : roots_) parts.push_back(code(r));
  std::sort(parts.begin(), parts.end());
  std::string s;
  for (auto& p : parts) s += p;
  return s;
}

std::optional<NodeId> ProductTree::find(NodeId left, NodeId right) const {
  for (NodeId i = 0; i < pairs.size(); ++i)
    if (pairs[i] == std::make_pair(left, right)) return i;
  return std::nullopt;
}

ProductTree tree_product(const Tree& left, const Tree& right, ProductOrder order) {
  using Pair = std::pair<NodeId, NodeId>;
  std::vector<Pair> nodes;
  if (order == ProductOrder::Preorder) {
    std::function<void(Pair)> visit = [&](Pair p) {
      nodes.push_back(p);
      for (NodeId a : left.children(p.first))
        for (NodeId b : right.children(p.second)) visit({a, b});
    };
    for (NodeId a : left.roots())
      for (NodeId b : right.roots()) visit({a, b});
  } else {
    const std::size_t top = std::min(left.max_height(), right.max_height());
    for (std::size_t h = 0; h <= top && left.size() && right.size(); ++h)
      for (NodeId a : left.at_height(h))
        for (NodeId b : right.at_height(h)) nodes.push_back({a, b});
  }
  std::map<Pair, NodeId> index;
  for (NodeId i = 0; i < nodes.size(); ++i) index[nodes[i]] = i;
  std::vector<std::optional<NodeId>> parents(nodes.size());
  for (NodeId i = 0; i < nodes.size(); ++i) {
    auto pa = left.parent(nodes[i].first);
    auto pb = right.parent(nodes[i].second);
    if (pa && pb) parents[i] = index.at({*pa, *pb});
  }
  return {Tree::build(parents), nodes};
}

std::vector<NodeId> minimal_antichain(const Tree& t, NodeId lo, NodeId hi) {
  if (lo > hi) throw TreeError("minimal_antichain: lower bound above upper bound");
  if (hi > t.size()) throw TreeError("minimal_antichain: bound past the last node");
  std::vector<NodeId> out;
  for (NodeId n = lo; n < hi; ++n) {
    bool minimal = true;
    for (std::optional<NodeId> cur = t.parent(n); cur; cur = t.parent(*cur))
      if (*cur >= lo && *cur < hi) {
        minimal = false;
        break;
      }
    if (minimal) out.push_back(n);
  }
  return out;
}

ChainCover::ChainCover(std::vector<NodeId> antichain) : members_(std::move(antichain)) {
  if (members_.empty()) throw TreeError("chain cover of an empty antichain");
  std::sort(members_.begin(), members_.end());
  members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
}

std::vector<NodeId> ChainCover::piece(std::size_t n) const {
  const std::size_t k = std::min(n + 1, members_.size());
  return {members_.begin(), members_.begin() + static_cast<std::ptrdiff_t>(k)};
}

ChainCover antichain_chain_cover(const std::vector<NodeId>& antichain) { return ChainCover(antichain); }

std::string Ladder::str() const {
  std::string s = "ladder(" + std::to_string(target) + ":";
  for (std::size_t i = 0; i < steps.size(); ++i) s += (i ? "," : "") + std::to_string(steps[i]);
  return s + ")";
}

void validate_ladder(const Ladder& l, const std::vector<bool>& is_special) {
  if (l.steps.empty()) throw TreeError(l.str() + " has no steps");
  for (std::size_t i = 0; i < l.steps.size(); ++i) {
    const std::size_t s = l.steps[i];
    if (s >= l.target) throw TreeError(l.str() + ": step " + std::to_string(s) + " not below the target");
    if (i && s <= l.steps[i - 1]) throw TreeError(l.str() + ": steps not strictly increasing");
    if (s < is_special.size() && is_special[s])
      throw TreeError(l.str() + ": step " + std::to_string(s) + " is a special stage");
  }
  if (l.steps.back() + 1 != l.target) throw TreeError(l.str() + ": last step must sit just below the target");
}

std::vector<Ladder> all_ladders(std::size_t target, const std::vector<bool>& is_special) {
  std::vector<Ladder> out;
  if (target == 0) return out;
  const std::size_t last = target - 1;
  if (last < is_special.size() && is_special[last]) return out;
  std::vector<std::size_t> allowed;
  for (std::size_t s = 0; s < last; ++s)
    if (s >= is_special.size() || !is_special[s]) allowed.push_back(s);
  const std::size_t subsets = std::size_t{1} << allowed.size();
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    Ladder l{target, {}};
    for (std::size_t i = 0; i < allowed.size(); ++i)
      if (mask >> i & 1) l.steps.push_back(allowed[i]);
    l.steps.push_back(last);
    out.push_back(std::move(l));
  }
  return out;
}

std::optional<Ladder> canonical_ladder(std::size_t target, const std::vector<bool>& is_special,
                                       std::optional<std::size_t> floor) {
  Ladder l{target, {}};
  for (std::size_t s = floor ? *floor + 1 : 0; s < target; ++s)
    if (s >= is_special.size() || !is_special[s]) l.steps.push_back(s);
  try {
    validate_ladder(l, is_special);
  } catch (const TreeError&) {
    return std::nullopt;
  }
  return l;
}

std::vector<Tree> all_forests(std::size_t max_nodes) {
  // forests on n nodes are rooted trees on n+1 nodes with the root removed;
  // enumerate parent arrays with parent < child and keep one per shape
  std::vector<Tree> out;
  for (std::size_t n = 1; n <= max_nodes; ++n) {
    std::set<std::string> seen;
    std::vector<std::size_t> choice(n, 0);  // choice[i] = 0 for a root, j+1 for parent j < i
    for (;;) {
      std::vector<std::optional<NodeId>> p(n);
      for (std::size_t i = 0; i < n; ++i)
        if (choice[i]) p[i] = choice[i] - 1;
      seen.insert(Tree::build(p).canonical());
      std::size_t i = n;
      bool done = true;
      while (i > 0) {
        --i;
        if (choice[i] < i) {
          ++choice[i];
          done = false;
          break;
        }
        choice[i] = 0;
      }
      if (done) break;
    }
    for (const auto& code : seen) out.push_back(Tree::from_canonical(code));
  }
  return out;
}

}  // namespace efg
