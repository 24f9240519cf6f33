#pragma once

#include "efg/abgroup.hpp"
#include "efg/trees.hpp"

#include <json.hpp>

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace efg {

enum class Side { Left, Right };
enum class Player { Forall, Exists };

inline Side other(Side s) { return s == Side::Left ? Side::Right : Side::Left; }
std::string to_string(Side s);
std::string to_string(Player p);

struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StrategyError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A group together with the finite set of elements the players may pick.
struct Structure {
  Presentation group;
  std::vector<GroupElement> carrier;
  bool ball_restricted = false;

  static Structure whole(const Presentation& g, std::size_t max_order = 4096);
  // elements with sum |c_i| <= radius in generator coefficients, duplicates removed
  static Structure ball(const Presentation& g, std::size_t radius);
  std::optional<std::size_t> index_of(const GroupElement& x) const;  // literal match first, then coset
};

struct GameSpec {
  Structure left;
  Structure right;
  Tree tree;
  bool ball_restricted() const { return left.ball_restricted || right.ball_restricted; }
  const Structure& side(Side s) const { return s == Side::Left ? left : right; }
};

using ElemIndex = std::size_t;
using IndexPairs = std::vector<std::pair<ElemIndex, ElemIndex>>;  // (left, right)

// Decides whether the pairs played so far form a partial isomorphism. key()
// must agree on any two pair lists whose continuations have the same value.
class PairOracle {
 public:
  virtual ~PairOracle() = default;
  virtual bool holds(const IndexPairs& pairs) const = 0;
  virtual std::string key(const IndexPairs& pairs) const;  // default: sorted distinct pairs
};

// relation lattices compared through is_partial_iso (or ranks when both groups are torsion-free)
class LatticeOracle : public PairOracle {
 public:
  explicit LatticeOracle(const GameSpec& spec);
  bool holds(const IndexPairs& pairs) const override;

 private:
  const GameSpec* spec_;
  bool torsion_free_;
  std::vector<IntVector> left_coords_, right_coords_;
};

// For finite groups: the pairs generate H <= A x B, and the map is a partial
// isomorphism iff |H| = |pi_A H| = |pi_B H|. H itself is the memo key.
class FiniteProductOracle : public PairOracle {
 public:
  explicit FiniteProductOracle(const GameSpec& spec);
  bool holds(const IndexPairs& pairs) const override;
  std::string key(const IndexPairs& pairs) const override;

 private:
  std::vector<bool> span(const IndexPairs& pairs) const;
  std::size_t left_order_ = 0, right_order_ = 0;
  std::vector<std::size_t> left_code_, right_code_;  // carrier index -> group element code
  std::vector<std::vector<std::size_t>> left_add_, right_add_;
};

std::unique_ptr<PairOracle> default_oracle(const GameSpec& spec);

struct ForallMove {
  NodeId node = 0;
  Side side = Side::Left;
  ElemIndex element = 0;
};

struct SolveOptions {
  std::size_t max_states = 2'000'000;
  unsigned threads = 1;
};

struct SolveResult {
  Player winner = Player::Exists;
  std::size_t states_explored = 0;
  bool ball_restricted = false;
  // replies of the winner, keyed by position
  std::map<std::string, ElemIndex> exists_replies;  // position + forall move -> reply
  std::map<std::string, ForallMove> forall_moves;   // position -> winning move
};

std::string position_key(const PairOracle& oracle, std::optional<NodeId> node, const IndexPairs& pairs);
std::string move_key(const std::string& position, const ForallMove& m);

SolveResult solve_game(const GameSpec& spec, const PairOracle& oracle, const SolveOptions& opts = {});
SolveResult solve_game(const GameSpec& spec, const SolveOptions& opts = {});

// Plain backward induction: no table of game values. Partial isomorphism is
// checked with is_partial_iso on the actual elements, cached per set of pairs.
// Throws BudgetExceeded past max_positions.
Player minimax(const GameSpec& spec, std::size_t max_positions, std::size_t* positions = nullptr);

bool t_equivalent(const Presentation& a, const Presentation& b, const Tree& t, const SolveOptions& opts = {});

struct PlayedRound {
  NodeId node = 0;
  Side side = Side::Left;
  GroupElement chosen;
  GroupElement reply;
};

class ExistsStrategy {
 public:
  virtual ~ExistsStrategy() = default;
  virtual GroupElement respond(const std::vector<PlayedRound>& history, NodeId node, Side side,
                               const GroupElement& chosen) const = 0;
};

class FunctionStrategy : public ExistsStrategy {
 public:
  using Fn = std::function<GroupElement(const std::vector<PlayedRound>&, NodeId, Side, const GroupElement&)>;
  explicit FunctionStrategy(Fn fn) : fn_(std::move(fn)) {}
  GroupElement respond(const std::vector<PlayedRound>& h, NodeId n, Side s, const GroupElement& x) const override {
    return fn_(h, n, s, x);
  }

 private:
  Fn fn_;
};

// replies read off a solver table; throws StrategyError off the table
class TableStrategy : public ExistsStrategy {
 public:
  TableStrategy(const GameSpec& spec, const PairOracle& oracle, SolveResult result);
  GroupElement respond(const std::vector<PlayedRound>& history, NodeId node, Side side,
                       const GroupElement& chosen) const override;

 private:
  const GameSpec* spec_;
  const PairOracle* oracle_;
  SolveResult result_;
};

struct VerifyResult {
  bool wins = true;
  std::size_t plays = 0;
  std::vector<PlayedRound> counterexample;
  std::string reason;
};

// Every complete play of forall against s, with forall choosing from the
// carriers. Replies may be any group elements.
VerifyResult verify_strategy(const GameSpec& spec, const ExistsStrategy& s, std::size_t max_plays = 50'000'000);

// A family of maps f_nu indexed by the nodes of an index tree. Member nu maps
// the first domain_rank[nu] coordinates of the left group isomorphically onto
// the first domain_rank[nu] coordinates of the right group. Both groups must be
// relation-free presentations (coordinates).
struct CoherentFamily {
  Presentation left;
  Presentation right;
  std::vector<std::size_t> domain_rank;
  std::vector<IntMatrix> maps;  // domain_rank[nu] x right.gen_count
};

class CoherentStrategy : public ExistsStrategy {
 public:
  CoherentStrategy(CoherentFamily family, Tree play_tree, ProductTree index);
  GroupElement respond(const std::vector<PlayedRound>& history, NodeId node, Side side,
                       const GroupElement& chosen) const override;
  // the index nodes used along a play, one per round
  std::vector<NodeId> index_path(const std::vector<PlayedRound>& history) const;

 private:
  NodeId choose(std::optional<NodeId> prev, NodeId play_node, Side side, const GroupElement& y) const;
  CoherentFamily family_;
  Tree play_;
  ProductTree index_;
  std::vector<IntMatrix> inverses_;
  std::vector<std::vector<NodeId>> by_play_;  // play node -> index nodes over it, increasing
  bool ordered_ = false;
};

// validates coherence along the index tree and bijectivity of every member
std::unique_ptr<CoherentStrategy> strategy_from_coherent_family(const CoherentFamily& family, const Tree& play_tree,
                                                                const ProductTree& index);

struct Transcript {
  std::vector<PlayedRound> rounds;
  std::string verdict;  // "exists-wins", "forall-wins" or "abandoned"
  std::string detail;
};

nlohmann::ordered_json transcript_json(const Transcript& t);

}  // namespace efg
