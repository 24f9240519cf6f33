#include "catch_amalgamated.hpp"

#include "efg/efgame.hpp"
#include "naive_groups.hpp"

#include <random>

using namespace efg;

namespace {

GameSpec finite_game(const Presentation& a, const Presentation& b, const Tree& t) {
  return {Structure::whole(a), Structure::whole(b), t};
}

FunctionStrategy identity_strategy() {
  return FunctionStrategy([](const std::vector<PlayedRound>&, NodeId, Side, const GroupElement& x) { return x; });
}

std::vector<Presentation> catalog() {
  return {Presentation::cyclic(2), Presentation::cyclic(3), Presentation::cyclic(4), Presentation::diagonal({2, 2}),
          Presentation::cyclic(6)};
}

// all downward closed node sets of t
std::vector<std::vector<NodeId>> lower_sets(const Tree& t) {
  std::vector<std::vector<NodeId>> out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << t.size()); ++mask) {
    std::vector<NodeId> s;
    for (NodeId i = 0; i < t.size(); ++i)
      if (mask >> i & 1) s.push_back(i);
    if (t.is_downward_closed(s)) out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("a group is equivalent to itself on every small tree") {
  const Presentation g = Presentation::cyclic(4);
  for (const auto& t : all_forests(6)) {
    GameSpec spec = finite_game(g, g, t);
    REQUIRE(solve_game(spec).winner == Player::Exists);
  }
}

TEST_CASE("Z/2 against Z/3 on one node") {
  // every nonzero element of Z/3 has order 3, so nothing answers the element of order 2
  naive::FiniteGroup z3(Presentation::cyclic(3));
  for (const auto& e : z3.elements())
    if (!efg::is_zero(e)) REQUIRE(z3.element_order(e) == 3);
  GameSpec spec = finite_game(Presentation::cyclic(2), Presentation::cyclic(3), Tree::chain(1));
  SolveResult r = solve_game(spec);
  CHECK(r.winner == Player::Forall);
  REQUIRE(r.forall_moves.size() >= 1);
}

TEST_CASE("Z/2 against Z/2+Z/2 on a two-chain") {
  GameSpec spec = finite_game(Presentation::cyclic(2), Presentation::diagonal({2, 2}), Tree::chain(2));
  CHECK(solve_game(spec).winner == Player::Forall);
  // the play (1,0) then (0,1): any two replies in Z/2 either coincide or one is zero
  naive::FiniteGroup z2(Presentation::cyclic(2));
  for (const auto& a : z2.elements())
    for (const auto& b : z2.elements()) {
      const bool distinct_nonzero = !efg::is_zero(a) && !efg::is_zero(b) && !(a == b);
      REQUIRE_FALSE(distinct_nonzero);
    }
}

TEST_CASE("t_equivalent examples") {
  for (const auto& g : catalog())
    for (const auto& t : {Tree::chain(1), Tree::chain(3), Tree::full_branching(2, 2)})
      CHECK(t_equivalent(g, g, t));
  CHECK_FALSE(t_equivalent(Presentation::cyclic(4), Presentation::diagonal({2, 2}), Tree::chain(1)));
  CHECK(t_equivalent(Presentation::cyclic(2), Presentation::diagonal({2, 2}), Tree::chain(1)));
}

TEST_CASE("verify_strategy examples") {
  const Presentation z2 = Presentation::cyclic(2);
  GameSpec same = finite_game(Presentation::cyclic(6), Presentation::cyclic(6), Tree::chain(3));
  auto id = identity_strategy();
  CHECK(verify_strategy(same, id).wins);

  GameSpec pair = finite_game(z2, z2, Tree::chain(2));
  FunctionStrategy zero([](const std::vector<PlayedRound>&, NodeId, Side, const GroupElement&) {
    return GroupElement{0};
  });
  VerifyResult v = verify_strategy(pair, zero);
  CHECK_FALSE(v.wins);
  CHECK_FALSE(v.counterexample.empty());
}

TEST_CASE("solver strategies verify and agree with minimax") {
  const auto forests = all_forests(4);
  for (const auto& a : catalog())
    for (const auto& b : catalog())
      for (const auto& t : forests) {
        GameSpec spec = finite_game(a, b, t);
        auto oracle = default_oracle(spec);
        SolveResult r = solve_game(spec, *oracle);
        try {
          REQUIRE(minimax(spec, 100'000) == r.winner);
        } catch (const BudgetExceeded&) {
        }
        if (are_isomorphic(a, b)) REQUIRE(r.winner == Player::Exists);
        if (r.winner == Player::Exists) {
          TableStrategy s(spec, *oracle, r);
          REQUIRE(verify_strategy(spec, s).wins);
        }
      }
}

TEST_CASE("winning on a tree implies winning on its lower subtrees") {
  for (const auto& t : all_forests(5))
    for (const auto& [a, b] : {std::pair{Presentation::cyclic(2), Presentation::diagonal({2, 2})},
                               std::pair{Presentation::cyclic(4), Presentation::cyclic(4)},
                               std::pair{Presentation::cyclic(2), Presentation::cyclic(6)}}) {
      if (!t_equivalent(a, b, t)) continue;
      for (const auto& s : lower_sets(t)) REQUIRE(t_equivalent(a, b, t.restrict_to(s)));
    }
}

TEST_CASE("the two oracles agree") {
  std::mt19937_64 rng(17);
  for (const auto& a : catalog())
    for (const auto& b : catalog()) {
      GameSpec spec = finite_game(a, b, Tree::chain(1));
      FiniteProductOracle fin(spec);
      LatticeOracle lat(spec);
      std::uniform_int_distribution<std::size_t> ia(0, spec.left.carrier.size() - 1),
          ib(0, spec.right.carrier.size() - 1);
      for (int trial = 0; trial < 60; ++trial) {
        IndexPairs p;
        for (int k = trial % 4; k >= 0; --k) p.emplace_back(ia(rng), ib(rng));
        REQUIRE(fin.holds(p) == lat.holds(p));
      }
    }
}

TEST_CASE("threaded solving gives the same answers") {
  for (const auto& t : {Tree::chain(3), Tree::full_branching(2, 2)})
    for (const auto& [a, b] : {std::pair{Presentation::cyclic(6), Presentation::cyclic(6)},
                               std::pair{Presentation::cyclic(2), Presentation::diagonal({2, 2})}}) {
      GameSpec spec = finite_game(a, b, t);
      auto oracle = default_oracle(spec);
      SolveResult one = solve_game(spec, *oracle);
      SolveResult many = solve_game(spec, *oracle, SolveOptions{1'000'000, 3});
      REQUIRE(one.winner == many.winner);
      for (const auto& [k, v] : one.exists_replies) {
        auto it = many.exists_replies.find(k);
        if (it != many.exists_replies.end()) REQUIRE(it->second == v);
      }
      if (one.winner == Player::Exists) {
        TableStrategy s(spec, *oracle, many);
        REQUIRE(verify_strategy(spec, s).wins);
      }
    }
}

TEST_CASE("state budget is reported") {
  GameSpec spec = finite_game(Presentation::cyclic(6), Presentation::cyclic(6), Tree::chain(4));
  CHECK_THROWS_AS(solve_game(spec, SolveOptions{3, 1}), BudgetExceeded);
}

TEST_CASE("ball restricted games") {
  Structure s = Structure::ball(Presentation::free(2), 1);
  CHECK(s.carrier.size() == 5);
  CHECK(s.ball_restricted);
  GameSpec spec{s, s, Tree::chain(2)};
  SolveResult r = solve_game(spec);
  CHECK(r.ball_restricted);
  CHECK(r.winner == Player::Exists);
  auto id = identity_strategy();
  CHECK(verify_strategy(spec, id).wins);
}

TEST_CASE("coherent families") {
  const Tree play = Tree::chain(2);
  ProductTree index = tree_product(play, Tree::full_branching(2, 2));
  REQUIRE(index.tree.size() == 2 + 4);
  // restrictions of one automorphism of Z^3, domain growing with the node
  const IntMatrix global{{1, 1, 0}, {0, 1, 0}, {2, 3, 1}};
  CoherentFamily fam{Presentation::free(3), Presentation::free(3), {}, {}};
  for (NodeId v = 0; v < index.tree.size(); ++v) {
    const std::size_t r = std::min<std::size_t>(3, 1 + index.tree.height(v) * 2);
    fam.domain_rank.push_back(r);
    fam.maps.push_back(global.submatrix(0, 0, r, 3));
  }
  // first rows must stay inside their stage
  CHECK_THROWS_AS(strategy_from_coherent_family(fam, play, index), StrategyError);

  const IntMatrix lower{{1, 0, 0}, {1, 1, 0}, {2, 3, 1}};
  for (NodeId v = 0; v < index.tree.size(); ++v) fam.maps[v] = lower.submatrix(0, 0, fam.domain_rank[v], 3);
  auto strat = strategy_from_coherent_family(fam, play, index);
  GameSpec spec{Structure::ball(Presentation::free(3), 1), Structure::ball(Presentation::free(3), 1), play};
  // on the root only x_0 multiples are admissible, so forall's other picks must wait
  GameSpec root_only{spec.left, spec.right, Tree::chain(1)};
  CHECK_FALSE(verify_strategy(root_only, *strat).wins);

  CoherentFamily broken = fam;
  broken.maps[2](0, 0) = -1;
  CHECK_THROWS_AS(strategy_from_coherent_family(broken, play, index), StrategyError);

  // whole domains everywhere: the strategy wins outright
  CoherentFamily full = fam;
  for (NodeId v = 0; v < index.tree.size(); ++v) {
    full.domain_rank[v] = 3;
    full.maps[v] = lower;
  }
  auto whole = strategy_from_coherent_family(full, play, index);
  CHECK(verify_strategy(spec, *whole).wins);
}

TEST_CASE("transcripts as json") {
  Transcript t;
  t.rounds.push_back({0, Side::Left, GroupElement{1}, GroupElement{2}});
  t.verdict = "forall-wins";
  auto j = transcript_json(t);
  CHECK(j["moves"].size() == 1);
  CHECK(j["moves"][0]["side"] == "left");
  CHECK(j["moves"][0]["reply"][0] == 2);
  CHECK(j["verdict"] == "forall-wins");
}
