#include "catch_amalgamated.hpp"

#include "efg/equivalences.hpp"

#include <random>

using namespace efg;

namespace {

using K = StageKind;

IntVector v2(long a, long b) { return to_int_vector({a, b}); }

Filtration chain_in_z(long a, long b) {
  // 0 <= aZ <= bZ inside Z
  return Filtration::from_generators(1, {{}, {to_int_vector({a})}, {to_int_vector({b})}});
}

BuildConfig matched_config() {
  BuildConfig c;
  c.index = tree_product(Tree::chain(2), Tree::full_branching(2, 3)).tree;
  c.plan = {K::Free, K::E0, K::Free, K::E1, K::Free, K::Free};
  c.script.w_nodes[1] = {{0}};
  c.script.guesses[3] = HGuess{};
  c.gadget_length = 1;
  c.chain_length = 3;
  return c;
}

IntMatrix random_unimodular(std::size_t n, std::mt19937_64& rng, int steps) {
  IntMatrix u = IntMatrix::identity(n);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_int_distribution<long> k(-1, 1);
  for (int s = 0; s < steps; ++s) {
    const std::size_t a = pick(rng), b = pick(rng);
    if (a != b) u.add_row_multiple(a, b, Int(k(rng)));
  }
  return u;
}

// every 2x2 matrix with entries in [-b, b] and determinant +-1
std::vector<IntMatrix> small_automorphisms(long b) {
  std::vector<IntMatrix> out;
  for (long p = -b; p <= b; ++p)
    for (long q = -b; q <= b; ++q)
      for (long r = -b; r <= b; ++r)
        for (long s = -b; s <= b; ++s)
          if (p * s - q * r == 1 || p * s - q * r == -1) out.push_back(IntMatrix{{p, q}, {r, s}});
  return out;
}

bool maps_onto(const IntMatrix& t, const IntMatrix& a, const IntMatrix& b) {
  Subgroup sa = Subgroup::trivial(Presentation::free(2)), sb = sa;
  if (a.rows()) sa.generators = a * t;
  if (b.rows()) sb.generators = b;
  return same_subgroup(sa, sb);
}

}  // namespace

TEST_CASE("filtrations validate") {
  CHECK_NOTHROW(chain_in_z(2, 1));
  CHECK_THROWS_AS(chain_in_z(1, 2), EquivalenceError);
  Filtration f = chain_in_z(2, 1);
  CHECK(f.length() == 2);
}

TEST_CASE("stage quotients") {
  CHECK(stable_quotient_equiv(chain_in_z(2, 1), chain_in_z(2, 1)));
  CHECK_FALSE(stable_quotient_equiv(chain_in_z(2, 1), chain_in_z(3, 1)));
  // same torsion with different ranks still counts
  Filtration a = Filtration::from_generators(2, {{}, {v2(1, 0)}});
  Filtration b = Filtration::from_generators(2, {{}, {v2(1, 0), v2(0, 1)}});
  CHECK(stable_quotient_equiv(a, b));
}

TEST_CASE("search: quotient mismatch is definitive") {
  SearchResult r = search_level_preserving(chain_in_z(2, 1), chain_in_z(3, 1), 1);
  CHECK_FALSE(r.iso);
  CHECK_FALSE(r.bounded);
  CHECK_FALSE(r.reason.empty());
  SearchResult same = search_level_preserving(chain_in_z(2, 1), chain_in_z(2, 1), 1);
  REQUIRE(same.iso);
  CHECK(is_level_preserving(*same.iso, chain_in_z(2, 1), chain_in_z(2, 1), 1));
}

TEST_CASE("search: coefficient bound") {
  Filtration a = Filtration::from_generators(2, {{}, {v2(1, 0)}, {v2(1, 0), v2(0, 1)}});
  Filtration b = Filtration::from_generators(2, {{}, {v2(1, 5)}, {v2(1, 0), v2(0, 1)}});
  SearchResult tight = search_level_preserving(a, b, 1, 1);
  CHECK_FALSE(tight.iso);
  CHECK(tight.bounded);
  SearchResult loose = search_level_preserving(a, b, 1, 5);
  REQUIRE(loose.iso);
  CHECK(is_level_preserving(*loose.iso, a, b, 1));
}

TEST_CASE("is_level_preserving") {
  Filtration a = Filtration::from_generators(2, {{}, {v2(1, 0)}, {v2(1, 0), v2(0, 1)}});
  LevelIso swap{2, IntMatrix::identity(2), IntMatrix{{0, 1}, {1, 0}}};
  CHECK_FALSE(is_level_preserving(swap, a, a, 1));
  LevelIso shear{2, IntMatrix::identity(2), IntMatrix{{1, 0}, {3, 1}}};
  CHECK(is_level_preserving(shear, a, a, 1));
  LevelIso small{1, IntMatrix{{1, 0}}, IntMatrix{{1, 0}}};
  CHECK_THROWS_AS(is_level_preserving(small, a, a, 1), EquivalenceError);
  CHECK(is_level_preserving(small, a, a, 0));
}

TEST_CASE("search finds what brute force finds in Z^2") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<long> c(-2, 2), idx(1, 3);
  const auto autos = small_automorphisms(2);
  int agree = 0, found = 0;
  for (int trial = 0; trial < 60; ++trial) {
    auto random_chain = [&] {
      IntVector v = v2(c(rng), c(rng));
      if (is_zero(v)) v = v2(1, 0);
      IntVector w = v2(c(rng), c(rng));
      std::vector<IntVector> second{v, w};
      if (rank(IntMatrix::from_rows(second, 2)) < 2) second = {v, v2(0, idx(rng)), v2(idx(rng), 0)};
      return Filtration::from_generators(2, {{}, {v}, second, {v2(1, 0), v2(0, 1)}});
    };
    const Filtration f = random_chain();
    const Filtration g = trial % 3 == 0 ? f.rebased(IntMatrix{{1, 1}, {0, 1}}) : random_chain();
    bool brute = false;
    for (const auto& t : autos) {
      if (maps_onto(t, f.levels[1], g.levels[1]) && maps_onto(t, f.levels[2], g.levels[2])) {
        brute = true;
        break;
      }
    }
    SearchResult r = search_level_preserving(f, g, 2, 20, 400'000);
    if (r.iso) {
      ++found;
      REQUIRE(is_level_preserving(*r.iso, f, g, 2));
    }
    if (brute) REQUIRE(r.iso);
    if (!r.iso && !r.bounded) REQUIRE_FALSE(brute);
    ++agree;
  }
  CHECK(agree == 60);
  CHECK(found > 0);
}

TEST_CASE("matched builds are level equivalent") {
  const FiltrationBuild b = build_truncated_pair(matched_config());
  REQUIRE(b.chains().size() == 1);
  std::mt19937_64 rng(3);
  const Filtration f = Filtration::of_build(b, 0);
  const Filtration g = Filtration::of_build(b, 1).rebased(random_unimodular(b.rank(), rng, 12));
  CHECK(stable_quotient_equiv(f, g));
  for (std::size_t alpha = 0; alpha <= 5; ++alpha) {
    SearchResult r = search_level_preserving(f, g, alpha, 1'000'000);
    REQUIRE(r.iso);
    CHECK(is_level_preserving(*r.iso, f, g, alpha));
  }
}

TEST_CASE("extending through a chain stage with patch data") {
  const FiltrationBuild b = build_truncated_pair(matched_config());
  const Filtration f = Filtration::of_build(b, 0), g = Filtration::of_build(b, 1);
  const NodeId top = static_cast<NodeId>(b.index().size() - 1);
  REQUIRE(b.family_top(top) == 6);
  const auto patches = build_patches(b, top);
  // start from the family member on G_1
  LevelIso start = family_iso(b, 0);
  REQUIRE(start.top == 1);
  LevelIso e = extend_level_preserving(start, f, g, 6, patches);
  CHECK(e.top == 6);
  CHECK(is_level_preserving(e, f, g, 5));

  // a patch whose map swaps the two x's of stage 0 fails the ladder condition only if it leaves a level;
  // swapping x_{2,0} with x_{0,0} does
  auto bad = patches;
  Patch& p = bad.at(3);
  IntMatrix m = p.theta.images;
  const IntVector r0 = m.row(0);
  m.set_row(0, m.row(b.stage_rank(2)));
  m.set_row(b.stage_rank(2), r0);
  p.theta.images = m;
  CHECK_THROWS_AS(extend_level_preserving(start, f, g, 6, bad), EquivalenceError);
  // no patch at all
  CHECK_THROWS_AS(extend_level_preserving(start, f, g, 6, {}), EquivalenceError);
}
