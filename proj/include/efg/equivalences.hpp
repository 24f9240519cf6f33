#pragma once

#include "efg/abgroup.hpp"
#include "efg/constructions.hpp"
#include "efg/trees.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace efg {

struct EquivalenceError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A_0 <= A_1 <= ... <= A_L inside a free ambient group
struct Filtration {
  std::size_t ambient_rank = 0;
  std::vector<IntMatrix> levels;       // generators of A_nu as rows
  std::vector<bool> special;           // step nu -> nu+1 is a chain stage
  std::vector<IntMatrix> complements;  // optional: a complement of A_nu in A_{nu+1}, rows

  std::size_t length() const { return levels.empty() ? 0 : levels.size() - 1; }
  Presentation ambient() const { return Presentation::free(ambient_rank); }
  Subgroup level(std::size_t nu) const;
  void validate() const;  // nested, right widths

  static Filtration from_generators(std::size_t ambient_rank, const std::vector<std::vector<IntVector>>& gens);
  static Filtration of_build(const FiltrationBuild& b, int side);
  // the same filtration after the change of coordinates x -> x * u
  Filtration rebased(const IntMatrix& u) const;
};

// theta on A_top, given on a basis; images in the other ambient
struct LevelIso {
  std::size_t top = 0;
  IntMatrix basis;   // rows, a basis of A_top
  IntMatrix images;  // rows

  IntVector apply(const IntVector& x) const;  // throws outside the domain
  Int max_entry() const;
};

// the stage quotients A_{nu+1}/A_nu have the same torsion
bool stable_quotient_equiv(const Filtration& f, const Filtration& g);

// theta maps A_{alpha+1} onto A'_{alpha+1} bijectively and A_nu onto A'_nu for nu <= alpha.
// Throws when theta is not defined on all of A_{alpha+1}.
bool is_level_preserving(const LevelIso& theta, const Filtration& f, const Filtration& g, std::size_t alpha);

struct SearchResult {
  std::optional<LevelIso> iso;
  bool bounded = false;  // the answer "absent" depends on the coefficient bound or the budget
  std::string reason;
  std::size_t nodes = 0;
};

// backtracking level by level: forced images through adapted bases, free parts
// by basis completion, canonical completion first
SearchResult search_level_preserving(const Filtration& f, const Filtration& g, std::size_t alpha,
                                     long coeff_bound = 2, std::size_t node_budget = 200'000);

struct Patch {
  Ladder ladder;
  LevelIso theta;               // level preserving on A_{delta+1}
  std::vector<IntVector> ys;    // A_{delta+1} = A_delta + <ys>, left ambient coordinates
};

// extends f (on A_mu) to A_target, stage by stage; chain stages use their patch
LevelIso extend_level_preserving(const LevelIso& f, const Filtration& from, const Filtration& to, std::size_t target,
                                 const std::map<std::size_t, Patch>& patches);

// patch data read off a matched build: the family member f_nu with nu the last index node
std::map<std::size_t, Patch> build_patches(const FiltrationBuild& b, NodeId nu);
LevelIso family_iso(const FiltrationBuild& b, NodeId nu);

}  // namespace efg
