#pragma once

#include "efg/zlinalg.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace efg {

struct GroupError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Z^gen_count modulo the row space of `relations`.
struct Presentation {
  std::size_t gen_count = 0;
  IntMatrix relations{0, 0};

  static Presentation free(std::size_t n);
  static Presentation cyclic(long order);                       // Z/order
  static Presentation diagonal(const std::vector<long>& orders);  // Z/o1 + Z/o2 + ..., 0 meaning Z
  void validate() const;
};

struct GroupElement {
  IntVector coeffs;

  GroupElement() = default;
  explicit GroupElement(IntVector c) : coeffs(std::move(c)) {}
  GroupElement(std::initializer_list<long> c) : coeffs(to_int_vector(c)) {}
  static GroupElement zero(std::size_t n) { return GroupElement(zero_vector(n)); }
  static GroupElement generator(std::size_t n, std::size_t i) { return GroupElement(unit_vector(n, i)); }

  std::size_t size() const { return coeffs.size(); }
  GroupElement operator+(const GroupElement& o) const { return GroupElement(add(coeffs, o.coeffs)); }
  GroupElement operator-(const GroupElement& o) const { return GroupElement(sub(coeffs, o.coeffs)); }
  GroupElement operator-() const { return GroupElement(scale(Int(-1), coeffs)); }
  friend GroupElement operator*(const Int& k, const GroupElement& x) { return GroupElement(scale(k, x.coeffs)); }
  bool operator==(const GroupElement& o) const { return coeffs == o.coeffs; }  // literal, not coset, equality
  std::string str() const { return to_string(coeffs); }
};

struct Subgroup {
  Presentation ambient;
  IntMatrix generators{0, 0};  // rows are coefficient vectors

  static Subgroup trivial(const Presentation& g);
  static Subgroup whole(const Presentation& g);
  static Subgroup spanned(const Presentation& g, const std::vector<GroupElement>& gens);
};

struct Homomorphism {
  Presentation source;
  Presentation target;
  IntMatrix images;  // row i is the image of source generator i

  GroupElement apply(const GroupElement& x) const;
  bool well_defined() const;  // relations go to relations
  Homomorphism compose_after(const Homomorphism& first) const;  // this o first
};

struct InvariantFactors {
  std::size_t free_rank = 0;
  IntVector torsion;  // each >= 2, divisibility chain
  bool operator==(const InvariantFactors& o) const {
    return free_rank == o.free_rank && torsion == o.torsion;
  }
  bool torsion_free() const { return torsion.empty(); }
  std::string str() const;
};

InvariantFactors invariant_factors(const Presentation& g);
bool are_isomorphic(const Presentation& g, const Presentation& h);
std::size_t dual_rank(const Presentation& g);
bool is_finite(const Presentation& g);
Int group_order(const Presentation& g);  // throws for infinite groups

// coset equality
bool equal_elements(const Presentation& g, const GroupElement& x, const GroupElement& y);
bool subgroup_membership(const Subgroup& s, const GroupElement& x);
bool subgroup_contains(const Subgroup& big, const Subgroup& small);
bool same_subgroup(const Subgroup& a, const Subgroup& b);
// coefficients c with x = sum c_i s_i in the ambient, if x lies in s
std::optional<IntVector> express_in(const Subgroup& s, const GroupElement& x);

Presentation quotient(const Presentation& g, const Subgroup& s);
// s as an abstract group on its listed generators
Presentation subgroup_presentation(const Subgroup& s);
// big / small, both subgroups of one ambient, small inside big
Presentation subquotient(const Subgroup& big, const Subgroup& small);

bool purity_check(const Presentation& g, const Subgroup& s);
bool is_direct_summand(const Presentation& g, const Subgroup& s);
// generators of a complement of s, found by completing a basis; nullopt when s is not pure
std::optional<IntMatrix> complement_basis(const Presentation& g, const Subgroup& s);

struct PHeight {
  bool infinite = false;
  std::size_t value = 0;
  bool operator==(const PHeight& o) const { return infinite == o.infinite && (infinite || value == o.value); }
  static PHeight finite(std::size_t n) { return {false, n}; }
  static PHeight unbounded() { return {true, 0}; }
  std::string str() const { return infinite ? "inf" : std::to_string(value); }
};

bool is_prime(const Int& p);
PHeight p_height(const Presentation& g, const Subgroup& s, const GroupElement& x, const Int& p);
// x in p^n G + S, decided by a linear solve (independent of p_height)
bool divisible_mod(const Presentation& g, const Subgroup& s, const GroupElement& x, const Int& pn);

// {c : sum c_i t_i = 0 in g}, as a Hermite basis
IntMatrix relation_lattice(const Presentation& g, const std::vector<GroupElement>& tuple);
bool is_partial_iso(const Presentation& a, const Presentation& b, const std::vector<GroupElement>& at,
                    const std::vector<GroupElement>& bt);

// SNF coordinates: torsion coordinates reduced into [0, d), free coordinates exact.
class Coordinates {
 public:
  explicit Coordinates(const Presentation& g);
  const Presentation& group() const { return group_; }
  std::size_t dim() const { return moduli_.size(); }
  const IntVector& moduli() const { return moduli_; }  // 0 marks a free coordinate
  IntVector canonical(const GroupElement& x) const;
  GroupElement element(const IntVector& coords) const;
  bool finite() const;

 private:
  Presentation group_;
  IntMatrix to_coords_;    // gen_count x dim
  IntMatrix from_coords_;  // dim x gen_count
  IntVector moduli_;
};

// every element of a finite group, canonical coordinates in mixed-radix order
std::vector<GroupElement> enumerate_elements(const Presentation& g, std::size_t max_order);

enum class SteinVerdict { HypothesesHoldConclusionHolds, HypothesesFail, ConclusionFails };

struct SteinReport {
  SteinVerdict verdict = SteinVerdict::HypothesesHoldConclusionHolds;
  bool source_quotient_finite = false;      // B/A finite
  bool target_quotient_torsion_free = false;  // C'/B' torsion-free
  bool conclusion = false;                  // theta[B] inside B'
  std::string failed_hypothesis;            // empty unless verdict is HypothesesFail
};

// theta: source -> target; a, b subgroups of the source; ap, bp, cp of the target
SteinReport stein_check(const Homomorphism& theta, const Subgroup& a, const Subgroup& b, const Subgroup& ap,
                        const Subgroup& bp, const Subgroup& cp);

std::string to_string(SteinVerdict v);

}  // namespace efg
