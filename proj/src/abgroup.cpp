#include "efg/abgroup.hpp"

#include <algorithm>

namespace efg {

namespace {

IntMatrix relations_of(const Presentation& g) {
  if (g.relations.rows() == 0) return IntMatrix(0, g.gen_count);
  return g.relations;
}

IntMatrix stacked(const IntMatrix& top, const IntMatrix& bottom, std::size_t cols) {
  IntMatrix m(0, cols);
  if (top.rows()) m.append_rows(top);
  if (bottom.rows()) m.append_rows(bottom);
  return m;
}

IntMatrix generators_of(const Subgroup& s) {
  if (s.generators.rows() == 0) return IntMatrix(0, s.ambient.gen_count);
  return s.generators;
}

bool same_presentation(const Presentation& a, const Presentation& b) {
  return a.gen_count == b.gen_count && relations_of(a) == relations_of(b);
}

void check_element(const Presentation& g, const GroupElement& x, const char* what) {
  if (x.size() != g.gen_count)
    throw GroupError(std::string(what) + ": element has " + std::to_string(x.size()) +
                     " coefficients, group has " + std::to_string(g.gen_count) + " generators");
}

void check_ambient(const Subgroup& s, const Presentation& g, const char* what) {
  if (!same_presentation(s.ambient, g)) throw GroupError(std::string(what) + ": ambient mismatch");
}

std::size_t valuation(Int x, const Int& p) {
  std::size_t v = 0;
  x = abs(x);
  while (x != 0 && x % p == 0) {
    x /= p;
    ++v;
  }
  return v;
}

}  // namespace

Presentation Presentation::free(std::size_t n) { return {n, IntMatrix(0, n)}; }

Presentation Presentation::cyclic(long order) { return diagonal({order}); }

Presentation Presentation::diagonal(const std::vector<long>& orders) {
  Presentation g{orders.size(), IntMatrix(0, orders.size())};
  for (std::size_t i = 0; i < orders.size(); ++i)
    if (orders[i] != 0) {
      IntVector r = zero_vector(orders.size());
      r[i] = orders[i];
      g.relations.append_row(r);
    }
  return g;
}

void Presentation::validate() const {
  if (relations.rows() != 0 && relations.cols() != gen_count)
    throw GroupError("relation matrix has " + std::to_string(relations.cols()) + " columns, expected " +
                     std::to_string(gen_count));
}

Subgroup Subgroup::trivial(const Presentation& g) { return {g, IntMatrix(0, g.gen_count)}; }

Subgroup Subgroup::whole(const Presentation& g) { return {g, IntMatrix::identity(g.gen_count)}; }

Subgroup Subgroup::spanned(const Presentation& g, const std::vector<GroupElement>& gens) {
  Subgroup s{g, IntMatrix(0, g.gen_count)};
  for (const auto& x : gens) {
    check_element(g, x, "Subgroup::spanned");
    s.generators.append_row(x.coeffs);
  }
  return s;
}

GroupElement Homomorphism::apply(const GroupElement& x) const {
  check_element(source, x, "Homomorphism::apply");
  if (images.rows() == 0) return GroupElement::zero(target.gen_count);
  return GroupElement(apply_row(x.coeffs, images));
}

bool Homomorphism::well_defined() const {
  if (images.rows() != source.gen_count || (images.rows() && images.cols() != target.gen_count)) return false;
  const IntMatrix rel = relations_of(source);
  for (std::size_t i = 0; i < rel.rows(); ++i) {
    GroupElement img = apply(GroupElement(rel.row(i)));
    if (!equal_elements(target, img, GroupElement::zero(target.gen_count))) return false;
  }
  return true;
}

Homomorphism Homomorphism::compose_after(const Homomorphism& first) const {
  if (first.target.gen_count != source.gen_count) throw GroupError("compose: shape mismatch");
  return {first.source, target, first.images * images};
}

std::string InvariantFactors::str() const {
  std::string s = "(" + std::to_string(free_rank) + ", [";
  for (std::size_t i = 0; i < torsion.size(); ++i) {
    if (i) s += ',';
    s += torsion[i].get_str();
  }
  return s + "])";
}

InvariantFactors invariant_factors(const Presentation& g) {
  g.validate();
  SmithForm s = snf(relations_of(g));
  InvariantFactors f;
  f.free_rank = g.gen_count - s.rank;
  for (const auto& d : s.invariants())
    if (d != 1) f.torsion.push_back(d);
  return f;
}

bool are_isomorphic(const Presentation& g, const Presentation& h) {
  return invariant_factors(g) == invariant_factors(h);
}

std::size_t dual_rank(const Presentation& g) { return invariant_factors(g).free_rank; }

bool is_finite(const Presentation& g) { return invariant_factors(g).free_rank == 0; }

Int group_order(const Presentation& g) {
  InvariantFactors f = invariant_factors(g);
  if (f.free_rank) throw GroupError("group_order: infinite group");
  Int n = 1;
  for (const auto& d : f.torsion) n *= d;
  return n;
}

bool equal_elements(const Presentation& g, const GroupElement& x, const GroupElement& y) {
  check_element(g, x, "equal_elements");
  check_element(g, y, "equal_elements");
  return subgroup_membership(Subgroup::trivial(g), x - y);
}

std::optional<IntVector> express_in(const Subgroup& s, const GroupElement& x) {
  check_element(s.ambient, x, "express_in");
  const IntMatrix gens = generators_of(s);
  const IntMatrix all = stacked(gens, relations_of(s.ambient), s.ambient.gen_count);
  auto sol = solve_linear(all.transpose(), x.coeffs);
  if (!sol) return std::nullopt;
  sol->resize(gens.rows());
  return sol;
}

bool subgroup_membership(const Subgroup& s, const GroupElement& x) { return express_in(s, x).has_value(); }

bool subgroup_contains(const Subgroup& big, const Subgroup& small) {
  if (!same_presentation(big.ambient, small.ambient)) throw GroupError("subgroup_contains: ambient mismatch");
  const IntMatrix g = generators_of(small);
  for (std::size_t i = 0; i < g.rows(); ++i)
    if (!subgroup_membership(big, GroupElement(g.row(i)))) return false;
  return true;
}

bool same_subgroup(const Subgroup& a, const Subgroup& b) {
  return subgroup_contains(a, b) && subgroup_contains(b, a);
}

Presentation quotient(const Presentation& g, const Subgroup& s) {
  check_ambient(s, g, "quotient");
  return {g.gen_count, stacked(relations_of(g), generators_of(s), g.gen_count)};
}

IntMatrix relation_lattice(const Presentation& g, const std::vector<GroupElement>& tuple) {
  const std::size_t k = tuple.size();
  IntMatrix t(0, g.gen_count);
  for (const auto& x : tuple) {
    check_element(g, x, "relation_lattice");
    t.append_row(x.coeffs);
  }
  if (k == 0) return IntMatrix(0, 0);
  const IntMatrix all = stacked(t, relations_of(g), g.gen_count);
  const IntMatrix ker = left_kernel(all);
  return row_lattice_basis(ker.submatrix(0, 0, ker.rows(), k));
}

Presentation subgroup_presentation(const Subgroup& s) {
  const IntMatrix gens = generators_of(s);
  std::vector<GroupElement> tuple;
  for (std::size_t i = 0; i < gens.rows(); ++i) tuple.emplace_back(gens.row(i));
  Presentation p{gens.rows(), IntMatrix(0, gens.rows())};
  if (!tuple.empty()) p.relations = relation_lattice(s.ambient, tuple);
  return p;
}

Presentation subquotient(const Subgroup& big, const Subgroup& small) {
  if (!same_presentation(big.ambient, small.ambient)) throw GroupError("subquotient: ambient mismatch");
  Presentation p = subgroup_presentation(big);
  Subgroup inner{p, IntMatrix(0, p.gen_count)};
  const IntMatrix g = generators_of(small);
  for (std::size_t i = 0; i < g.rows(); ++i) {
    auto c = express_in(big, GroupElement(g.row(i)));
    if (!c) throw GroupError("subquotient: small subgroup not contained in big one");
    inner.generators.append_row(*c);
  }
  return quotient(p, inner);
}

bool purity_check(const Presentation& g, const Subgroup& s) {
  check_ambient(s, g, "purity_check");
  if (!invariant_factors(g).torsion_free()) throw GroupError("purity_check: ambient has torsion");
  return invariant_factors(quotient(g, s)).torsion_free();
}

bool is_direct_summand(const Presentation& g, const Subgroup& s) {
  check_ambient(s, g, "is_direct_summand");
  if (!invariant_factors(g).torsion_free()) throw GroupError("is_direct_summand: ambient is not free");
  // finitely generated and torsion-free, so free; summand iff pure there
  return purity_check(g, s);
}

std::optional<IntMatrix> complement_basis(const Presentation& g, const Subgroup& s) {
  check_ambient(s, g, "complement_basis");
  Coordinates c(g);
  for (const auto& m : c.moduli())
    if (m != 0) throw GroupError("complement_basis: ambient is not free");
  const IntMatrix gens = generators_of(s);
  IntMatrix rows(0, c.dim());
  for (std::size_t i = 0; i < gens.rows(); ++i) rows.append_row(c.canonical(GroupElement(gens.row(i))));
  const IntMatrix basis = row_lattice_basis(rows);
  SmithForm f = snf(basis);
  for (const auto& d : f.invariants())
    if (d != 1) return std::nullopt;
  const IntMatrix vinv = inverse_unimodular(f.V);
  IntMatrix out(0, g.gen_count);
  for (std::size_t i = f.rank; i < c.dim(); ++i) out.append_row(c.element(vinv.row(i)).coeffs);
  return out;
}

bool is_prime(const Int& p) { return p >= 2 && mpz_probab_prime_p(p.get_mpz_t(), 50) > 0; }

PHeight p_height(const Presentation& g, const Subgroup& s, const GroupElement& x, const Int& p) {
  if (!is_prime(p)) throw GroupError("p_height: " + p.get_str() + " is not prime");
  check_element(g, x, "p_height");
  Coordinates q(quotient(g, s));
  const IntVector y = q.canonical(x);
  PHeight best = PHeight::unbounded();
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0) continue;
    const Int& d = q.moduli()[i];
    std::size_t v = valuation(y[i], p);
    if (d != 0 && v >= valuation(d, p)) continue;  // p-divisible all the way inside Z/d
    if (best.infinite || v < best.value) best = PHeight::finite(v);
  }
  return best;
}

bool divisible_mod(const Presentation& g, const Subgroup& s, const GroupElement& x, const Int& pn) {
  check_ambient(s, g, "divisible_mod");
  Subgroup t{g, generators_of(s)};
  t.generators.append_rows(pn * IntMatrix::identity(g.gen_count));
  return subgroup_membership(t, x);
}

bool is_partial_iso(const Presentation& a, const Presentation& b, const std::vector<GroupElement>& at,
                    const std::vector<GroupElement>& bt) {
  if (at.size() != bt.size())
    throw GroupError("is_partial_iso: tuples of length " + std::to_string(at.size()) + " and " +
                     std::to_string(bt.size()));
  return relation_lattice(a, at) == relation_lattice(b, bt);
}

Coordinates::Coordinates(const Presentation& g) : group_(g) {
  g.validate();
  SmithForm s = snf(relations_of(g));
  const IntMatrix vinv = inverse_unimodular(s.V);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < g.gen_count; ++i) {
    if (i < s.rank && s.D(i, i) == 1) continue;
    keep.push_back(i);
    moduli_.push_back(i < s.rank ? s.D(i, i) : Int(0));
  }
  to_coords_ = IntMatrix(g.gen_count, keep.size());
  from_coords_ = IntMatrix(keep.size(), g.gen_count);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    for (std::size_t r = 0; r < g.gen_count; ++r) to_coords_(r, k) = s.V(r, keep[k]);
    for (std::size_t c = 0; c < g.gen_count; ++c) from_coords_(k, c) = vinv(keep[k], c);
  }
}

IntVector Coordinates::canonical(const GroupElement& x) const {
  check_element(group_, x, "Coordinates::canonical");
  if (dim() == 0) return {};
  IntVector y = apply_row(x.coeffs, to_coords_);
  for (std::size_t i = 0; i < y.size(); ++i)
    if (moduli_[i] != 0) mpz_fdiv_r(y[i].get_mpz_t(), y[i].get_mpz_t(), moduli_[i].get_mpz_t());
  return y;
}

GroupElement Coordinates::element(const IntVector& coords) const {
  if (coords.size() != dim()) throw GroupError("Coordinates::element: wrong coordinate count");
  if (dim() == 0) return GroupElement::zero(group_.gen_count);
  return GroupElement(apply_row(coords, from_coords_));
}

bool Coordinates::finite() const {
  return std::none_of(moduli_.begin(), moduli_.end(), [](const Int& m) { return m == 0; });
}

std::vector<GroupElement> enumerate_elements(const Presentation& g, std::size_t max_order) {
  Coordinates c(g);
  if (!c.finite()) throw GroupError("enumerate_elements: infinite group");
  Int order = 1;
  for (const auto& m : c.moduli()) order *= m;
  if (order > Int(static_cast<unsigned long>(max_order)))
    throw GroupError("enumerate_elements: order " + order.get_str() + " exceeds bound " + std::to_string(max_order));
  std::vector<GroupElement> out;
  IntVector digits = zero_vector(c.dim());
  for (;;) {
    out.push_back(c.element(digits));
    std::size_t i = c.dim();
    while (i > 0) {
      --i;
      digits[i] += 1;
      if (digits[i] < c.moduli()[i]) break;
      digits[i] = 0;
      if (i == 0) return out;
    }
    if (c.dim() == 0) return out;
  }
}

SteinReport stein_check(const Homomorphism& theta, const Subgroup& a, const Subgroup& b, const Subgroup& ap,
                        const Subgroup& bp, const Subgroup& cp) {
  check_ambient(a, theta.source, "stein_check");
  check_ambient(b, theta.source, "stein_check");
  check_ambient(ap, theta.target, "stein_check");
  check_ambient(bp, theta.target, "stein_check");
  check_ambient(cp, theta.target, "stein_check");
  if (!subgroup_contains(b, a)) throw GroupError("stein_check: nesting violated (A not inside B)");
  if (!subgroup_contains(bp, ap)) throw GroupError("stein_check: nesting violated (A' not inside B')");
  if (!subgroup_contains(cp, bp)) throw GroupError("stein_check: nesting violated (B' not inside C')");
  auto image_of = [&](const Subgroup& s) {
    Subgroup img{theta.target, IntMatrix(0, theta.target.gen_count)};
    const IntMatrix gens = generators_of(s);
    for (std::size_t i = 0; i < gens.rows(); ++i) img.generators.append_row(theta.apply(GroupElement(gens.row(i))).coeffs);
    return img;
  };
  if (!subgroup_contains(ap, image_of(a))) throw GroupError("stein_check: theta[A] not inside A'");
  const Subgroup image_b = image_of(b);
  if (!subgroup_contains(cp, image_b)) throw GroupError("stein_check: theta[B] not inside C'");

  SteinReport r;
  r.source_quotient_finite = invariant_factors(subquotient(b, a)).free_rank == 0;
  r.target_quotient_torsion_free = invariant_factors(subquotient(cp, bp)).torsion_free();
  r.conclusion = subgroup_contains(bp, image_b);
  if (r.source_quotient_finite && r.target_quotient_torsion_free) {
    r.verdict = r.conclusion ? SteinVerdict::HypothesesHoldConclusionHolds : SteinVerdict::ConclusionFails;
  } else {
    r.verdict = SteinVerdict::HypothesesFail;
    if (!r.source_quotient_finite) r.failed_hypothesis = "B/A is not finite";
    if (!r.target_quotient_torsion_free) {
      if (!r.failed_hypothesis.empty()) r.failed_hypothesis += "; ";
      r.failed_hypothesis += "C'/B' has torsion";
    }
  }
  return r;
}

std::string to_string(SteinVerdict v) {
  switch (v) {
    case SteinVerdict::HypothesesHoldConclusionHolds: return "hypotheses-hold-conclusion-holds";
    case SteinVerdict::HypothesesFail: return "hypotheses-fail";
    case SteinVerdict::ConclusionFails: return "conclusion-fails";
  }
  return "?";
}

}  // namespace efg
