#include "efg/equivalences.hpp"

#include <algorithm>
#include <functional>

namespace efg {

namespace {

IntMatrix basis_of(const IntMatrix& gens, std::size_t width) {
  if (gens.rows() == 0) return IntMatrix(0, width);
  IntMatrix b = row_lattice_basis(gens);
  if (b.rows() == 0) return IntMatrix(0, width);
  return b;
}

std::optional<IntVector> coords_in(const IntMatrix& basis, const IntVector& x) {
  if (basis.rows() == 0) {
    if (is_zero(x)) return IntVector{};
    return std::nullopt;
  }
  return solve_linear(basis.transpose(), x);
}

Subgroup as_subgroup(std::size_t rank, const IntMatrix& gens) {
  Subgroup s = Subgroup::trivial(Presentation::free(rank));
  if (gens.rows()) s.generators = gens;
  return s;
}

IntMatrix stack(const IntMatrix& a, const IntMatrix& b) {
  IntMatrix out = a.rows() ? a : IntMatrix(0, b.cols());
  if (b.rows()) out.append_rows(b);
  return out;
}

bool same_span(std::size_t rank, const IntMatrix& a, const IntMatrix& b) {
  return same_subgroup(as_subgroup(rank, a), as_subgroup(rank, b));
}

Int max_abs(const IntMatrix& m) {
  Int best = 0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) best = std::max<Int>(best, abs(m(i, j)));
  return best;
}

// rows extend to a basis of Z^m
bool primitive_rows(const IntMatrix& m) {
  if (m.rows() == 0) return true;
  SmithForm s = snf(m);
  if (s.rank != m.rows()) return false;
  for (const auto& d : s.invariants())
    if (d != 1) return false;
  return true;
}

IntMatrix image_rows(const LevelIso& theta, const IntMatrix& rows, std::size_t width) {
  IntMatrix out(0, width);
  for (std::size_t i = 0; i < rows.rows(); ++i) out.append_row(theta.apply(rows.row(i)));
  return out;
}

}  // namespace

Subgroup Filtration::level(std::size_t nu) const { return as_subgroup(ambient_rank, levels.at(nu)); }

void Filtration::validate() const {
  if (levels.empty()) throw EquivalenceError("filtration without levels");
  for (const auto& l : levels)
    if (l.rows() && l.cols() != ambient_rank) throw EquivalenceError("filtration level of the wrong width");
  for (std::size_t nu = 0; nu + 1 < levels.size(); ++nu)
    if (!subgroup_contains(level(nu + 1), level(nu)))
      throw EquivalenceError("level " + std::to_string(nu) + " is not inside level " + std::to_string(nu + 1));
  if (!special.empty() && special.size() != length()) throw EquivalenceError("special flags of the wrong length");
  if (!complements.empty() && complements.size() != length()) throw EquivalenceError("complements of the wrong length");
}

Filtration Filtration::from_generators(std::size_t ambient_rank, const std::vector<std::vector<IntVector>>& gens) {
  Filtration f;
  f.ambient_rank = ambient_rank;
  for (const auto& lv : gens) f.levels.push_back(IntMatrix::from_rows(lv, ambient_rank));
  f.special.assign(f.length(), false);
  f.validate();
  return f;
}

Filtration Filtration::of_build(const FiltrationBuild& b, int side) {
  (void)side;  // both sides share the coordinate layout
  Filtration f;
  const std::size_t r = b.rank();
  f.ambient_rank = r;
  for (std::size_t mu = 0; mu <= b.stages_done(); ++mu) {
    IntMatrix m(0, r);
    for (std::size_t i = 0; i < b.stage_rank(mu); ++i) m.append_row(unit_vector(r, i));
    f.levels.push_back(m);
  }
  for (std::size_t mu = 0; mu < b.stages_done(); ++mu) {
    f.special.push_back(b.plan()[mu] == StageKind::E1);
    IntMatrix c(0, r);
    for (std::size_t i = b.stage_rank(mu); i < b.stage_rank(mu + 1); ++i) c.append_row(unit_vector(r, i));
    f.complements.push_back(c);
  }
  return f;
}

Filtration Filtration::rebased(const IntMatrix& u) const {
  if (u.rows() != ambient_rank || u.cols() != ambient_rank) throw EquivalenceError("rebase matrix of the wrong size");
  const Int d = determinant(u);
  if (d != 1 && d != -1) throw EquivalenceError("rebase matrix is not unimodular");
  Filtration out = *this;
  for (auto& l : out.levels)
    if (l.rows()) l = l * u;
  for (auto& c : out.complements)
    if (c.rows()) c = c * u;
  return out;
}

IntVector LevelIso::apply(const IntVector& x) const {
  auto c = coords_in(basis, x);
  if (!c) throw EquivalenceError("element " + to_string(x) + " outside the domain");
  if (basis.rows() == 0) return zero_vector(images.cols());
  return apply_row(*c, images);
}

Int LevelIso::max_entry() const { return max_abs(images); }

bool stable_quotient_equiv(const Filtration& f, const Filtration& g) {
  if (f.length() != g.length()) return false;
  for (std::size_t nu = 0; nu < f.length(); ++nu) {
    const auto a = invariant_factors(subquotient(f.level(nu + 1), f.level(nu)));
    const auto b = invariant_factors(subquotient(g.level(nu + 1), g.level(nu)));
    if (a.torsion != b.torsion) return false;
  }
  return true;
}

bool is_level_preserving(const LevelIso& theta, const Filtration& f, const Filtration& g, std::size_t alpha) {
  if (alpha + 1 > f.length() || alpha + 1 > g.length()) throw EquivalenceError("level beyond the filtrations");
  const IntMatrix& dom = theta.basis;
  if (!same_span(f.ambient_rank, dom, f.levels[alpha + 1]))
    throw EquivalenceError("theta is not defined on exactly level " + std::to_string(alpha + 1));
  // bijective onto A'_{alpha+1}
  if (theta.images.rows() != dom.rows()) return false;
  if (dom.rows() && rank(theta.images) != dom.rows()) return false;
  if (!same_span(g.ambient_rank, theta.images, g.levels[alpha + 1])) return false;
  for (std::size_t nu = 0; nu <= alpha; ++nu) {
    const IntMatrix img = image_rows(theta, f.levels[nu], g.ambient_rank);
    if (!same_span(g.ambient_rank, img, g.levels[nu])) return false;
  }
  return true;
}

namespace {

struct Searcher {
  const Filtration& f;
  const Filtration& g;
  std::size_t alpha;
  Int bound;
  std::size_t budget;
  std::size_t nodes = 0;
  bool bounded = false;
  std::vector<IntMatrix> basis_f, basis_g;  // bases of the levels

  // extend cur (a map on level lv-1, or on 0 when lv = 0) to level lv
  std::optional<LevelIso> run(std::size_t lv, const LevelIso& cur) {
    if (++nodes > budget) {
      bounded = true;
      return std::nullopt;
    }
    if (lv == alpha + 2) return cur;
    const IntMatrix& B = basis_f[lv];
    const IntMatrix& Bp = basis_g[lv];
    const std::size_t m = B.rows(), np = g.ambient_rank;
    if (Bp.rows() != m) return std::nullopt;
    const std::size_t k = cur.basis.rows();

    // adapted basis: E = V^{-1} B, and U * cur.basis = D * E
    IntMatrix E = B, forced_src(0, np);
    std::vector<Int> d;
    IntMatrix cur_images = cur.images;
    if (k > 0) {
      IntMatrix M(0, m);
      for (std::size_t i = 0; i < k; ++i) M.append_row(*coords_in(B, cur.basis.row(i)));
      SmithForm s = snf(M);
      E = inverse_unimodular(s.V) * B;
      cur_images = s.U * cur.images;
      for (std::size_t i = 0; i < k; ++i) d.push_back(s.D(i, i));
    }
    IntMatrix forced(0, np);
    for (std::size_t i = 0; i < k; ++i) {
      IntVector v = cur_images.row(i);
      for (auto& x : v) {
        if (x % d[i] != 0) return std::nullopt;
        x /= d[i];
      }
      forced.append_row(v);
    }
    if (k && max_abs(forced) > bound) {
      bounded = true;
      return std::nullopt;
    }
    IntMatrix F(0, m);
    for (std::size_t i = 0; i < k; ++i) {
      auto c = coords_in(Bp, forced.row(i));
      if (!c) return std::nullopt;
      F.append_row(*c);
    }
    if (!primitive_rows(F)) return std::nullopt;

    auto attempt = [&](const IntMatrix& free_coords) -> std::optional<LevelIso> {
      IntMatrix images = forced;
      if (free_coords.rows()) images.append_rows(free_coords * Bp);
      if (max_abs(images) > bound) {
        bounded = true;
        return std::nullopt;
      }
      LevelIso next{lv, E, images};
      return run(lv + 1, next);
    };

    // canonical completion
    IntMatrix canon(0, m);
    if (k < m) {
      if (k == 0) {
        canon = IntMatrix::identity(m);
      } else {
        SmithForm s = snf(F);
        const IntMatrix vinv = inverse_unimodular(s.V);
        canon = vinv.submatrix(k, 0, m - k, m);
      }
    }
    if (auto r = attempt(canon)) return r;
    if (k == m) return std::nullopt;

    // other completions, entries bounded in the ambient
    Int box = 1;
    for (std::size_t i = 0; i < np; ++i) box *= 2 * bound + 1;
    if (box > 200'000) {
      bounded = true;
      return std::nullopt;
    }
    std::vector<IntVector> cands;
    {
      const long b = bound.get_si();
      IntVector x(np, Int(-b));
      for (;;) {
        if (!is_zero(x))
          if (auto c = coords_in(Bp, x)) cands.push_back(*c);
        std::size_t i = 0;
        while (i < np && x[i] == b) x[i++] = -b;
        if (i == np) break;
        ++x[i];
      }
    }
    bounded = true;  // the box never holds every completion
    std::optional<LevelIso> found;
    IntMatrix chosen = F;
    std::function<bool(std::size_t)> pick = [&](std::size_t row) -> bool {
      if (nodes > budget) return false;
      if (row == m) {
        IntMatrix free_part = chosen.submatrix(k, 0, m - k, m);
        if (free_part == canon) return false;
        found = attempt(free_part);
        return found.has_value();
      }
      for (const auto& c : cands) {
        ++nodes;
        chosen.append_row(c);
        if (primitive_rows(chosen) && pick(row + 1)) return true;
        chosen = chosen.submatrix(0, 0, chosen.rows() - 1, m);
        if (nodes > budget) return false;
      }
      return false;
    };
    pick(k);
    return found;
  }
};

}  // namespace

SearchResult search_level_preserving(const Filtration& f, const Filtration& g, std::size_t alpha, long coeff_bound,
                                     std::size_t node_budget) {
  f.validate();
  g.validate();
  SearchResult out;
  if (alpha + 1 > f.length() || alpha + 1 > g.length()) throw EquivalenceError("level beyond the filtrations");
  // structural obstructions: every subquotient A_mu/A_nu with nu < mu <= alpha+1, and the levels themselves
  for (std::size_t mu = 0; mu <= alpha + 1; ++mu) {
    if (invariant_factors(subgroup_presentation(f.level(mu))) != invariant_factors(subgroup_presentation(g.level(mu)))) {
      out.reason = "rank of level " + std::to_string(mu) + " differs";
      return out;
    }
    for (std::size_t nu = 0; nu < mu; ++nu) {
      const auto a = invariant_factors(subquotient(f.level(mu), f.level(nu)));
      const auto b = invariant_factors(subquotient(g.level(mu), g.level(nu)));
      if (a != b) {
        out.reason = "A_" + std::to_string(mu) + "/A_" + std::to_string(nu) + " is " + a.str() + " against " + b.str();
        return out;
      }
    }
  }
  Searcher s{f, g, alpha, Int(coeff_bound), node_budget, 0, false, {}, {}};
  for (std::size_t lv = 0; lv <= alpha + 1; ++lv) {
    s.basis_f.push_back(basis_of(f.levels[lv], f.ambient_rank));
    s.basis_g.push_back(basis_of(g.levels[lv], g.ambient_rank));
  }
  LevelIso start{0, IntMatrix(0, f.ambient_rank), IntMatrix(0, g.ambient_rank)};
  auto r = s.run(0, start);
  out.nodes = s.nodes;
  if (r) {
    r->top = alpha + 1;
    if (!is_level_preserving(*r, f, g, alpha)) throw EquivalenceError("search produced a map that is not level preserving");
    out.iso = std::move(r);
    out.reason = "found";
    return out;
  }
  out.bounded = true;
  out.reason = s.nodes > node_budget ? "node budget exhausted" : "no map within the coefficient bound";
  return out;
}

namespace {

// canonical one-step extension from level lv-1 to lv; throws if the forced part fails
LevelIso canonical_step(const Filtration& f, const Filtration& g, const LevelIso& cur, std::size_t lv) {
  Searcher s{f, g, lv - 1, Int(0), 1, 0, false, {}, {}};
  // a single step: bound and budget do not matter here
  s.bound = Int(1) << 4096;
  s.budget = 2;
  s.basis_f.assign(lv + 2, IntMatrix(0, f.ambient_rank));
  s.basis_g.assign(lv + 2, IntMatrix(0, g.ambient_rank));
  s.basis_f[lv] = basis_of(f.levels[lv], f.ambient_rank);
  s.basis_g[lv] = basis_of(g.levels[lv], g.ambient_rank);
  s.alpha = lv - 1;  // run stops right after level lv
  auto r = s.run(lv, cur);
  if (!r) throw EquivalenceError("no extension to level " + std::to_string(lv) + " through forced images");
  return *r;
}

}  // namespace

LevelIso extend_level_preserving(const LevelIso& f, const Filtration& from, const Filtration& to, std::size_t target,
                                 const std::map<std::size_t, Patch>& patches) {
  from.validate();
  to.validate();
  const std::size_t mu = f.top;
  if (target < mu || target > from.length() || target > to.length()) throw EquivalenceError("bad target level");
  if (!same_span(from.ambient_rank, f.basis, from.levels[mu]))
    throw EquivalenceError("f is not defined on exactly level " + std::to_string(mu));
  const std::vector<bool> sp = from.special.empty() ? std::vector<bool>(from.length(), false) : from.special;

  for (std::size_t d = mu; d < target; ++d) {
    if (!sp[d]) continue;
    auto it = patches.find(d);
    if (it == patches.end()) throw EquivalenceError("no patch for chain stage " + std::to_string(d));
    const Patch& p = it->second;
    if (p.ladder.target != d) throw EquivalenceError("patch ladder is for another stage");
    validate_ladder(p.ladder, sp);
    for (std::size_t b : p.ladder.steps) {
      if (b < mu) continue;  // only the tail above the start is used
      for (std::size_t lv : {b, b + 1}) {
        const IntMatrix img = image_rows(p.theta, from.levels[lv], to.ambient_rank);
        if (!same_span(to.ambient_rank, img, to.levels[lv]))
          throw EquivalenceError("patch for stage " + std::to_string(d) + " does not carry level " +
                                 std::to_string(lv) + " onto level " + std::to_string(lv));
      }
    }
  }

  LevelIso cur = f;
  for (std::size_t tau = mu; tau < target; ++tau) {
    const IntMatrix& next = from.levels[tau + 1];
    if (sp[tau]) {
      const Patch& p = patches.at(tau);
      IntMatrix gens = cur.basis, imgs = cur.images;
      for (const auto& y : p.ys) {
        gens = stack(gens, IntMatrix::from_rows({y}, from.ambient_rank));
        imgs = stack(imgs, IntMatrix::from_rows({p.theta.apply(y)}, to.ambient_rank));
      }
      if (!same_span(from.ambient_rank, gens, next))
        throw EquivalenceError("patch generators do not give level " + std::to_string(tau + 1));
      const IntMatrix rel = left_kernel(gens);
      if (rel.rows() && !(rel * imgs).is_zero())
        throw EquivalenceError("patch images are inconsistent at stage " + std::to_string(tau));
      const IntMatrix basis = basis_of(next, from.ambient_rank);
      IntMatrix images(0, to.ambient_rank);
      for (std::size_t i = 0; i < basis.rows(); ++i) {
        auto c = solve_linear(gens.transpose(), basis.row(i));
        images.append_row(apply_row(*c, imgs));
      }
      cur = {tau + 1, basis, images};
      continue;
    }
    // nearest chain stage above whose ladder steps through tau
    const Patch* use = nullptr;
    for (const auto& [d, p] : patches) {
      if (d <= tau || d >= target) continue;
      if (std::find(p.ladder.steps.begin(), p.ladder.steps.end(), tau) != p.ladder.steps.end()) {
        use = &p;
        break;
      }
    }
    if (use) {
      if (from.complements.empty()) throw EquivalenceError("ladder step needs a complement");
      const IntMatrix& blk = from.complements.at(tau);
      IntMatrix basis = stack(cur.basis, blk);
      IntMatrix images = stack(cur.images, image_rows(use->theta, blk, to.ambient_rank));
      if (!same_span(from.ambient_rank, basis, next) || basis.rows() != rank(next))
        throw EquivalenceError("complement at stage " + std::to_string(tau) + " is not a complement");
      cur = {tau + 1, basis, images};
    } else {
      cur = canonical_step(from, to, cur, tau + 1);
    }
  }
  cur.top = target;
  if (target > 0 && !is_level_preserving(cur, from, to, target - 1))
    throw EquivalenceError("extension is not level preserving");
  return cur;
}

LevelIso family_iso(const FiltrationBuild& b, NodeId nu) {
  const std::size_t top = b.family_top(nu), r = b.rank(), rt = b.stage_rank(top);
  const IntMatrix f = b.family_map(nu);
  LevelIso out{top, IntMatrix(0, r), IntMatrix(0, r)};
  for (std::size_t i = 0; i < rt; ++i) {
    out.basis.append_row(unit_vector(r, i));
    IntVector row = f.row(i);
    row.resize(r, Int(0));
    out.images.append_row(row);
  }
  return out;
}

std::map<std::size_t, Patch> build_patches(const FiltrationBuild& b, NodeId nu) {
  std::map<std::size_t, Patch> out;
  const LevelIso whole = family_iso(b, nu);
  for (std::size_t c = 0; c < b.chains().size(); ++c) {
    const ZChain& z = b.chains()[c];
    if (whole.top < z.stage + 1) throw EquivalenceError("family member too short for the chain stage");
    out[z.stage] = {z.ladder, whole, registered_y(b, c, 0)};
  }
  // stages skipped for lack of separation add nothing
  for (std::size_t mu = 0; mu < b.stages_done(); ++mu)
    if (b.plan()[mu] == StageKind::E1 && !out.count(mu)) {
      auto l = canonical_ladder(mu, b.special());
      if (!l) throw EquivalenceError("no ladder below stage " + std::to_string(mu));
      out[mu] = {*l, whole, {}};
    }
  return out;
}

}  // namespace efg
