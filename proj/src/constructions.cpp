#include "efg/constructions.hpp"

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <regex>
#include <set>

namespace efg {

namespace {

std::string sub2(const char* letter, std::size_t a, std::size_t b) {
  return std::string(letter) + "_{" + std::to_string(a) + "," + std::to_string(b) + "}";
}

IntVector pad(IntVector v, std::size_t width) {
  if (v.size() > width) {
    for (std::size_t i = width; i < v.size(); ++i)
      if (v[i] != 0) throw ConstructionError("element does not fit in " + std::to_string(width) + " coordinates");
    v.resize(width);
  }
  v.resize(width, Int(0));
  return v;
}

bool unimodular(const IntMatrix& m) {
  if (m.rows() != m.cols()) return false;
  if (m.rows() == 0) return true;
  const Int d = determinant(m);
  return d == 1 || d == -1;
}

Int norm1(const IntVector& v) {
  Int s = 0;
  for (const auto& x : v) s += abs(x);
  return s;
}

std::vector<NodeId> sorted_set(std::vector<NodeId> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

std::string to_string(StageKind k) {
  switch (k) {
    case StageKind::Free: return "free";
    case StageKind::E0: return "gadget";
    case StageKind::E1: return "chain";
  }
  return "?";
}

StageKind stage_kind_from(const std::string& s) {
  if (s == "free" || s == "F") return StageKind::Free;
  if (s == "gadget" || s == "E0") return StageKind::E0;
  if (s == "chain" || s == "E1") return StageKind::E1;
  throw ConstructionError("unknown stage label '" + s + "'");
}

std::vector<WEntry> WRegistry::members(std::size_t alpha, std::vector<NodeId> nodes) const {
  nodes = sorted_set(std::move(nodes));
  std::vector<WEntry> out;
  for (const auto& e : entries_)
    if (e.stage < alpha && e.nodes == nodes) out.push_back(e);
  return out;
}

WRegistry update_w_registry(const WRegistry& reg, std::size_t sigma, std::size_t length,
                            const std::vector<std::vector<NodeId>>& w_nodes, const Tree& index) {
  if (w_nodes.size() < length)
    throw ConstructionError("gadget stage " + std::to_string(sigma) + ": " + std::to_string(w_nodes.size()) +
                            " node sets for " + std::to_string(length) + " w's");
  std::vector<NodeId> all;
  for (std::size_t n = 0; n < length; ++n) {
    if (w_nodes[n].empty()) throw ConstructionError("gadget stage " + std::to_string(sigma) + ": empty node set");
    for (NodeId t : w_nodes[n]) {
      if (t >= sigma || t >= index.size())
        throw ConstructionError("gadget stage " + std::to_string(sigma) + ": node " + std::to_string(t) +
                                " is not an index node below the stage");
      all.push_back(t);
    }
  }
  if (!index.is_antichain(sorted_set(all)))
    throw ConstructionError("gadget stage " + std::to_string(sigma) + ": node sets do not form an antichain");
  WRegistry out = reg;
  for (std::size_t n = 0; n < length; ++n) out.add({sub2("w", sigma, n), sigma, n, sorted_set(w_nodes[n])});
  return out;
}

Int select_prime(const IntVector& target, const Int& floor) {
  if (is_zero(target)) throw ConstructionError("select_prime: zero target");
  const Int c = content(target);
  Int p = floor < 1 ? Int(1) : floor;
  for (;;) {
    ++p;
    if (is_prime(p) && c % p != 0) return p;
  }
}

namespace {

bool separates(const Int& m, const Int& mp, const IntVector& y, const IntMatrix& h, const IntVector& k,
               const IntVector& fk) {
  return scale(m, apply_row(k, h)) != add(scale(mp, fk), y);
}

KChoice combine(const std::string& label, const IntVector& a, const IntVector& fa, long sign, const std::string& bl,
                const IntVector& b, const IntVector& fb, const std::string& case_id) {
  KChoice c;
  c.label = label + (sign > 0 ? "+" : "-") + bl;
  c.k = add(a, scale(Int(sign), b));
  c.fk = add(fa, scale(Int(sign), fb));
  c.case_id = case_id;
  return c;
}

}  // namespace

KChoice select_k(const KContext& ctx, const Int& m, const Int& mp, const IntVector& y) {
  if (m == 0 || mp == 0) throw ConstructionError("select_k: zero multiplier");
  const KChoice x0{ctx.x0_name, ctx.x0, ctx.fx0, ""};
  auto ok = [&](const KChoice& c) { return separates(m, mp, y, ctx.h, c.k, c.fk); };
  auto tagged = [](KChoice c, const std::string& id) {
    c.case_id = id;
    return c;
  };
  if (!is_zero(y)) {
    const KChoice x1{ctx.x1_name, ctx.x1, ctx.fx1, ""};
    for (const auto& c : {x0, x1, combine(ctx.x0_name, ctx.x0, ctx.fx0, -1, ctx.x1_name, ctx.x1, ctx.fx1, "")})
      if (ok(c)) return tagged(c, "offset");
    throw ConstructionError("select_k: no candidate separates (nonzero offset)");
  }
  if (m != mp && m != -mp) {
    if (ok(x0)) return tagged(x0, "unequal");
    throw ConstructionError("select_k: x does not separate (unequal multipliers)");
  }
  const std::string id = m == mp ? "equal" : "opposite";
  if (ok(x0)) return tagged(x0, id);
  const long sign = m == mp ? 1 : -1;
  for (std::size_t i = 0; i < ctx.w.size(); ++i) {
    KChoice c = combine(ctx.x0_name, ctx.x0, ctx.fx0, sign, ctx.w_names[i], ctx.w[i], ctx.fw[i], id);
    if (ok(c)) return c;
  }
  throw ConstructionError(std::string("select_k: no witness w with f(w) != ") + (sign > 0 ? "h(w)" : "-h(w)"));
}

std::vector<KChoice> k_candidates(const KContext& ctx) {
  std::vector<KChoice> out;
  std::set<IntVector> seen;
  auto push = [&](KChoice c) {
    c.case_id = "listed";
    if (seen.insert(c.k).second) out.push_back(std::move(c));
  };
  const std::string xn[2] = {ctx.x0_name, ctx.x1_name};
  const IntVector xs[2] = {ctx.x0, ctx.x1}, fxs[2] = {ctx.fx0, ctx.fx1};
  for (int j = 0; j < 2; ++j) {
    push({xn[j], xs[j], fxs[j], ""});
    for (long s : {1L, -1L}) push(combine(xn[j], xs[j], fxs[j], s, xn[1 - j], xs[1 - j], fxs[1 - j], ""));
    for (std::size_t i = 0; i < ctx.w.size(); ++i)
      for (long s : {1L, -1L}) push(combine(xn[j], xs[j], fxs[j], s, ctx.w_names[i], ctx.w[i], ctx.fw[i], ""));
  }
  return out;
}

std::string Triple::str() const {
  return "(r=" + std::to_string(r) + ", d=" + std::to_string(d) + ", g=" + to_string(g) + ")";
}

// ---- the build ----

FiltrationBuild::FiltrationBuild(Tree index, std::vector<StageKind> plan)
    : index_(std::move(index)), plan_(std::move(plan)) {
  if (plan_.empty()) throw ConstructionError("empty stage plan");
  if (plan_[0] != StageKind::Free) throw ConstructionError("stage 0 must be free");
}

std::vector<bool> FiltrationBuild::special() const {
  std::vector<bool> s;
  for (auto k : plan_) s.push_back(k != StageKind::Free);
  return s;
}

std::size_t FiltrationBuild::stage_rank(std::size_t mu) const {
  if (mu > stages_done()) throw ConstructionError("stage " + std::to_string(mu) + " not built yet");
  return static_cast<std::size_t>(
      std::count_if(basis_stage_.begin(), basis_stage_.end(), [&](std::size_t s) { return s < mu; }));
}

std::optional<std::size_t> FiltrationBuild::generator_index(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::pair<std::size_t, std::size_t>> FiltrationBuild::chain_position(std::size_t g) const {
  auto it = zpos_.find(g);
  if (it == zpos_.end()) return std::nullopt;
  return it->second;
}

IntVector FiltrationBuild::generator_coords(int side, std::size_t g, std::optional<std::size_t> width) const {
  return pad(gen_coords_[side].at(g), width.value_or(rank()));
}

IntVector FiltrationBuild::coords(int side, const std::string& name, std::optional<std::size_t> width) const {
  if (auto g = generator_index(name)) return generator_coords(side, *g, width);
  static const std::regex w_name(R"(w_\{(\d+),(\d+)\})");
  std::smatch m;
  if (std::regex_match(name, m, w_name)) {
    const std::size_t sigma = std::stoul(m[1]), n = std::stoul(m[2]);
    return sub(scale(Int(2), coords(side, sub2("u", sigma, n + 1), width)), coords(side, sub2("u", sigma, n), width));
  }
  throw ConstructionError("unknown element '" + name + "'");
}

std::size_t FiltrationBuild::add_generator(const std::string& name, std::size_t stage, bool basis) {
  const std::size_t g = names_.size();
  names_.push_back(name);
  gen_stage_.push_back(stage);
  by_name_[name] = g;
  gen_coords_[0].emplace_back();
  gen_coords_[1].emplace_back();
  if (basis) {
    basis_.push_back(g);
    basis_stage_.push_back(stage);
    gen_coords_[0][g] = unit_vector(basis_.size(), basis_.size() - 1);
    gen_coords_[1][g] = gen_coords_[0][g];
  }
  return g;
}

void FiltrationBuild::check_next(std::size_t mu, StageKind kind) const {
  if (mu != stages_done())
    throw ConstructionError("stage " + std::to_string(mu) + " out of order, next is " + std::to_string(stages_done()));
  if (mu >= plan_.size() || plan_[mu] != kind)
    throw ConstructionError("stage " + std::to_string(mu) + " is not labelled " + to_string(kind));
}

void FiltrationBuild::free_step(std::size_t mu) {
  check_next(mu, StageKind::Free);
  StageInfo info{StageKind::Free, rank(), 0, false, std::nullopt};
  for (std::size_t j = 0; j < 2; ++j) add_generator(sub2("x", mu, j), mu, true);
  info.rank_after = rank();
  infos_.push_back(info);
}

void FiltrationBuild::uv_gadget(std::size_t sigma, std::size_t length,
                                const std::vector<std::vector<NodeId>>& w_nodes) {
  check_next(sigma, StageKind::E0);
  if (length == 0) throw ConstructionError("gadget length must be positive");
  registry_ = update_w_registry(registry_, sigma, length, w_nodes, index_);
  StageInfo info{StageKind::E0, rank(), 0, false, std::nullopt};
  for (std::size_t n = 0; n <= length; ++n) add_generator(sub2("u", sigma, n), sigma, true);
  for (std::size_t n = 0; n < length; ++n) add_generator(sub2("v", sigma, n), sigma, true);
  gadget_len_[sigma] = length;
  info.rank_after = rank();
  infos_.push_back(info);
}

void FiltrationBuild::skip_stage(std::size_t delta, const IntMatrix&) {
  check_next(delta, StageKind::E1);
  infos_.push_back({StageKind::E1, rank(), rank(), false, std::nullopt});
}

void FiltrationBuild::z_chain(std::size_t delta, ZChain chain) {
  check_next(delta, StageKind::E1);
  const std::size_t n_len = chain.primes.size();
  if (n_len == 0 || chain.ks.size() != n_len) throw ConstructionError("z_chain: need one k per prime");
  if (chain_len_ && chain_len_ != n_len) throw ConstructionError("z_chain: chains of different lengths");
  for (const auto& p : chain.primes)
    if (!is_prime(p)) throw ConstructionError("z_chain: " + p.get_str() + " is not prime");
  const std::size_t base = rank();
  for (const auto& k : chain.ks)
    if (k.k.size() != base || k.fk.size() != base) throw ConstructionError("z_chain: k of the wrong width");
  chain_len_ = n_len;
  chain.stage = delta;
  const std::size_t idx = chains_.size();
  std::vector<std::size_t> z(n_len + 1);
  for (std::size_t n = 0; n <= n_len; ++n) {
    z[n] = add_generator(sub2("z", delta, n), delta, n == n_len);
    zpos_[z[n]] = {idx, n};
  }
  const std::size_t width = rank();
  for (int side = 0; side < 2; ++side) {
    for (std::size_t n = n_len; n-- > 0;) {
      const IntVector& k = side == 0 ? chain.ks[n].k : chain.ks[n].fk;
      gen_coords_[side][z[n]] = sub(scale(chain.primes[n], pad(gen_coords_[side][z[n + 1]], width)), pad(k, width));
      std::map<std::size_t, Int> rel;
      rel[z[n + 1]] += chain.primes[n];
      rel[z[n]] -= 1;
      for (std::size_t i = 0; i < k.size(); ++i)
        if (k[i] != 0) rel[basis_[i]] -= k[i];
      relations_[side].push_back(rel);
    }
  }
  for (std::size_t n = 0; n < n_len; ++n) relation_stage_.push_back(delta);
  infos_.push_back({StageKind::E1, base, rank(), true, idx});
  chains_.push_back(std::move(chain));
}

Presentation FiltrationBuild::presentation(int side, std::optional<std::size_t> upto) const {
  const std::size_t top = upto.value_or(stages_done());
  const std::size_t gens = static_cast<std::size_t>(
      std::count_if(gen_stage_.begin(), gen_stage_.end(), [&](std::size_t s) { return s < top; }));
  Presentation p = Presentation::free(gens);
  p.relations = IntMatrix(0, gens);
  // relations_ of both sides are stored in the same order, one block per chain
  for (std::size_t i = 0; i < relations_[side].size(); ++i) {
    if (relation_stage_[i] >= top) continue;
    IntVector row = zero_vector(gens);
    for (const auto& [g, c] : relations_[side][i]) row.at(g) = c;
    p.relations.append_row(row);
  }
  return p;
}

IntMatrix FiltrationBuild::coordinate_map(int side, std::optional<std::size_t> upto) const {
  const std::size_t top = upto.value_or(stages_done());
  const std::size_t width = stage_rank(top);
  std::vector<IntVector> rows;
  for (std::size_t g = 0; g < names_.size(); ++g)
    if (gen_stage_[g] < top) rows.push_back(generator_coords(side, g, width));
  return IntMatrix::from_rows(rows, width);
}

std::size_t FiltrationBuild::gadget_length(std::size_t sigma) const {
  auto it = gadget_len_.find(sigma);
  if (it == gadget_len_.end()) throw ConstructionError("no gadget at stage " + std::to_string(sigma));
  return it->second;
}

std::size_t FiltrationBuild::family_top(NodeId nu) const {
  if (nu >= index_.size()) throw ConstructionError("node " + std::to_string(nu) + " not in the index tree");
  return std::min<std::size_t>(nu + 1, stages_done());
}

long FiltrationBuild::cut_index(std::size_t sigma, NodeId nu) const {
  long cut = -1;
  for (const auto& e : registry_.entries()) {
    if (e.stage != sigma) continue;
    for (NodeId t : e.nodes)
      if (index_.below_or_equal(t, nu)) cut = std::max(cut, static_cast<long>(e.n));
  }
  return cut;
}

IntMatrix gadget_block(std::size_t length, long cut, const std::vector<int>& signs) {
  if (cut >= static_cast<long>(length)) throw ConstructionError("gadget cut beyond the gadget");
  const std::size_t size = 2 * length + 1;
  auto u = [](std::size_t n) { return n; };
  auto v = [&](std::size_t n) { return length + 1 + n; };
  IntMatrix m(size, size);
  for (std::size_t n = 0; n <= length; ++n)
    if (static_cast<long>(n) > cut) m(u(n), u(n)) = 1;
  for (long n = cut; n >= 0; --n) {
    const std::size_t k = static_cast<std::size_t>(n);
    const int s = k < signs.size() ? signs[k] : 1;
    for (std::size_t c = 0; c < size; ++c) m(u(k), c) = 2 * m(u(k + 1), c);
    m(u(k), v(k)) -= s;
  }
  for (std::size_t n = 0; n < length; ++n) {
    if (static_cast<long>(n) <= cut)
      m(v(n), u(n)) = 1;
    else
      m(v(n), v(n)) = 1;
  }
  return m;
}

IntMatrix FiltrationBuild::family_map(NodeId nu) const {
  const std::size_t top = family_top(nu);
  const std::size_t r = stage_rank(top);
  IntMatrix f(r, r);
  for (std::size_t mu = 0; mu < top; ++mu) {
    const std::size_t lo = stage_rank(mu), hi = stage_rank(mu + 1);
    if (plan_[mu] == StageKind::E0) {
      IntMatrix blk = gadget_block(gadget_length(mu), cut_index(mu, nu));
      for (std::size_t i = 0; i < blk.rows(); ++i)
        for (std::size_t j = 0; j < blk.cols(); ++j) f(lo + i, lo + j) = blk(i, j);
    } else {
      for (std::size_t i = lo; i < hi; ++i) f(i, i) = 1;
    }
  }
  return f;
}

IntMatrix FiltrationBuild::guess_matrix(std::size_t delta, const HGuess& g) const {
  const std::size_t r = stage_rank(delta);
  IntMatrix h;
  switch (g.kind) {
    case HGuess::Kind::Identity: h = IntMatrix::identity(r); break;
    case HGuess::Kind::Family: {
      if (family_top(g.node) < delta)
        throw ConstructionError("guess: f_" + std::to_string(g.node) + " is not defined on stage " +
                                std::to_string(delta));
      h = family_map(g.node).submatrix(0, 0, r, r);
      break;
    }
    case HGuess::Kind::Flip: {
      if (g.flip_stage >= delta || plan_[g.flip_stage] != StageKind::E0)
        throw ConstructionError("guess: no gadget at stage " + std::to_string(g.flip_stage));
      const std::size_t len = gadget_length(g.flip_stage);
      if (g.flip_index >= len) throw ConstructionError("guess: flip index beyond the gadget");
      std::vector<int> signs(len, 1);
      signs[g.flip_index] = -1;
      h = IntMatrix::identity(r);
      const std::size_t lo = stage_rank(g.flip_stage);
      IntMatrix blk = gadget_block(len, static_cast<long>(len) - 1, signs);
      for (std::size_t i = 0; i < blk.rows(); ++i)
        for (std::size_t j = 0; j < blk.cols(); ++j) h(lo + i, lo + j) = blk(i, j);
      break;
    }
    case HGuess::Kind::Matrix: h = g.matrix; break;
  }
  if (h.rows() != r || h.cols() != r)
    throw ConstructionError("guess at stage " + std::to_string(delta) + " must be " + std::to_string(r) + "x" +
                            std::to_string(r));
  if (!unimodular(h)) throw ConstructionError("guess at stage " + std::to_string(delta) + " is not invertible");
  return h;
}

namespace {

// coordinates -> a generator coefficient vector (each coordinate is a basis generator)
IntVector to_generators(const FiltrationBuild& b, const IntVector& c, std::size_t gens) {
  IntVector out = zero_vector(gens);
  for (std::size_t g = 0, i = 0; g < gens && i < c.size(); ++g)
    if (!b.chain_position(g) || b.chain_position(g)->second == b.chain_length()) out[g] = c[i++];
  return out;
}

}  // namespace

Homomorphism FiltrationBuild::family_on_generators(NodeId nu) const {
  const std::size_t top = family_top(nu);
  const IntMatrix f = family_map(nu);
  Homomorphism hom{presentation(0, top), presentation(1, top), {}};
  const std::size_t gens = hom.source.gen_count;
  hom.images = IntMatrix(gens, gens);
  std::vector<IntVector> img(gens);
  for (std::size_t g = 0; g < gens; ++g) {
    auto zp = chain_position(g);
    if (zp && zp->second < chain_len_) continue;
    img[g] = to_generators(*this, apply_row(generator_coords(0, g, f.rows()), f), gens);
  }
  // z_n below the top of each chain, downward from the top
  for (std::size_t g = gens; g-- > 0;) {
    auto zp = chain_position(g);
    if (!zp || zp->second == chain_len_) continue;
    const ZChain& c = chains_[zp->first];
    const std::size_t n = zp->second;
    const std::size_t rd = stage_rank(c.stage);
    const IntVector gk = apply_row(c.ks[n].k, f.submatrix(0, 0, rd, rd));
    img[g] = sub(scale(c.primes[n], img[g + 1]), to_generators(*this, gk, gens));
  }
  for (std::size_t g = 0; g < gens; ++g) hom.images.set_row(g, img[g]);
  return hom;
}

// ---- standalone pieces ----

GroupElement Gadget::u(std::size_t n) const { return GroupElement::generator(group.gen_count, offset + n); }
GroupElement Gadget::v(std::size_t n) const {
  return GroupElement::generator(group.gen_count, offset + length + 1 + n);
}
GroupElement Gadget::w(std::size_t n) const { return Int(2) * u(n + 1) - u(n); }
Subgroup Gadget::w_span(std::size_t count) const {
  std::vector<GroupElement> ws;
  for (std::size_t n = 0; n < count; ++n) ws.push_back(w(n));
  return Subgroup::spanned(group, ws);
}

Gadget make_gadget(std::size_t base_rank, std::size_t length) {
  if (length == 0) throw ConstructionError("gadget length must be positive");
  return {Presentation::free(base_rank + 2 * length + 1), base_rank, length};
}

Homomorphism gadget_iso(const Gadget& g, long cut) {
  const IntMatrix blk = gadget_block(g.length, cut);
  IntMatrix m = IntMatrix::identity(g.group.gen_count);
  for (std::size_t i = 0; i < blk.rows(); ++i)
    for (std::size_t j = 0; j < blk.cols(); ++j) m(g.offset + i, g.offset + j) = blk(i, j);
  return {g.group, g.group, m};
}

Presentation z_chain(const Presentation& base, const std::vector<GroupElement>& ks, const std::vector<Int>& primes) {
  if (ks.size() != primes.size()) throw ConstructionError("z_chain: need one k per prime");
  const std::size_t b = base.gen_count, n_len = primes.size();
  Presentation out = Presentation::free(b + n_len + 1);
  out.relations = IntMatrix(0, out.gen_count);
  for (std::size_t i = 0; i < base.relations.rows(); ++i) out.relations.append_row(pad(base.relations.row(i), out.gen_count));
  for (std::size_t n = 0; n < n_len; ++n) {
    if (!is_prime(primes[n])) throw ConstructionError("z_chain: " + primes[n].get_str() + " is not prime");
    if (ks[n].size() != b) throw ConstructionError("z_chain: k of the wrong width");
    IntVector row = pad(scale(Int(-1), ks[n].coeffs), out.gen_count);
    row[b + n + 1] += primes[n];
    row[b + n] -= 1;
    out.relations.append_row(row);
  }
  return out;
}

Int chain_product(const std::vector<Int>& primes, std::size_t from, std::size_t to) {
  Int p = 1;
  for (std::size_t i = from; i < to; ++i) p *= primes.at(i);
  return p;
}

IntVector z_projection(const std::vector<Int>& primes, std::size_t n, const std::vector<IntVector>& projected_k) {
  if (projected_k.size() != primes.size() || projected_k.empty()) throw ConstructionError("z_projection: sizes");
  IntVector out = zero_vector(projected_k[0].size());
  for (std::size_t j = n; j < primes.size(); ++j)
    out = sub(out, scale(chain_product(primes, n, j), projected_k[j]));
  return out;
}

std::vector<IntVector> l1_ball(std::size_t dim, std::size_t radius) {
  std::vector<IntVector> out;
  IntVector cur = zero_vector(dim);
  // vectors of norm exactly `left` from position i on
  std::function<void(std::size_t, long)> fill = [&](std::size_t i, long left) {
    if (i == dim) {
      if (left == 0) out.push_back(cur);
      return;
    }
    for (long a = 0; a <= left; ++a)
      for (long s : {1L, -1L}) {
        if (a == 0 && s < 0) continue;
        cur[i] = s * a;
        fill(i + 1, left - a);
      }
    cur[i] = 0;
  };
  for (std::size_t k = 0; k <= radius; ++k) fill(0, static_cast<long>(k));
  return out;
}

// ---- separation, obstruction ----

std::optional<std::size_t> separating_beta(const FiltrationBuild& b, std::size_t delta, const IntMatrix& h) {
  const std::size_t r = b.stage_rank(delta);
  const std::size_t hi = std::min<std::size_t>(delta, b.index().size());
  for (std::size_t beta = 0; beta < hi; ++beta) {
    const auto anti = minimal_antichain(b.index(), beta, hi);
    if (anti.empty()) continue;
    const ChainCover cover(anti);
    bool ok = true;
    // pieces are constant from stable_from on
    for (std::size_t n = 0; ok && n <= cover.stable_from(); ++n) {
      const auto ws = b.registry().members(delta, cover.piece(n));
      for (long e : {1L, -1L}) {
        bool found = false;
        for (const auto& w : ws) {
          const IntVector hw = apply_row(b.coords(0, w.name, r), h);
          const IntVector v = scale(Int(e), b.coords(1, sub2("v", w.stage, w.n), r));
          if (hw != v) found = true;
        }
        ok = ok && found;
      }
    }
    if (ok) return beta;
  }
  return std::nullopt;
}

IntVector obstruction_target(const ZChain& c, const IntMatrix& h, const Triple& t, std::size_t n) {
  if (n < t.r || n >= c.primes.size()) throw ConstructionError("obstruction_target: step out of range");
  const Int d(t.d);
  IntVector y = t.g;
  for (std::size_t j = 0; j < n; ++j) y = add(y, scale(chain_product(c.primes, 0, j), apply_row(c.ks[j].k, h)));
  for (std::size_t j = t.r; j < n; ++j) y = sub(y, scale(d * chain_product(c.primes, t.r, j), c.ks[j].fk));
  const Int m = chain_product(c.primes, 0, n), mp = d * chain_product(c.primes, t.r, n);
  return add(sub(scale(m, apply_row(c.ks[n].k, h)), scale(mp, c.ks[n].fk)), y);
}

ObstructionResult extension_obstruction(const ZChain& c, const IntMatrix& h, const Triple& t) {
  for (std::size_t n = t.r; n < c.primes.size(); ++n) {
    const IntVector target = obstruction_target(c, h, t, n);
    if (!is_zero(target) && content(target) % c.primes[n] != 0) return {true, n};
  }
  return {false, std::nullopt};
}

bool extension_exists(const FiltrationBuild& b, std::size_t chain, const IntMatrix& h, const Triple& t) {
  const ZChain& c = b.chains().at(chain);
  const std::size_t n_len = c.primes.size();
  if (t.r > n_len) throw ConstructionError("extension_exists: r beyond the chain");
  const std::size_t r1 = b.stage_rank(c.stage + 1);
  IntVector x = t.g;
  for (std::size_t j = 0; j < n_len; ++j) x = add(x, scale(chain_product(c.primes, 0, j), apply_row(c.ks[j].k, h)));
  x = add(pad(x, r1), scale(Int(t.d), b.coords(1, sub2("z", c.stage, t.r), r1)));
  const Presentation g = Presentation::free(r1);
  std::vector<GroupElement> gens;
  const Int pn = chain_product(c.primes, 0, n_len);
  for (std::size_t i = 0; i < r1; ++i) gens.push_back(pn * GroupElement::generator(r1, i));
  return subgroup_membership(Subgroup::spanned(g, gens), GroupElement(x));
}

std::size_t agreement_start(const FiltrationBuild& b, std::size_t chain, const IntMatrix& g) {
  const ZChain& c = b.chains().at(chain);
  std::size_t start = c.primes.size();
  while (start > 0 && apply_row(c.ks[start - 1].k, g) == c.ks[start - 1].fk) --start;
  return start;
}

std::vector<IntVector> extend_over_zchain(const FiltrationBuild& b, std::size_t chain, const IntMatrix& g,
                                          std::size_t from) {
  const ZChain& c = b.chains().at(chain);
  const std::size_t n_len = c.primes.size();
  if (from > n_len) throw ConstructionError("extend_over_zchain: start beyond the chain");
  const std::size_t rd = b.stage_rank(c.stage), r1 = b.stage_rank(c.stage + 1);
  if (g.rows() != rd || g.cols() != rd) throw ConstructionError("extend_over_zchain: map of the wrong size");
  for (std::size_t n = from; n < n_len; ++n)
    if (apply_row(c.ks[n].k, g) != c.ks[n].fk)
      throw ConstructionError("extend_over_zchain: g(k_n) != f(k_n) at n=" + std::to_string(n));
  std::vector<IntVector> img(n_len + 1);
  for (std::size_t n = n_len + 1; n-- > 0;) {
    if (n >= from)
      img[n] = b.coords(1, sub2("z", c.stage, n), r1);
    else
      img[n] = sub(scale(c.primes[n], img[n + 1]), pad(apply_row(c.ks[n].k, g), r1));
  }
  for (std::size_t n = 0; n < n_len; ++n)
    if (scale(c.primes[n], img[n + 1]) != add(img[n], pad(apply_row(c.ks[n].k, g), r1)))
      throw ConstructionError("extend_over_zchain: relation " + std::to_string(n) + " not preserved");
  return img;
}

// ---- the whole build ----

namespace {

void install_chain(FiltrationBuild& b, const BuildConfig& cfg, std::size_t delta, const IntMatrix& h,
                   std::size_t beta) {
  if (delta == 0 || cfg.plan[delta - 1] != StageKind::Free)
    throw ConstructionError("chain stage " + std::to_string(delta) + " needs a free stage just below it");
  ZChain c;
  c.stage = delta;
  c.beta = beta;
  c.h = h;
  auto ladder = canonical_ladder(delta, b.special());
  if (!ladder) throw ConstructionError("no ladder below stage " + std::to_string(delta));
  c.ladder = *ladder;
  const std::size_t n_len = cfg.chain_length;
  const ChainCover cover(minimal_antichain(b.index(), beta, std::min<std::size_t>(delta, b.index().size())));
  for (std::size_t n = 0; n < n_len; ++n) c.node_sets.push_back(cover.piece(n));

  const std::size_t r = b.stage_rank(delta);
  const auto ball = l1_ball(r, cfg.g_radius);
  for (std::size_t rr = 0; rr < n_len; ++rr)
    for (long d = -cfg.d_bound; d <= cfg.d_bound; ++d) {
      if (d == 0) continue;
      for (std::size_t i = 0; i < ball.size(); ++i) c.triples.push_back({rr, d, ball[i], i});
    }
  // diagonal order
  std::vector<Int> norms;
  for (const auto& t : c.triples) norms.push_back(Int(static_cast<long>(t.r + std::labs(t.d))) + norm1(t.g));
  std::vector<std::size_t> order(c.triples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t bb) {
    const auto& x = c.triples[a];
    const auto& y = c.triples[bb];
    if (norms[a] != norms[bb]) return norms[a] < norms[bb];
    if (x.r != y.r) return x.r < y.r;
    if (x.d != y.d) return x.d < y.d;
    return x.ball_index < y.ball_index;
  });
  std::vector<Triple> sorted;
  for (auto i : order) sorted.push_back(c.triples[i]);
  c.triples = std::move(sorted);
  c.blocked_at.assign(c.triples.size(), std::nullopt);

  const std::string x0 = sub2("x", delta - 1, 0), x1 = sub2("x", delta - 1, 1);
  IntVector acc_h = zero_vector(r);                   // sum_{j<n} P_j h(k_j)
  std::vector<IntVector> acc_f;                        // per r: sum_{r<=j<n} Q_{r,j} f(k_j)
  std::vector<Int> q;                                  // per r: Q_{r,n}
  Int pn = 1;
  for (std::size_t n = 0; n < n_len; ++n) {
    acc_f.push_back(zero_vector(r));
    q.push_back(1);
    KContext ctx{h, x0, x1, b.coords(0, x0, r), b.coords(0, x1, r), b.coords(1, x0, r), b.coords(1, x1, r), {}, {}, {}};
    for (const auto& w : b.registry().members(delta, c.node_sets[n])) {
      ctx.w_names.push_back(w.name);
      ctx.w.push_back(b.coords(0, w.name, r));
      ctx.fw.push_back(b.coords(1, sub2("v", w.stage, w.n), r));
    }
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < c.triples.size(); ++i)
      if (!c.blocked_at[i] && c.triples[i].r <= n) pending.push_back(i);

    std::vector<KChoice> cands;
    if (!pending.empty()) {
      const Triple& t = c.triples[pending[0]];
      const IntVector y = sub(add(t.g, acc_h), scale(Int(t.d), acc_f[t.r]));
      try {
        cands.push_back(select_k(ctx, pn, Int(t.d) * q[t.r], scale(Int(-1), y)));
      } catch (const ConstructionError&) {
      }
    }
    for (auto& k : k_candidates(ctx)) {
      bool dup = false;
      for (const auto& e : cands) dup = dup || e.k == k.k;
      if (!dup) cands.push_back(std::move(k));
    }

    auto targets_for = [&](const KChoice& k) {
      const IntVector hk = add(scale(pn, apply_row(k.k, h)), acc_h);
      std::vector<IntVector> qf(n + 1);
      for (std::size_t rr = 0; rr <= n; ++rr) qf[rr] = add(scale(q[rr], k.fk), acc_f[rr]);
      std::vector<IntVector> out;
      out.reserve(pending.size());
      for (auto i : pending) {
        const Triple& t = c.triples[i];
        out.push_back(sub(add(t.g, hk), scale(Int(t.d), qf[t.r])));
      }
      return out;
    };
    std::size_t best = 0, best_zero = pending.size() + 1;
    for (std::size_t ci = 0; ci < cands.size(); ++ci) {
      const auto ts = targets_for(cands[ci]);
      const auto zeros = static_cast<std::size_t>(std::count_if(ts.begin(), ts.end(), [](const IntVector& v) { return is_zero(v); }));
      if (zeros < best_zero) {
        best_zero = zeros;
        best = ci;
      }
    }
    const KChoice k = cands[best];
    const auto ts = targets_for(k);
    std::vector<Int> contents;
    for (const auto& v : ts)
      if (!is_zero(v)) contents.push_back(content(v));
    Int p = c.primes.empty() ? Int(1) : c.primes.back();
    for (;;) {
      ++p;
      if (!is_prime(p)) continue;
      bool clean = true;
      for (const auto& ct : contents) clean = clean && ct % p != 0;
      if (clean) break;
    }
    for (std::size_t i = 0; i < pending.size(); ++i)
      if (!is_zero(ts[i])) c.blocked_at[pending[i]] = n;
    c.zero_targets.push_back(pending.empty() ? 0 : best_zero);
    c.ks.push_back(k);
    c.primes.push_back(p);

    acc_h = add(acc_h, scale(pn, apply_row(k.k, h)));
    for (std::size_t rr = 0; rr <= n; ++rr) {
      acc_f[rr] = add(acc_f[rr], scale(q[rr], k.fk));
      q[rr] *= p;
    }
    pn *= p;
  }
  b.z_chain(delta, std::move(c));
}

}  // namespace

FiltrationBuild build_truncated_pair(const BuildConfig& cfg) {
  if (cfg.chain_length == 0) throw ConstructionError("chain length must be positive");
  if (cfg.d_bound < 1) throw ConstructionError("d bound must be positive");
  FiltrationBuild b(cfg.index, cfg.plan);
  for (std::size_t mu = 0; mu < cfg.plan.size(); ++mu) {
    switch (cfg.plan[mu]) {
      case StageKind::Free: b.free_step(mu); break;
      case StageKind::E0: {
        auto it = cfg.script.w_nodes.find(mu);
        if (it == cfg.script.w_nodes.end())
          throw ConstructionError("script has no node sets for gadget stage " + std::to_string(mu));
        b.uv_gadget(mu, cfg.gadget_length, it->second);
        break;
      }
      case StageKind::E1: {
        auto it = cfg.script.guesses.find(mu);
        if (it == cfg.script.guesses.end())
          throw ConstructionError("script has no guess for chain stage " + std::to_string(mu));
        const IntMatrix h = b.guess_matrix(mu, it->second);
        if (auto beta = separating_beta(b, mu, h))
          install_chain(b, cfg, mu, h, *beta);
        else
          b.skip_stage(mu, h);
        break;
      }
    }
  }
  return b;
}

// ---- projections and standard form ----

ProjectionSystem build_projections(const FiltrationBuild& b) {
  ProjectionSystem p;
  const std::size_t r = b.rank(), s = b.stages_done();
  const std::size_t gens = b.generator_names().size();
  for (int side = 0; side < 2; ++side) {
    for (std::size_t nu = 0; nu <= s; ++nu) {
      const std::size_t rn = b.stage_rank(nu);
      IntMatrix pi(r, r);
      for (std::size_t i = 0; i < rn; ++i) pi(i, i) = 1;
      p.pi[side].push_back(pi);

      // generator by generator
      auto keep = [&](const IntVector& c) {
        IntVector out = c;
        for (std::size_t i = 0; i < out.size(); ++i)
          if (b.stage_of_coordinate(i) >= nu) out[i] = 0;
        return out;
      };
      IntMatrix on(gens, r);
      for (std::size_t g = 0; g < gens; ++g) {
        auto zp = b.chain_position(g);
        IntVector img;
        if (zp && zp->second < b.chain_length() && b.chains()[zp->first].stage >= nu) {
          const ZChain& c = b.chains()[zp->first];
          std::vector<IntVector> pk;
          for (const auto& k : c.ks) pk.push_back(keep(pad(side == 0 ? k.k : k.fk, r)));
          img = z_projection(c.primes, zp->second, pk);
        } else if (b.generator_stage(g) < nu) {
          img = b.generator_coords(side, g);
        } else {
          img = zero_vector(r);
        }
        on.set_row(g, img);
      }
      p.on_generators[side].push_back(on);
    }
  }
  return p;
}

Subgroup ProjectionSystem::kernel(int, std::size_t nu, const FiltrationBuild& b) const {
  std::vector<GroupElement> gens;
  for (std::size_t i = b.stage_rank(nu); i < b.rank(); ++i) gens.push_back(GroupElement::generator(b.rank(), i));
  return Subgroup::spanned(b.group(), gens);
}

Subgroup ProjectionSystem::kernel_step(int, std::size_t nu, const FiltrationBuild& b) const {
  std::vector<GroupElement> gens;
  for (std::size_t i = b.stage_rank(nu); i < b.stage_rank(nu + 1); ++i)
    gens.push_back(GroupElement::generator(b.rank(), i));
  return Subgroup::spanned(b.group(), gens);
}

ProjectionCheck check_projections(const FiltrationBuild& b, const ProjectionSystem& p) {
  ProjectionCheck out;
  const std::size_t r = b.rank(), s = b.stages_done();
  for (int side = 0; side < 2; ++side) {
    const Presentation pres = b.presentation(side);
    const IntMatrix cmap = b.coordinate_map(side);
    for (std::size_t nu = 0; nu <= s; ++nu) {
      const IntMatrix& pi = p.pi[side].at(nu);
      const std::size_t rn = b.stage_rank(nu);
      for (std::size_t i = 0; i < r; ++i) {
        const IntVector img = apply_row(unit_vector(r, i), pi);
        if (i < rn && img != unit_vector(r, i)) out.identity_on_stage = false;
        for (std::size_t j = rn; j < r; ++j)
          if (img[j] != 0) out.nested = false;
      }
      if (!(cmap * pi == p.on_generators[side].at(nu))) out.rules_match = false;
      if (pres.relations.rows() && !(pres.relations * p.on_generators[side].at(nu)).is_zero())
        out.homomorphisms = false;
      for (std::size_t tau = 0; tau <= nu; ++tau)
        if (!(pi * p.pi[side].at(tau) == p.pi[side].at(tau))) out.coherent = false;
    }
  }
  return out;
}

std::vector<IntVector> raw_z(const FiltrationBuild& b, std::size_t chain, int side) {
  const ZChain& c = b.chains().at(chain);
  std::vector<IntVector> out;
  for (std::size_t n = 0; n <= c.primes.size(); ++n) out.push_back(b.coords(side, sub2("z", c.stage, n)));
  return out;
}

std::vector<IntVector> registered_y(const FiltrationBuild& b, std::size_t chain, int side) {
  const ZChain& c = b.chains().at(chain);
  auto out = raw_z(b, chain, side);
  for (auto& y : out)
    for (std::size_t i = 0; i < y.size(); ++i) {
      const std::size_t st = b.stage_of_coordinate(i);
      if (st < c.stage && b.plan()[st] == StageKind::E0) y[i] = 0;
    }
  return out;
}

StandardFormReport check_standard_form(const FiltrationBuild& b, const ProjectionSystem& p, int side,
                                       std::size_t chain, const std::vector<Ladder>& ladders,
                                       const std::vector<IntVector>& ys) {
  StandardFormReport rep;
  const ZChain& c = b.chains().at(chain);
  const auto special = b.special();
  for (const auto& l : ladders) {
    validate_ladder(l, special);
    if (l.target != c.stage) throw ConstructionError("ladder " + l.str() + " is not for stage " + std::to_string(c.stage));
  }
  rep.coherent = check_projections(b, p).all();
  const auto& pi = p.pi[side];
  for (const auto& l : ladders)
    for (std::size_t nu = 0; nu < c.stage; ++nu) {
      if (special[nu]) continue;
      for (std::size_t yi = 0; yi < ys.size(); ++yi) {
        const IntVector& y = ys[yi];
        IntVector rhs = zero_vector(y.size());
        for (std::size_t a : l.steps)
          if (a < nu) rhs = add(rhs, sub(apply_row(y, pi.at(a + 1)), apply_row(y, pi.at(a))));
        ++rep.checks;
        if (apply_row(y, pi.at(nu)) != rhs) {
          rep.ladder_sums = false;
          if (rep.failures.size() < 20)
            rep.failures.push_back("ladder " + l.str() + ", nu=" + std::to_string(nu) + ", y_" + std::to_string(yi));
        }
      }
    }
  // G_{delta+1} = G_delta + <Y>
  std::vector<GroupElement> gens;
  for (std::size_t i = 0; i < b.stage_rank(c.stage); ++i) gens.push_back(GroupElement::generator(b.rank(), i));
  for (const auto& y : ys) gens.push_back(GroupElement(y));
  std::vector<GroupElement> next;
  for (std::size_t i = 0; i < b.stage_rank(c.stage + 1); ++i) next.push_back(GroupElement::generator(b.rank(), i));
  rep.generates = same_subgroup(Subgroup::spanned(b.group(), gens), Subgroup::spanned(b.group(), next));
  return rep;
}

FamilyCheck check_family(const FiltrationBuild& b) {
  FamilyCheck out;
  const std::size_t s = b.stages_done();
  std::set<std::vector<NodeId>> node_sets;
  for (const auto& e : b.registry().entries()) node_sets.insert(e.nodes);
  for (const auto& th : node_sets)
    for (std::size_t a = 0; a + 1 <= s; ++a) {
      const auto lo = b.registry().members(a, th), hi = b.registry().members(a + 1, th);
      for (const auto& e : lo) {
        bool in = false;
        for (const auto& f : hi) in = in || f.name == e.name;
        if (!in) out.registry_monotone = false;
      }
    }
  for (const auto& e : b.registry().entries()) {
    const IntVector w = b.coords(0, e.name);
    const IntVector expect = sub(scale(Int(2), b.coords(0, sub2("u", e.stage, e.n + 1))), b.coords(0, sub2("u", e.stage, e.n)));
    bool inside = true;
    for (std::size_t i = b.stage_rank(e.stage + 1); i < w.size(); ++i) inside = inside && w[i] == 0;
    if (w != expect || !inside) out.registry_w_forms = false;
  }
  const Tree& t = b.index();
  for (NodeId nu = 0; nu < t.size(); ++nu) {
    const std::size_t top = b.family_top(nu);
    const std::size_t r = b.stage_rank(top);
    const IntMatrix f = b.family_map(nu);
    if (!unimodular(f)) {
      out.isomorphisms = false;
      out.failures.push_back("f_" + std::to_string(nu) + " not invertible");
    }
    for (std::size_t mu = 0; mu < top; ++mu) {
      if (b.plan()[mu] != StageKind::Free) continue;
      for (std::size_t j = 0; j < 2; ++j) {
        const std::string x = sub2("x", mu, j);
        if (apply_row(b.coords(0, x, r), f) != b.coords(1, x, r)) out.x_fixed = false;
      }
    }
    for (const auto& e : b.registry().entries()) {
      if (e.stage >= top) continue;
      bool meets = false;
      for (NodeId th : e.nodes) meets = meets || t.below_or_equal(th, nu);
      if (meets && apply_row(b.coords(0, e.name, r), f) != b.coords(1, sub2("v", e.stage, e.n), r)) {
        out.w_to_v = false;
        out.failures.push_back("f_" + std::to_string(nu) + "(" + e.name + ") != v");
      }
    }
    if (auto par = t.parent(nu)) {
      const IntMatrix g = b.family_map(*par);
      const std::size_t rp = g.rows();
      if (!(f.submatrix(0, 0, rp, r) == [&] {
            IntMatrix wide(rp, r);
            for (std::size_t i = 0; i < rp; ++i)
              for (std::size_t j = 0; j < rp; ++j) wide(i, j) = g(i, j);
            return wide;
          }())) {
        out.coherent = false;
        out.failures.push_back("f_" + std::to_string(nu) + " does not extend f_" + std::to_string(*par));
      }
    }
    const Homomorphism hom = b.family_on_generators(nu);
    const bool wd = hom.well_defined();
    const bool agree = hom.images * b.coordinate_map(1, top) == b.coordinate_map(0, top) * f;
    if (!wd || !agree) {
      out.matches_generators = false;
      out.failures.push_back("f_" + std::to_string(nu) + " on generators: " + (wd ? "disagrees" : "not well defined"));
    }
  }
  return out;
}

}  // namespace efg
