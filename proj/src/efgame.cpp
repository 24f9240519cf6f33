#include "efg/efgame.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>

namespace efg {

std::string to_string(Side s) { return s == Side::Left ? "left" : "right"; }
std::string to_string(Player p) { return p == Player::Forall ? "forall" : "exists"; }

namespace {

// Rank of an integer matrix. Fraction-free elimination in 64 bits, redone in
// GMP if any intermediate product would overflow.
std::size_t exact_rank(const std::vector<IntVector>& rows) {
  if (rows.empty()) return 0;
  const std::size_t n = rows.size(), m = rows[0].size();
  std::vector<std::vector<long long>> a(n, std::vector<long long>(m));
  bool small = true;
  for (std::size_t i = 0; i < n && small; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (!rows[i][j].fits_slong_p()) {
        small = false;
        break;
      }
      a[i][j] = rows[i][j].get_si();
    }
  if (small) {
    std::size_t r = 0;
    long long prev = 1;
    bool overflow = false;
    for (std::size_t c = 0; c < m && r < n && !overflow; ++c) {
      std::size_t p = r;
      while (p < n && a[p][c] == 0) ++p;
      if (p == n) continue;
      std::swap(a[p], a[r]);
      for (std::size_t i = r + 1; i < n && !overflow; ++i) {
        for (std::size_t j = c + 1; j < m; ++j) {
          __int128 v = static_cast<__int128>(a[r][c]) * a[i][j] - static_cast<__int128>(a[i][c]) * a[r][j];
          v /= prev;
          if (v > INT64_MAX || v < INT64_MIN) {
            overflow = true;
            break;
          }
          a[i][j] = static_cast<long long>(v);
        }
        a[i][c] = 0;
      }
      prev = a[r][c];
      ++r;
    }
    if (!overflow) return r;
  }
  IntMatrix mat(0, m);
  for (const auto& row : rows) mat.append_row(row);
  return rank(mat);
}

IntVector free_coords(const Presentation& g, const Coordinates* c, const GroupElement& x) {
  if (g.relations.rows() == 0) return x.coeffs;
  return c->canonical(x);
}

bool is_torsion_free(const Presentation& g) { return invariant_factors(g).torsion_free(); }

// rank test for torsion-free groups: the relation lattices agree iff
// rank L = rank R = rank [L | R]
bool ranks_match(const std::vector<IntVector>& l, const std::vector<IntVector>& r) {
  if (l.empty()) return true;
  std::vector<IntVector> both;
  for (std::size_t i = 0; i < l.size(); ++i) {
    IntVector row = l[i];
    row.insert(row.end(), r[i].begin(), r[i].end());
    both.push_back(std::move(row));
  }
  const std::size_t rb = exact_rank(both);
  return exact_rank(l) == rb && exact_rank(r) == rb;
}

std::string node_str(std::optional<NodeId> n) { return n ? std::to_string(*n) : "-"; }

}  // namespace

Structure Structure::whole(const Presentation& g, std::size_t max_order) {
  return {g, enumerate_elements(g, max_order), false};
}

Structure Structure::ball(const Presentation& g, std::size_t radius) {
  const std::size_t n = g.gen_count;
  std::vector<std::vector<long>> vecs;
  std::vector<long> cur(n, 0);
  std::function<void(std::size_t, long)> rec = [&](std::size_t i, long budget) {
    if (i == n) {
      vecs.push_back(cur);
      return;
    }
    for (long v = -budget; v <= budget; ++v) {
      cur[i] = v;
      rec(i + 1, budget - std::labs(v));
    }
    cur[i] = 0;
  };
  rec(0, static_cast<long>(radius));
  auto norm = [](const std::vector<long>& v) {
    long s = 0;
    for (long x : v) s += std::labs(x);
    return s;
  };
  std::stable_sort(vecs.begin(), vecs.end(), [&](const auto& a, const auto& b) { return norm(a) < norm(b); });
  Structure s{g, {}, true};
  std::set<IntVector> seen;
  std::optional<Coordinates> coords;
  if (g.relations.rows() != 0) coords.emplace(g);
  for (const auto& v : vecs) {
    IntVector iv;
    for (long x : v) iv.emplace_back(x);
    GroupElement e(iv);
    IntVector key = coords ? coords->canonical(e) : iv;
    if (seen.insert(key).second) s.carrier.push_back(e);
  }
  return s;
}

std::optional<std::size_t> Structure::index_of(const GroupElement& x) const {
  for (std::size_t i = 0; i < carrier.size(); ++i)
    if (carrier[i] == x) return i;
  if (group.relations.rows() == 0) return std::nullopt;
  for (std::size_t i = 0; i < carrier.size(); ++i)
    if (equal_elements(group, carrier[i], x)) return i;
  return std::nullopt;
}

std::string PairOracle::key(const IndexPairs& pairs) const {
  IndexPairs p = pairs;
  std::sort(p.begin(), p.end());
  p.erase(std::unique(p.begin(), p.end()), p.end());
  std::string s;
  for (const auto& [a, b] : p) s += std::to_string(a) + ":" + std::to_string(b) + ",";
  return s;
}

LatticeOracle::LatticeOracle(const GameSpec& spec) : spec_(&spec) {
  torsion_free_ = is_torsion_free(spec.left.group) && is_torsion_free(spec.right.group);
  if (torsion_free_) {
    std::optional<Coordinates> lc, rc;
    if (spec.left.group.relations.rows()) lc.emplace(spec.left.group);
    if (spec.right.group.relations.rows()) rc.emplace(spec.right.group);
    for (const auto& x : spec.left.carrier) left_coords_.push_back(free_coords(spec.left.group, lc ? &*lc : nullptr, x));
    for (const auto& x : spec.right.carrier)
      right_coords_.push_back(free_coords(spec.right.group, rc ? &*rc : nullptr, x));
  }
}

bool LatticeOracle::holds(const IndexPairs& pairs) const {
  if (torsion_free_) {
    std::vector<IntVector> l, r;
    for (const auto& [a, b] : pairs) {
      l.push_back(left_coords_.at(a));
      r.push_back(right_coords_.at(b));
    }
    return ranks_match(l, r);
  }
  std::vector<GroupElement> l, r;
  for (const auto& [a, b] : pairs) {
    l.push_back(spec_->left.carrier.at(a));
    r.push_back(spec_->right.carrier.at(b));
  }
  return is_partial_iso(spec_->left.group, spec_->right.group, l, r);
}

namespace {

struct FiniteCodes {
  std::size_t order = 1;
  std::vector<std::size_t> carrier_code;
  std::vector<std::vector<std::size_t>> add;
};

FiniteCodes finite_codes(const Structure& s) {
  Coordinates c(s.group);
  if (!c.finite()) throw GroupError("FiniteProductOracle: infinite group");
  FiniteCodes out;
  std::vector<std::size_t> mod;
  for (const auto& m : c.moduli()) {
    mod.push_back(m.get_ui());
    out.order *= mod.back();
  }
  auto encode = [&](const std::vector<std::size_t>& d) {
    std::size_t code = 0;
    for (std::size_t i = 0; i < d.size(); ++i) code = code * mod[i] + d[i];
    return code;
  };
  auto decode = [&](std::size_t code) {
    std::vector<std::size_t> d(mod.size());
    for (std::size_t i = mod.size(); i-- > 0;) {
      d[i] = code % mod[i];
      code /= mod[i];
    }
    return d;
  };
  out.add.assign(out.order, std::vector<std::size_t>(out.order));
  for (std::size_t a = 0; a < out.order; ++a) {
    auto da = decode(a);
    for (std::size_t b = 0; b < out.order; ++b) {
      auto db = decode(b);
      for (std::size_t i = 0; i < mod.size(); ++i) db[i] = (da[i] + db[i]) % mod[i];
      out.add[a][b] = encode(db);
    }
  }
  for (const auto& x : s.carrier) {
    IntVector y = c.canonical(x);
    std::vector<std::size_t> d;
    for (const auto& v : y) d.push_back(v.get_ui());
    out.carrier_code.push_back(encode(d));
  }
  return out;
}

}  // namespace

FiniteProductOracle::FiniteProductOracle(const GameSpec& spec) {
  FiniteCodes l = finite_codes(spec.left), r = finite_codes(spec.right);
  left_order_ = l.order;
  right_order_ = r.order;
  left_code_ = std::move(l.carrier_code);
  right_code_ = std::move(r.carrier_code);
  left_add_ = std::move(l.add);
  right_add_ = std::move(r.add);
}

std::vector<bool> FiniteProductOracle::span(const IndexPairs& pairs) const {
  const std::size_t total = left_order_ * right_order_;
  std::vector<bool> h(total, false);
  h[0] = true;
  auto plus = [&](std::size_t x, std::size_t y) {
    return left_add_[x / right_order_][y / right_order_] * right_order_ +
           right_add_[x % right_order_][y % right_order_];
  };
  for (const auto& [a, b] : pairs) {
    const std::size_t g = left_code_.at(a) * right_order_ + right_code_.at(b);
    std::vector<bool> next = h;
    for (std::size_t x = g; !h[x]; x = plus(x, g))
      for (std::size_t s = 0; s < total; ++s)
        if (h[s]) next[plus(s, x)] = true;
    h = std::move(next);
  }
  return h;
}

bool FiniteProductOracle::holds(const IndexPairs& pairs) const {
  const auto h = span(pairs);
  std::vector<bool> pa(left_order_, false), pb(right_order_, false);
  std::size_t nh = 0, na = 0, nb = 0;
  for (std::size_t x = 0; x < h.size(); ++x) {
    if (!h[x]) continue;
    ++nh;
    const std::size_t a = x / right_order_, b = x % right_order_;
    if (!pa[a]) {
      pa[a] = true;
      ++na;
    }
    if (!pb[b]) {
      pb[b] = true;
      ++nb;
    }
  }
  return nh == na && nh == nb;
}

std::string FiniteProductOracle::key(const IndexPairs& pairs) const {
  const auto h = span(pairs);
  std::string s(h.size(), '0');
  for (std::size_t i = 0; i < h.size(); ++i)
    if (h[i]) s[i] = '1';
  return s;
}

std::unique_ptr<PairOracle> default_oracle(const GameSpec& spec) {
  if (!spec.ball_restricted() && is_finite(spec.left.group) && is_finite(spec.right.group))
    return std::make_unique<FiniteProductOracle>(spec);
  return std::make_unique<LatticeOracle>(spec);
}

std::string position_key(const PairOracle& oracle, std::optional<NodeId> node, const IndexPairs& pairs) {
  return node_str(node) + "|" + oracle.key(pairs);
}

std::string move_key(const std::string& position, const ForallMove& m) {
  return position + "|" + std::to_string(m.node) + (m.side == Side::Left ? "L" : "R") + std::to_string(m.element);
}

namespace {

class Solver {
 public:
  Solver(const GameSpec& spec, const PairOracle& oracle, const SolveOptions& opts, SolveResult& out)
      : spec_(spec), oracle_(oracle), opts_(opts), out_(out) {}

  std::vector<ForallMove> moves_from(std::optional<NodeId> node) const {
    std::vector<ForallMove> out;
    for (NodeId t : spec_.tree.above(node))
      for (Side s : {Side::Left, Side::Right})
        for (ElemIndex e = 0; e < spec_.side(s).carrier.size(); ++e) out.push_back({t, s, e});
    return out;
  }

  // first winning reply to m, if any
  std::optional<ElemIndex> answer(IndexPairs& pairs, const ForallMove& m) {
    const Structure& target = spec_.side(other(m.side));
    for (ElemIndex r = 0; r < target.carrier.size(); ++r) {
      pairs.push_back(m.side == Side::Left ? std::make_pair(m.element, r) : std::make_pair(r, m.element));
      const bool ok = oracle_.holds(pairs) && value(m.node, pairs);
      pairs.pop_back();
      if (ok) return r;
    }
    return std::nullopt;
  }

  bool value(std::optional<NodeId> node, IndexPairs& pairs) {
    const std::string key = position_key(oracle_, node, pairs);
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = memo_.find(key);
      if (it != memo_.end()) return it->second;
    }
    bool exists_wins = true;
    for (const ForallMove& m : moves_from(node)) {
      auto r = answer(pairs, m);
      if (r) {
        std::lock_guard<std::mutex> lock(mu_);
        out_.exists_replies.emplace(move_key(key, m), *r);
      } else {
        std::lock_guard<std::mutex> lock(mu_);
        out_.forall_moves.emplace(key, m);
        exists_wins = false;
        break;
      }
    }
    record(key, exists_wins);
    return exists_wins;
  }

  bool root_parallel(unsigned threads) {
    IndexPairs empty;
    const std::string key = position_key(oracle_, std::nullopt, empty);
    const auto moves = moves_from(std::nullopt);
    std::vector<std::optional<ElemIndex>> replies(moves.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex fail_mu;
    auto work = [&] {
      IndexPairs pairs;
      for (std::size_t i = next++; i < moves.size(); i = next++) {
        try {
          replies[i] = answer(pairs, moves[i]);
        } catch (...) {
          std::lock_guard<std::mutex> lock(fail_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    bool exists_wins = true;
    for (std::size_t i = 0; i < moves.size(); ++i) {
      if (replies[i]) {
        out_.exists_replies.emplace(move_key(key, moves[i]), *replies[i]);
      } else {
        out_.forall_moves.emplace(key, moves[i]);
        exists_wins = false;
        break;
      }
    }
    record(key, exists_wins);
    return exists_wins;
  }

  std::size_t states() const { return memo_.size(); }

 private:
  void record(const std::string& key, bool v) {
    std::lock_guard<std::mutex> lock(mu_);
    memo_.emplace(key, v);
    if (memo_.size() > opts_.max_states)
      throw BudgetExceeded("solve_game: more than " + std::to_string(opts_.max_states) + " positions");
  }

  const GameSpec& spec_;
  const PairOracle& oracle_;
  const SolveOptions& opts_;
  SolveResult& out_;
  std::unordered_map<std::string, bool> memo_;
  std::mutex mu_;
};

}  // namespace

SolveResult solve_game(const GameSpec& spec, const PairOracle& oracle, const SolveOptions& opts) {
  SolveResult out;
  out.ball_restricted = spec.ball_restricted();
  Solver solver(spec, oracle, opts, out);
  bool exists_wins;
  if (opts.threads > 1) {
    exists_wins = solver.root_parallel(opts.threads);
  } else {
    IndexPairs pairs;
    exists_wins = solver.value(std::nullopt, pairs);
  }
  out.winner = exists_wins ? Player::Exists : Player::Forall;
  out.states_explored = solver.states();
  return out;
}

SolveResult solve_game(const GameSpec& spec, const SolveOptions& opts) {
  auto oracle = default_oracle(spec);
  return solve_game(spec, *oracle, opts);
}

Player minimax(const GameSpec& spec, std::size_t max_positions, std::size_t* positions) {
  std::size_t count = 0;
  std::vector<GroupElement> lt, rt;
  IndexPairs played;
  // game values are never stored; only the atomic check is cached, keyed by the
  // set of pairs since it ignores order and repeats
  std::unordered_map<std::string, bool> atomic;
  auto partial_iso = [&]() {
    IndexPairs key = played;
    std::sort(key.begin(), key.end());
    key.erase(std::unique(key.begin(), key.end()), key.end());
    std::string k;
    for (const auto& [a, b] : key) k += std::to_string(a) + "," + std::to_string(b) + ";";
    auto it = atomic.find(k);
    if (it != atomic.end()) return it->second;
    const bool v = is_partial_iso(spec.left.group, spec.right.group, lt, rt);
    atomic.emplace(std::move(k), v);
    return v;
  };
  std::function<bool(std::optional<NodeId>)> exists_wins = [&](std::optional<NodeId> node) -> bool {
    if (++count > max_positions) throw BudgetExceeded("minimax: more than " + std::to_string(max_positions) + " positions");
    for (NodeId t : spec.tree.above(node))
      for (Side s : {Side::Left, Side::Right}) {
        const auto& from = spec.side(s).carrier;
        const auto& to = spec.side(other(s)).carrier;
        for (ElemIndex xi = 0; xi < from.size(); ++xi) {
          bool answered = false;
          for (ElemIndex yi = 0; yi < to.size(); ++yi) {
            lt.push_back(s == Side::Left ? from[xi] : to[yi]);
            rt.push_back(s == Side::Left ? to[yi] : from[xi]);
            played.push_back(s == Side::Left ? std::make_pair(xi, yi) : std::make_pair(yi, xi));
            answered = partial_iso() && exists_wins(t);
            lt.pop_back();
            rt.pop_back();
            played.pop_back();
            if (answered) break;
          }
          if (!answered) return false;
        }
      }
    return true;
  };
  const bool v = exists_wins(std::nullopt);
  if (positions) *positions = count;
  return v ? Player::Exists : Player::Forall;
}

bool t_equivalent(const Presentation& a, const Presentation& b, const Tree& t, const SolveOptions& opts) {
  GameSpec spec{Structure::whole(a), Structure::whole(b), t};
  return solve_game(spec, opts).winner == Player::Exists;
}

TableStrategy::TableStrategy(const GameSpec& spec, const PairOracle& oracle, SolveResult result)
    : spec_(&spec), oracle_(&oracle), result_(std::move(result)) {}

GroupElement TableStrategy::respond(const std::vector<PlayedRound>& history, NodeId node, Side side,
                                    const GroupElement& chosen) const {
  IndexPairs pairs;
  auto locate = [&](const Structure& s, const GroupElement& x) {
    auto i = s.index_of(x);
    if (!i) throw StrategyError("TableStrategy: element " + x.str() + " outside the carrier");
    return *i;
  };
  for (const auto& r : history) {
    const GroupElement& l = r.side == Side::Left ? r.chosen : r.reply;
    const GroupElement& rr = r.side == Side::Left ? r.reply : r.chosen;
    pairs.emplace_back(locate(spec_->left, l), locate(spec_->right, rr));
  }
  std::optional<NodeId> prev;
  if (!history.empty()) prev = history.back().node;
  const std::string key = position_key(*oracle_, prev, pairs);
  ForallMove m{node, side, locate(spec_->side(side), chosen)};
  auto it = result_.exists_replies.find(move_key(key, m));
  if (it == result_.exists_replies.end()) throw StrategyError("TableStrategy: no reply recorded at " + move_key(key, m));
  return spec_->side(other(side)).carrier.at(it->second);
}

namespace {

// partial isomorphism test on element values, specialised by group type
class ValueCheck {
 public:
  explicit ValueCheck(const GameSpec& spec) : spec_(spec) {
    const bool fin = is_finite(spec.left.group) && is_finite(spec.right.group);
    if (fin) {
      GameSpec whole{Structure::whole(spec.left.group), Structure::whole(spec.right.group), Tree()};
      whole_ = std::make_unique<GameSpec>(std::move(whole));
      finite_ = std::make_unique<FiniteProductOracle>(*whole_);
    } else {
      torsion_free_ = is_torsion_free(spec.left.group) && is_torsion_free(spec.right.group);
      if (spec.left.group.relations.rows()) lc_.emplace(spec.left.group);
      if (spec.right.group.relations.rows()) rc_.emplace(spec.right.group);
    }
  }

  bool holds(const std::vector<GroupElement>& l, const std::vector<GroupElement>& r) const {
    if (finite_) {
      IndexPairs pairs;
      for (std::size_t i = 0; i < l.size(); ++i) {
        auto a = whole_->left.index_of(l[i]);
        auto b = whole_->right.index_of(r[i]);
        if (!a || !b) throw StrategyError("reply outside the group");
        pairs.emplace_back(*a, *b);
      }
      return finite_->holds(pairs);
    }
    if (torsion_free_) {
      std::vector<IntVector> lv, rv;
      for (std::size_t i = 0; i < l.size(); ++i) {
        lv.push_back(free_coords(spec_.left.group, lc_ ? &*lc_ : nullptr, l[i]));
        rv.push_back(free_coords(spec_.right.group, rc_ ? &*rc_ : nullptr, r[i]));
      }
      return ranks_match(lv, rv);
    }
    return is_partial_iso(spec_.left.group, spec_.right.group, l, r);
  }

 private:
  const GameSpec& spec_;
  std::unique_ptr<GameSpec> whole_;
  std::unique_ptr<FiniteProductOracle> finite_;
  bool torsion_free_ = false;
  std::optional<Coordinates> lc_, rc_;
};

}  // namespace

VerifyResult verify_strategy(const GameSpec& spec, const ExistsStrategy& strategy, std::size_t max_plays) {
  VerifyResult res;
  ValueCheck check(spec);
  std::vector<PlayedRound> history;
  std::vector<GroupElement> lt, rt;
  std::function<bool(std::optional<NodeId>)> walk = [&](std::optional<NodeId> node) -> bool {
    const auto next = spec.tree.above(node);
    if (next.empty()) {
      if (++res.plays > max_plays) throw BudgetExceeded("verify_strategy: more than " + std::to_string(max_plays) + " plays");
      return true;
    }
    for (NodeId t : next)
      for (Side s : {Side::Left, Side::Right})
        for (const auto& x : spec.side(s).carrier) {
          GroupElement y;
          try {
            y = strategy.respond(history, t, s, x);
          } catch (const StrategyError& e) {
            res.counterexample = history;
            res.counterexample.push_back({t, s, x, {}});
            res.reason = e.what();
            return false;
          }
          if (y.size() != spec.side(other(s)).group.gen_count) {
            res.counterexample = history;
            res.counterexample.push_back({t, s, x, y});
            res.reason = "reply has the wrong length";
            return false;
          }
          history.push_back({t, s, x, y});
          lt.push_back(s == Side::Left ? x : y);
          rt.push_back(s == Side::Left ? y : x);
          bool ok = check.holds(lt, rt);
          if (!ok) {
            res.counterexample = history;
            res.reason = "not a partial isomorphism after round " + std::to_string(history.size());
          } else {
            ok = walk(t);
          }
          history.pop_back();
          lt.pop_back();
          rt.pop_back();
          if (!ok) return false;
        }
    return true;
  };
  res.wins = walk(std::nullopt);
  return res;
}

CoherentStrategy::CoherentStrategy(CoherentFamily family, Tree play_tree, ProductTree index)
    : family_(std::move(family)), play_(std::move(play_tree)), index_(std::move(index)) {
  const std::size_t n = index_.tree.size();
  if (family_.left.relations.rows() || family_.right.relations.rows())
    throw StrategyError("coherent family: groups must be given in free coordinates");
  if (family_.maps.size() != n || family_.domain_rank.size() != n)
    throw StrategyError("coherent family: one map per index node required");
  const std::size_t lcols = family_.left.gen_count, rcols = family_.right.gen_count;
  for (NodeId v = 0; v < n; ++v) {
    const std::size_t r = family_.domain_rank[v];
    const IntMatrix& m = family_.maps[v];
    if (r > lcols || r > rcols || m.rows() != r || m.cols() != rcols)
      throw StrategyError("coherent family: member " + std::to_string(v) + " has the wrong shape");
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = r; j < rcols; ++j)
        if (m(i, j) != 0) throw StrategyError("coherent family: member " + std::to_string(v) + " leaves its stage");
    try {
      inverses_.push_back(inverse_unimodular(m.submatrix(0, 0, r, r)));
    } catch (const std::domain_error&) {
      throw StrategyError("coherent family: member " + std::to_string(v) + " is not an isomorphism");
    }
  }
  for (NodeId v = 0; v < n; ++v) {
    const NodeId t = index_.pairs.at(v).first;
    if (t >= by_play_.size()) by_play_.resize(t + 1);
    by_play_[t].push_back(v);
  }
  ordered_ = index_.tree.ordered_by_ids();
  for (NodeId v = 0; v < n; ++v)
    for (NodeId a : index_.tree.path_to(v)) {
      if (a == v) continue;
      const std::size_t ra = family_.domain_rank[a];
      if (ra > family_.domain_rank[v] || !(family_.maps[v].submatrix(0, 0, ra, rcols) == family_.maps[a]))
        throw StrategyError("coherent family: member " + std::to_string(v) + " does not extend member " +
                            std::to_string(a));
    }
}

NodeId CoherentStrategy::choose(std::optional<NodeId> prev, NodeId play_node, Side side, const GroupElement& y) const {
  const std::size_t width = side == Side::Left ? family_.left.gen_count : family_.right.gen_count;
  if (y.size() != width) throw StrategyError("coherent strategy: element of the wrong length");
  std::size_t support = width;
  while (support > 0 && y.coeffs[support - 1] == 0) --support;
  if (play_node >= by_play_.size())
    throw StrategyError("coherent strategy: play node " + std::to_string(play_node) + " not in the index");
  const auto& cands = by_play_[play_node];
  // with parents numbered first, everything above prev comes after it
  auto it = prev && ordered_ ? std::upper_bound(cands.begin(), cands.end(), *prev) : cands.begin();
  for (; it != cands.end(); ++it) {
    const NodeId v = *it;
    if (family_.domain_rank[v] < support) continue;
    if (prev && !index_.tree.below(*prev, v)) continue;
    return v;
  }
  throw StrategyError("coherent strategy: no admissible index node for play node " + std::to_string(play_node));
}

std::vector<NodeId> CoherentStrategy::index_path(const std::vector<PlayedRound>& history) const {
  std::vector<NodeId> path;
  std::optional<NodeId> prev;
  for (const auto& r : history) {
    prev = choose(prev, r.node, r.side, r.chosen);
    path.push_back(*prev);
  }
  return path;
}

GroupElement CoherentStrategy::respond(const std::vector<PlayedRound>& history, NodeId node, Side side,
                                       const GroupElement& chosen) const {
  auto path = index_path(history);
  std::optional<NodeId> prev;
  if (!path.empty()) prev = path.back();
  const NodeId v = choose(prev, node, side, chosen);
  const std::size_t r = family_.domain_rank[v];
  IntVector head(chosen.coeffs.begin(), chosen.coeffs.begin() + static_cast<std::ptrdiff_t>(r));
  if (side == Side::Left) {
    if (r == 0) return GroupElement::zero(family_.right.gen_count);
    return GroupElement(apply_row(head, family_.maps[v]));
  }
  IntVector back = r ? apply_row(head, inverses_[v]) : IntVector{};
  back.resize(family_.left.gen_count, Int(0));
  return GroupElement(back);
}

std::unique_ptr<CoherentStrategy> strategy_from_coherent_family(const CoherentFamily& family, const Tree& play_tree,
                                                                const ProductTree& index) {
  return std::make_unique<CoherentStrategy>(family, play_tree, index);
}

namespace {

nlohmann::ordered_json int_json(const Int& x) {
  if (x.fits_slong_p()) return x.get_si();
  return x.get_str();
}

nlohmann::ordered_json vec_json(const GroupElement& x) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : x.coeffs) arr.push_back(int_json(c));
  return arr;
}

}  // namespace

nlohmann::ordered_json transcript_json(const Transcript& t) {
  nlohmann::ordered_json j;
  auto moves = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < t.rounds.size(); ++i) {
    const auto& r = t.rounds[i];
    nlohmann::ordered_json m;
    m["round"] = i;
    m["node"] = r.node;
    m["side"] = to_string(r.side);
    m["element"] = vec_json(r.chosen);
    m["reply"] = vec_json(r.reply);
    moves.push_back(m);
  }
  j["moves"] = moves;
  j["verdict"] = t.verdict;
  if (!t.detail.empty()) j["detail"] = t.detail;
  return j;
}

}  // namespace efg
