#include "efg/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace efg {

namespace {

[[noreturn]] void schema(const std::string& msg) { throw ScenarioError(msg); }

void allow_keys(const Json& j, const std::string& what, std::initializer_list<const char*> keys) {
  if (!j.is_object()) schema(what + ": expected an object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) schema(what + ": unknown key \"" + it.key() + "\"");
}

const Json& need(const Json& j, const std::string& what, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) schema(what + ": missing \"" + key + "\"");
  return *it;
}

std::uint64_t as_u64(const Json& j, const std::string& what) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
    schema(what + ": expected a non-negative integer");
  return j.get<std::uint64_t>();
}

long as_long(const Json& j, const std::string& what) {
  if (!j.is_number_integer()) schema(what + ": expected an integer");
  return j.get<long>();
}

bool as_bool(const Json& j, const std::string& what) {
  if (!j.is_boolean()) schema(what + ": expected true or false");
  return j.get<bool>();
}

std::size_t opt_size(const Json& j, const char* key, const std::string& what, std::size_t dflt) {
  auto it = j.find(key);
  return it == j.end() ? dflt : static_cast<std::size_t>(as_u64(*it, what + "." + key));
}

IntVector parse_vector(const Json& j, const std::string& what) {
  if (!j.is_array()) schema(what + ": expected an array of integers");
  IntVector v;
  for (const auto& x : j) {
    if (x.is_number_integer()) v.push_back(Int(x.get<long>()));
    else if (x.is_string()) {
      try {
        v.push_back(Int(x.get<std::string>()));
      } catch (const std::invalid_argument&) {
        schema(what + ": bad integer string");
      }
    } else schema(what + ": expected an array of integers");
  }
  return v;
}

IntMatrix parse_matrix(const Json& j, std::size_t cols, const std::string& what) {
  if (!j.is_array()) schema(what + ": expected an array of rows");
  IntMatrix m(0, cols);
  for (const auto& r : j) {
    IntVector v = parse_vector(r, what);
    if (v.size() != cols) schema(what + ": row of length " + std::to_string(v.size()) + ", expected " + std::to_string(cols));
    m.append_row(v);
  }
  return m;
}

Json vector_json(const IntVector& v) {
  Json a = Json::array();
  for (const auto& x : v) {
    if (x.fits_slong_p()) a.push_back(x.get_si());
    else a.push_back(x.get_str());
  }
  return a;
}

Json int_json(const Int& x) { return x.fits_slong_p() ? Json(x.get_si()) : Json(x.get_str()); }

std::uint64_t seed_of(const Json& j, const RunOptions& opts, const std::string& what) {
  if (opts.seed) return *opts.seed;
  auto it = j.find("seed");
  return it == j.end() ? 0 : as_u64(*it, what + ".seed");
}

Json header(const Json& j, const std::string& kind, std::uint64_t seed) {
  Json r;
  r["kind"] = kind;
  r["name"] = j.value("name", std::string());
  r["seed"] = seed;
  r["verdicts"] = Json::object();
  return r;
}

// tree specs for index trees: a parent array, {"chain":n}, {"branching":[k,depth]}, {"product":[a,b]}
Tree parse_tree_spec(const Json& j, const std::string& what) {
  if (j.is_array()) return parse_tree(j);
  if (!j.is_object() || j.size() != 1) schema(what + ": expected a parent array or a one-key tree object");
  const auto it = j.begin();
  if (it.key() == "chain") return Tree::chain(as_u64(it.value(), what + ".chain"));
  if (it.key() == "branching") {
    const IntVector v = parse_vector(it.value(), what + ".branching");
    if (v.size() != 2 || v[0] < 1 || v[1] < 0) schema(what + ".branching: expected [k, depth]");
    return Tree::full_branching(v[0].get_ui(), v[1].get_ui());
  }
  if (it.key() == "product") {
    if (!it.value().is_array() || it.value().size() != 2) schema(what + ".product: expected two trees");
    return tree_product(parse_tree_spec(it.value()[0], what + ".product[0]"),
                        parse_tree_spec(it.value()[1], what + ".product[1]"))
        .tree;
  }
  schema(what + ": unknown tree form \"" + it.key() + "\"");
}

std::size_t stage_key(const std::string& k, const std::string& what) {
  if (k.empty() || k.find_first_not_of("0123456789") != std::string::npos) schema(what + ": stage keys are integers");
  return std::stoul(k);
}

// ---- game ----

using Agent = std::function<std::optional<ForallMove>(std::optional<NodeId>, const IndexPairs&)>;
using Responder = std::function<std::optional<ElemIndex>(std::optional<NodeId>, const IndexPairs&, const ForallMove&)>;

// one play; a missing move or reply abandons it
Transcript play_out(const GameSpec& spec, const PairOracle& oracle, const Agent& forall, const Responder& exists) {
  Transcript t;
  IndexPairs pairs;
  std::optional<NodeId> node;
  while (!spec.tree.above(node).empty()) {
    auto m = forall(node, pairs);
    if (!m) {
      t.verdict = "abandoned";
      t.detail = "forall quit after " + std::to_string(t.rounds.size()) + " rounds";
      return t;
    }
    auto r = exists(node, pairs, *m);
    if (!r) {
      t.verdict = "abandoned";
      t.detail = "exists quit after " + std::to_string(t.rounds.size()) + " rounds";
      return t;
    }
    const Structure& from = spec.side(m->side);
    const Structure& to = spec.side(other(m->side));
    t.rounds.push_back({m->node, m->side, from.carrier.at(m->element), to.carrier.at(*r)});
    pairs.push_back(m->side == Side::Left ? std::make_pair(m->element, *r) : std::make_pair(*r, m->element));
    node = m->node;
    if (!oracle.holds(pairs)) {
      t.verdict = "forall-wins";
      t.detail = "round " + std::to_string(t.rounds.size()) + ": the played pairs violate a relation";
      return t;
    }
  }
  t.verdict = "exists-wins";
  t.detail = "no node left above " + (node ? std::to_string(*node) : std::string("the root"));
  return t;
}

// the solver's reply when recorded, otherwise the first reply keeping a partial isomorphism
Responder solver_exists(const GameSpec& spec, const PairOracle& oracle, const SolveResult& res) {
  return [&spec, &oracle, &res](std::optional<NodeId> node, const IndexPairs& pairs, const ForallMove& m) {
    auto it = res.exists_replies.find(move_key(position_key(oracle, node, pairs), m));
    if (it != res.exists_replies.end()) return std::optional<ElemIndex>(it->second);
    const Structure& to = spec.side(other(m.side));
    IndexPairs p = pairs;
    for (ElemIndex r = 0; r < to.carrier.size(); ++r) {
      p.push_back(m.side == Side::Left ? std::make_pair(m.element, r) : std::make_pair(r, m.element));
      if (oracle.holds(p)) return std::optional<ElemIndex>(r);
      p.pop_back();
    }
    return std::optional<ElemIndex>(0);
  };
}

Agent solver_forall(const GameSpec& spec, const PairOracle& oracle, const SolveResult& res) {
  return [&spec, &oracle, &res](std::optional<NodeId> node, const IndexPairs& pairs) {
    auto it = res.forall_moves.find(position_key(oracle, node, pairs));
    if (it != res.forall_moves.end()) return std::optional<ForallMove>(it->second);
    return std::optional<ForallMove>(ForallMove{spec.tree.above(node).front(), Side::Left, 0});
  };
}

Json game_report(const Json& j, const RunOptions& opts) {
  const std::string what = "game";
  allow_keys(j, what, {"kind", "name", "seed", "left", "right", "tree", "ball_radius", "expect", "check_minimax",
                       "sample_plays", "max_states"});
  const std::uint64_t seed = seed_of(j, opts, what);
  Json r = header(j, "game", seed);
  const Presentation a = parse_group(need(j, what, "left"));
  const Presentation b = parse_group(need(j, what, "right"));
  GameSpec spec;
  spec.tree = parse_tree(need(j, what, "tree"));
  try {
    if (j.contains("ball_radius")) {
      const std::size_t rad = as_u64(j["ball_radius"], what + ".ball_radius");
      spec.left = Structure::ball(a, rad);
      spec.right = Structure::ball(b, rad);
    } else {
      spec.left = Structure::whole(a);
      spec.right = Structure::whole(b);
    }
  } catch (const GroupError& e) {
    schema(what + ": " + e.what() + " (give ball_radius for infinite groups)");
  }
  SolveOptions so;
  so.max_states = opts.max_states ? *opts.max_states : opt_size(j, "max_states", what, so.max_states);
  auto oracle = default_oracle(spec);
  const SolveResult res = solve_game(spec, *oracle, so);

  r["left_order"] = spec.left.carrier.size();
  r["right_order"] = spec.right.carrier.size();
  r["tree"] = tree_json(spec.tree);
  r["ball_restricted"] = spec.ball_restricted();
  r["winner"] = to_string(res.winner);
  r["states_explored"] = res.states_explored;

  if (j.contains("expect")) {
    const Json& e = j["expect"];
    allow_keys(e, what + ".expect", {"winner"});
    const std::string w = need(e, what + ".expect", "winner").get<std::string>();
    if (w != "forall" && w != "exists") schema(what + ".expect.winner: forall or exists");
    r["verdicts"]["winner"] = (w == "exists") == (res.winner == Player::Exists);
  }
  if (res.winner == Player::Exists) {
    TableStrategy strat(spec, *oracle, res);
    const VerifyResult v = verify_strategy(spec, strat);
    r["strategy"] = {{"plays", v.plays}, {"wins", v.wins}};
    r["verdicts"]["strategy_verified"] = v.wins;
  } else {
    auto it = res.forall_moves.find(position_key(*oracle, std::nullopt, {}));
    if (it != res.forall_moves.end()) {
      const ForallMove& m = it->second;
      r["forall_opening"] = {{"node", m.node},
                             {"side", to_string(m.side)},
                             {"element", vector_json(spec.side(m.side).carrier.at(m.element).coeffs)}};
    }
  }
  if (j.contains("check_minimax") && as_bool(j["check_minimax"], what + ".check_minimax")) {
    std::size_t positions = 0;
    try {
      const Player p = minimax(spec, 100'000, &positions);
      r["minimax"] = {{"winner", to_string(p)}, {"positions", positions}};
      r["verdicts"]["minimax_agrees"] = p == res.winner;
    } catch (const BudgetExceeded&) {
      r["minimax"] = {{"winner", "budget"}, {"positions", positions}};
      r["verdicts"]["minimax_agrees"] = false;
    }
  }
  const std::size_t samples = opt_size(j, "sample_plays", what, 0);
  if (samples > 0) {
    std::mt19937_64 rng(seed);
    Agent random_forall = [&](std::optional<NodeId> node, const IndexPairs&) {
      const auto nodes = spec.tree.above(node);
      const NodeId t = nodes[std::uniform_int_distribution<std::size_t>(0, nodes.size() - 1)(rng)];
      const Side s = std::uniform_int_distribution<int>(0, 1)(rng) ? Side::Right : Side::Left;
      const ElemIndex e = std::uniform_int_distribution<std::size_t>(0, spec.side(s).carrier.size() - 1)(rng);
      return std::optional<ForallMove>(ForallMove{t, s, e});
    };
    Json plays = Json::array();
    for (std::size_t i = 0; i < samples; ++i)
      plays.push_back(transcript_json(play_out(spec, *oracle, random_forall, solver_exists(spec, *oracle, res))));
    r["sample_plays"] = plays;
  }
  return r;
}

// ---- build ----

Json build_report(const Json& j, const RunOptions& opts) {
  const std::string what = "build";
  allow_keys(j, what, {"kind", "name", "seed", "index", "plan", "script", "gadget_length", "chain_length", "d_bound",
                       "g_radius", "height_table", "expect", "cross_check"});
  const std::uint64_t seed = seed_of(j, opts, what);
  Json r = header(j, "build", seed);
  const BuildConfig cfg = parse_build_config(j);
  FiltrationBuild b = [&] {
    try {
      return build_truncated_pair(cfg);
    } catch (const ConstructionError& e) {
      schema(what + ": " + e.what());
    } catch (const TreeError& e) {
      schema(what + ": " + e.what());
    }
  }();

  Json stages = Json::array();
  for (std::size_t mu = 0; mu < b.stages().size(); ++mu) {
    const StageInfo& s = b.stages()[mu];
    Json row{{"stage", mu}, {"kind", to_string(s.kind)}, {"rank_before", s.rank_before}, {"rank_after", s.rank_after}};
    if (s.kind == StageKind::E1) row["separates"] = s.guess_separates;
    stages.push_back(row);
  }
  r["index_size"] = b.index().size();
  r["rank"] = b.rank();
  r["stages"] = stages;

  Json reg = Json::array();
  for (const auto& e : b.registry().entries()) {
    Json nodes = Json::array();
    for (NodeId t : e.nodes) nodes.push_back(t);
    reg.push_back({{"name", e.name}, {"stage", e.stage}, {"n", e.n}, {"nodes", nodes}});
  }
  r["registry"] = reg;

  bool free_ok = true;
  for (int side = 0; side < 2; ++side) {
    const auto inv = invariant_factors(b.presentation(side));
    free_ok = free_ok && inv.torsion_free() && inv.free_rank == b.rank();
  }
  r["verdicts"]["truncation_free"] = free_ok;

  std::mt19937_64 rng(seed);
  const std::size_t cross = opt_size(j, "cross_check", what, 0);
  Json chains = Json::array();
  std::size_t total = 0, blocked = 0, cross_agree = 0, cross_done = 0;
  for (std::size_t ci = 0; ci < b.chains().size(); ++ci) {
    const ZChain& c = b.chains()[ci];
    Json primes = Json::array(), ks = Json::array();
    for (const auto& p : c.primes) primes.push_back(int_json(p));
    for (const auto& k : c.ks) ks.push_back(k.label);
    std::size_t nb = 0;
    Json steps = Json::array();
    std::vector<std::size_t> per_step(c.primes.size(), 0);
    for (const auto& t : c.triples) {
      const auto ob = extension_obstruction(c, c.h, t);
      if (ob.blocked) {
        ++nb;
        ++per_step.at(*ob.step);
      }
    }
    for (auto n : per_step) steps.push_back(n);
    if (cross > 0 && !c.triples.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, c.triples.size() - 1);
      for (std::size_t i = 0; i < cross; ++i) {
        const Triple& t = c.triples[pick(rng)];
        const bool direct = extension_exists(b, ci, c.h, t);
        cross_agree += direct != extension_obstruction(c, c.h, t).blocked;
        ++cross_done;
      }
    }
    chains.push_back({{"stage", c.stage},
                      {"beta", c.beta},
                      {"ladder", c.ladder.str()},
                      {"primes", primes},
                      {"k", ks},
                      {"triples", c.triples.size()},
                      {"blocked", nb},
                      {"blocked_at_step", steps}});
    total += c.triples.size();
    blocked += nb;
  }
  r["chains"] = chains;
  r["obstruction"] = {{"triples", total}, {"blocked", blocked}, {"exceptions", total - blocked}};
  if (cross_done > 0) {
    r["obstruction"]["cross_checked"] = cross_done;
    r["verdicts"]["obstruction_matches_direct"] = cross_agree == cross_done;
  }

  const FamilyCheck fc = check_family(b);
  r["verdicts"]["family"] = fc.all();
  const ProjectionSystem p = build_projections(b);
  r["verdicts"]["projections"] = check_projections(b, p).all();
  bool sf = true;
  std::size_t sf_checks = 0;
  for (std::size_t ci = 0; ci < b.chains().size(); ++ci) {
    const auto ladders = all_ladders(b.chains()[ci].stage, b.special());
    for (int side = 0; side < 2; ++side) {
      const auto rep = check_standard_form(b, p, side, ci, ladders, registered_y(b, ci, side));
      sf = sf && rep.ok();
      sf_checks += rep.checks;
    }
  }
  r["standard_form_checks"] = sf_checks;
  r["verdicts"]["standard_form"] = sf;

  if (j.contains("height_table")) {
    const std::size_t n = as_u64(j["height_table"], what + ".height_table");
    const auto h = height_table(n);
    Json rows = Json::array();
    bool exact = true;
    for (std::size_t i = 0; i < h.size(); ++i) {
      rows.push_back({{"N", i + 1}, {"height", h[i]}});
      exact = exact && h[i] == i + 1;
    }
    r["heights"] = rows;
    r["verdicts"]["heights_exact"] = exact;
  }
  if (j.contains("expect")) {
    const Json& e = j["expect"];
    allow_keys(e, what + ".expect", {"chain_installed", "all_blocked"});
    if (e.contains("chain_installed"))
      r["verdicts"]["chain_installed"] = as_bool(e["chain_installed"], what + ".expect.chain_installed") == !b.chains().empty();
    if (e.contains("all_blocked") && as_bool(e["all_blocked"], what + ".expect.all_blocked"))
      r["verdicts"]["all_blocked"] = !b.chains().empty() && blocked == total;
  }
  return r;
}

// ---- equivalence ----

IntMatrix seeded_unimodular(std::size_t n, std::mt19937_64& rng) {
  IntMatrix u = IntMatrix::identity(n);
  if (n < 2) return u;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_int_distribution<int> k(-1, 1);
  for (std::size_t s = 0; s < 3 * n; ++s) {
    const std::size_t a = pick(rng), c = pick(rng);
    if (a != c) u.add_row_multiple(a, c, Int(k(rng)));
  }
  return u;
}

Filtration parse_filtration_side(const Json& j, const std::string& what) {
  if (!j.is_object()) schema(what + ": expected an object");
  if (j.contains("build")) {
    allow_keys(j, what, {"build", "side"});
    const long side = j.contains("side") ? as_long(j["side"], what + ".side") : 0;
    if (side != 0 && side != 1) schema(what + ".side: 0 or 1");
    try {
      return Filtration::of_build(build_truncated_pair(parse_build_config(j["build"])), static_cast<int>(side));
    } catch (const ConstructionError& e) {
      schema(what + ": " + e.what());
    }
  }
  allow_keys(j, what, {"rank", "levels"});
  const std::size_t rank = as_u64(need(j, what, "rank"), what + ".rank");
  const Json& lv = need(j, what, "levels");
  if (!lv.is_array() || lv.empty()) schema(what + ".levels: expected a nonempty array");
  std::vector<std::vector<IntVector>> gens;
  for (const auto& l : lv) {
    const IntMatrix m = parse_matrix(l, rank, what + ".levels");
    std::vector<IntVector> rows;
    for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(m.row(i));
    gens.push_back(rows);
  }
  try {
    return Filtration::from_generators(rank, gens);
  } catch (const EquivalenceError& e) {
    schema(what + ": " + e.what());
  }
}

Json equivalence_report(const Json& j, const RunOptions& opts) {
  const std::string what = "equivalence";
  allow_keys(j, what, {"kind", "name", "seed", "left", "right", "levels", "coeff_bound", "node_budget", "rebase", "expect"});
  const std::uint64_t seed = seed_of(j, opts, what);
  Json r = header(j, "equivalence", seed);
  const Filtration f = parse_filtration_side(need(j, what, "left"), what + ".left");
  Filtration g = parse_filtration_side(need(j, what, "right"), what + ".right");
  const bool rebase = j.contains("rebase") ? as_bool(j["rebase"], what + ".rebase") : true;
  std::mt19937_64 rng(seed);
  if (rebase) g = g.rebased(seeded_unimodular(g.ambient_rank, rng));

  const std::size_t common = std::min(f.length(), g.length());
  if (common == 0) schema(what + ": filtrations need at least two levels");
  const std::size_t levels = opt_size(j, "levels", what, common - 1);
  if (levels >= common) schema(what + ".levels: at most " + std::to_string(common - 1));
  const long bound = j.contains("coeff_bound") ? as_long(j["coeff_bound"], what + ".coeff_bound") : 1'000'000;
  const std::size_t budget = opt_size(j, "node_budget", what, 200'000);

  const bool stable = stable_quotient_equiv(f, g);
  r["lengths"] = {f.length(), g.length()};
  r["stable_quotient_equiv"] = stable;
  Json rows = Json::array();
  bool all_found = true, top_found = false, sound = true;
  for (std::size_t alpha = 0; alpha <= levels; ++alpha) {
    const SearchResult s = search_level_preserving(f, g, alpha, bound, budget);
    const bool ok = s.iso && is_level_preserving(*s.iso, f, g, alpha);
    if (s.iso && !ok) sound = false;
    Json row{{"level", alpha}, {"found", ok}, {"bounded", s.bounded}, {"nodes", s.nodes}};
    if (!s.reason.empty()) row["reason"] = s.reason;
    if (s.iso) row["max_entry"] = int_json(s.iso->max_entry());
    rows.push_back(row);
    all_found = all_found && ok;
    if (alpha == levels) top_found = ok;
  }
  r["search"] = rows;
  r["verdicts"]["search_sound"] = sound;
  r["verdicts"]["search_implies_stable"] = !all_found || stable;
  if (j.contains("expect")) {
    const Json& e = j["expect"];
    allow_keys(e, what + ".expect", {"equivalent"});
    if (as_bool(need(e, what + ".expect", "equivalent"), what + ".expect.equivalent")) {
      r["verdicts"]["stable_quotient_equiv"] = stable;
      r["verdicts"]["search_all_levels"] = all_found;
    } else {
      r["verdicts"]["quotients_differ"] = !stable;
      r["verdicts"]["search_fails"] = !top_found;
    }
  }
  return r;
}

Json run_json(const Json& j, const RunOptions& opts, const std::filesystem::path& base, int depth);

Json suite_report(const Json& j, const RunOptions& opts, const std::filesystem::path& base, int depth) {
  const std::string what = "suite";
  allow_keys(j, what, {"kind", "name", "seed", "scenarios"});
  if (depth > 8) schema("suite: nesting deeper than 8");
  const std::uint64_t seed = seed_of(j, opts, what);
  Json r = header(j, "suite", seed);
  RunOptions child = opts;
  if (!child.seed && j.contains("seed")) child.seed = seed;
  Json items = Json::array();
  const Json& list = j.contains("scenarios") ? j["scenarios"] : Json::array();
  if (!list.is_array()) schema("suite.scenarios: expected an array");
  std::size_t i = 0;
  for (const auto& s : list) {
    Json rep;
    std::string label;
    if (s.is_string()) {
      const std::filesystem::path p = base / s.get<std::string>();
      std::ifstream in(p);
      if (!in) schema("suite: cannot read " + s.get<std::string>());
      Json inner;
      try {
        inner = Json::parse(in);
      } catch (const Json::parse_error& e) {
        schema("suite: " + s.get<std::string>() + ": " + e.what());
      }
      rep = run_json(inner, child, p.parent_path(), depth + 1);
      label = s.get<std::string>();
    } else {
      rep = run_json(s, child, base, depth + 1);
      label = rep["name"].get<std::string>();
    }
    Report sub{rep};
    r["verdicts"][std::to_string(i++) + ":" + label] = sub.passed();
    items.push_back(rep);
  }
  r["reports"] = items;
  return r;
}

Json run_json(const Json& j, const RunOptions& opts, const std::filesystem::path& base, int depth) {
  if (!j.is_object()) schema("scenario: expected an object");
  auto k = j.find("kind");
  if (k == j.end() || !k->is_string()) schema("scenario: missing \"kind\"");
  if (j.contains("name") && !j["name"].is_string()) schema("scenario.name: expected a string");
  const std::string kind = k->get<std::string>();
  try {
    if (kind == "game") return game_report(j, opts);
    if (kind == "build") return build_report(j, opts);
    if (kind == "equivalence") return equivalence_report(j, opts);
    if (kind == "suite") return suite_report(j, opts, base, depth);
  } catch (const Json::exception& e) {
    schema(kind + ": " + e.what());
  } catch (const TreeError& e) {
    schema(kind + ": " + e.what());
  } catch (const GroupError& e) {
    schema(kind + ": " + e.what());
  }
  schema("scenario: unknown kind \"" + kind + "\"");
}

void collect_failures(const Json& body, const std::string& prefix, std::vector<std::string>& out) {
  for (auto it = body["verdicts"].begin(); it != body["verdicts"].end(); ++it)
    if (!it.value().get<bool>()) out.push_back(prefix + it.key());
  if (body.contains("reports"))
    for (const auto& sub : body["reports"]) collect_failures(sub, prefix + sub["name"].get<std::string>() + "/", out);
}

std::string scalar_text(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

void flatten(const Json& v, const std::string& path, std::ostringstream& out) {
  if (v.is_object()) {
    for (auto it = v.begin(); it != v.end(); ++it)
      flatten(it.value(), path.empty() ? it.key() : path + "." + it.key(), out);
  } else if (v.is_array() && !v.empty() && (v.front().is_object() || v.front().is_array())) {
    for (std::size_t i = 0; i < v.size(); ++i) flatten(v[i], path + "[" + std::to_string(i) + "]", out);
  } else {
    out << path << " = " << scalar_text(v) << "\n";
  }
}

void render_text(const Json& body, const std::string& indent, std::ostringstream& out) {
  out << indent << body["kind"].get<std::string>() << " " << body["name"].get<std::string>() << " (seed "
      << body["seed"].get<std::uint64_t>() << ")\n";
  for (auto it = body["verdicts"].begin(); it != body["verdicts"].end(); ++it)
    out << indent << "verdict " << it.key() << ": " << (it.value().get<bool>() ? "pass" : "FAIL") << "\n";
  for (auto it = body.begin(); it != body.end(); ++it) {
    const std::string& key = it.key();
    if (key == "kind" || key == "name" || key == "seed" || key == "verdicts" || key == "reports") continue;
    std::ostringstream part;
    flatten(it.value(), key, part);
    std::istringstream lines(part.str());
    for (std::string line; std::getline(lines, line);) out << indent << "  " << line << "\n";
  }
  if (body.contains("reports"))
    for (const auto& sub : body["reports"]) render_text(sub, indent + "    ", out);
}

}  // namespace

bool Report::passed() const {
  std::vector<std::string> f;
  collect_failures(body, "", f);
  return f.empty();
}

std::vector<std::string> Report::failures() const {
  std::vector<std::string> f;
  collect_failures(body, "", f);
  return f;
}

Presentation parse_group(const Json& j) {
  allow_keys(j, "group", {"gens", "relations"});
  Presentation p;
  p.gen_count = as_u64(need(j, "group", "gens"), "group.gens");
  p.relations = j.contains("relations") ? parse_matrix(j["relations"], p.gen_count, "group.relations")
                                        : IntMatrix(0, p.gen_count);
  return p;
}

Json group_json(const Presentation& g) {
  Json rel = Json::array();
  for (std::size_t i = 0; i < g.relations.rows(); ++i) rel.push_back(vector_json(g.relations.row(i)));
  return {{"gens", g.gen_count}, {"relations", rel}};
}

Tree parse_tree(const Json& j) {
  if (!j.is_array()) schema("tree: expected a parent array");
  std::vector<std::optional<NodeId>> parents;
  for (const auto& x : j) {
    if (x.is_null()) parents.emplace_back();
    else parents.emplace_back(static_cast<NodeId>(as_u64(x, "tree entry")));
  }
  try {
    return Tree::build(parents);
  } catch (const TreeError& e) {
    schema(std::string("tree: ") + e.what());
  }
}

Json tree_json(const Tree& t) {
  Json a = Json::array();
  for (const auto& p : t.parents()) a.push_back(p ? Json(*p) : Json(nullptr));
  return a;
}

BuildConfig parse_build_config(const Json& j) {
  const std::string what = "build";
  if (!j.is_object()) schema(what + ": expected an object");
  BuildConfig c;
  c.index = parse_tree_spec(need(j, what, "index"), what + ".index");
  const Json& plan = need(j, what, "plan");
  if (!plan.is_array() || plan.empty()) schema(what + ".plan: expected a nonempty array of stage kinds");
  for (const auto& s : plan) {
    if (!s.is_string()) schema(what + ".plan: stage kinds are strings");
    try {
      c.plan.push_back(stage_kind_from(s.get<std::string>()));
    } catch (const ConstructionError& e) {
      schema(what + ".plan: " + e.what());
    }
  }
  c.gadget_length = opt_size(j, "gadget_length", what, c.gadget_length);
  c.chain_length = opt_size(j, "chain_length", what, c.chain_length);
  if (j.contains("d_bound")) c.d_bound = as_long(j["d_bound"], what + ".d_bound");
  c.g_radius = opt_size(j, "g_radius", what, c.g_radius);
  if (j.contains("script")) {
    const Json& s = j["script"];
    allow_keys(s, what + ".script", {"w_nodes", "h"});
    if (s.contains("w_nodes")) {
      const Json& u = s["w_nodes"];
      if (!u.is_object()) schema(what + ".script.w_nodes: expected an object keyed by stage");
      for (auto it = u.begin(); it != u.end(); ++it) {
        std::vector<std::vector<NodeId>> node_sets;
        if (!it.value().is_array()) schema(what + ".script.w_nodes: node-id lists per stage");
        for (const auto& th : it.value()) {
          std::vector<NodeId> ids;
          if (!th.is_array()) schema(what + ".script.w_nodes: node-id lists per stage");
          for (const auto& x : th) ids.push_back(as_u64(x, what + ".script.w_nodes"));
          node_sets.push_back(ids);
        }
        c.script.w_nodes[stage_key(it.key(), what + ".script.w_nodes")] = node_sets;
      }
    }
    if (s.contains("h")) {
      const Json& h = s["h"];
      if (!h.is_object()) schema(what + ".script.h: expected an object keyed by stage");
      for (auto it = h.begin(); it != h.end(); ++it) {
        const std::string w = what + ".script.h." + it.key();
        const Json& v = it.value();
        HGuess g;
        if (v.is_string()) {
          if (v.get<std::string>() != "identity") schema(w + ": \"identity\", {\"family\":n}, {\"flip\":[stage,n]} or a matrix");
        } else if (v.is_object() && v.contains("family")) {
          allow_keys(v, w, {"family"});
          g.kind = HGuess::Kind::Family;
          g.node = as_u64(v["family"], w + ".family");
        } else if (v.is_object() && v.contains("flip")) {
          allow_keys(v, w, {"flip"});
          const IntVector f = parse_vector(v["flip"], w + ".flip");
          if (f.size() != 2 || f[0] < 0 || f[1] < 0) schema(w + ".flip: expected [stage, n]");
          g.kind = HGuess::Kind::Flip;
          g.flip_stage = f[0].get_ui();
          g.flip_index = f[1].get_ui();
        } else if (v.is_array()) {
          g.kind = HGuess::Kind::Matrix;
          g.matrix = parse_matrix(v, v.empty() ? 0 : v.front().size(), w);
        } else {
          schema(w + ": \"identity\", {\"family\":n}, {\"flip\":[stage,n]} or a matrix");
        }
        c.script.guesses[stage_key(it.key(), w)] = g;
      }
    }
  }
  for (const auto& [stage, _] : c.script.w_nodes)
    if (stage >= c.plan.size() || c.plan[stage] != StageKind::E0)
      schema(what + ".script.w_nodes: stage " + std::to_string(stage) + " is not a gadget stage of the plan");
  for (const auto& [stage, _] : c.script.guesses)
    if (stage >= c.plan.size() || c.plan[stage] != StageKind::E1)
      schema(what + ".script.h: stage " + std::to_string(stage) + " is not a chain stage of the plan");
  return c;
}

Report run_scenario(const Json& scenario, const RunOptions& opts, const std::filesystem::path& base_dir) {
  return Report{run_json(scenario, opts, base_dir, 0)};
}

Report run_scenario_file(const std::filesystem::path& path, const RunOptions& opts) {
  std::ifstream in(path);
  if (!in) schema("cannot read " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    schema(path.string() + ": " + e.what());
  }
  return run_scenario(j, opts, path.parent_path());
}

std::string emit_report(const Report& r, ReportFormat format) {
  if (format == ReportFormat::Json) return r.body.dump(2) + "\n";
  std::ostringstream out;
  render_text(r.body, "", out);
  out << (r.passed() ? "PASS" : "FAIL") << "\n";
  return out.str();
}

std::vector<std::pair<std::string, bool>> verdicts_of_rendering(const std::string& text) {
  std::vector<std::pair<std::string, bool>> out;
  if (!text.empty() && text.front() == '{') {
    const Json j = Json::parse(text);
    for (auto it = j["verdicts"].begin(); it != j["verdicts"].end(); ++it) out.emplace_back(it.key(), it.value().get<bool>());
    return out;
  }
  std::istringstream in(text);
  const std::string tag = "verdict ";
  for (std::string line; std::getline(in, line);) {
    if (line.rfind(tag, 0) != 0) continue;  // top level only
    const auto colon = line.rfind(": ");
    out.emplace_back(line.substr(tag.size(), colon - tag.size()), line.substr(colon + 2) == "pass");
  }
  return out;
}

std::vector<std::size_t> height_table(std::size_t max_n, long p) {
  std::vector<std::size_t> out;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const Gadget g = make_gadget(0, n);
    const PHeight h = p_height(g.group, g.w_span(n), g.u(0), Int(p));
    out.push_back(h.infinite ? 0 : h.value);
  }
  return out;
}

Transcript interactive_play(const GameSpec& spec, Player human, std::istream& in, std::ostream& out,
                            const SolveOptions& opts) {
  auto oracle = default_oracle(spec);
  const SolveResult res = solve_game(spec, *oracle, opts);
  out << "solver: " << to_string(res.winner) << " wins this game\n";

  auto read_line = [&](std::string& line) -> bool {
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  auto read_element = [&](std::istringstream& ls, const Structure& s, std::string& err) -> std::optional<ElemIndex> {
    IntVector c;
    std::string tok;
    while (ls >> tok) {
      try {
        c.push_back(Int(tok));
      } catch (const std::invalid_argument&) {
        err = "\"" + tok + "\" is not an integer";
        return std::nullopt;
      }
    }
    if (c.size() != s.group.gen_count) {
      err = "expected " + std::to_string(s.group.gen_count) + " coefficients, got " + std::to_string(c.size());
      return std::nullopt;
    }
    auto i = s.index_of(GroupElement(c));
    if (!i) err = "element " + to_string(c) + " is not in the structure";
    return i;
  };
  auto show_carrier = [&](const Structure& s) {
    out << "  " << (&s == &spec.left ? "L" : "R") << " elements:";
    const std::size_t shown = std::min<std::size_t>(s.carrier.size(), 16);
    for (std::size_t i = 0; i < shown; ++i) out << " " << s.carrier[i].str();
    if (shown < s.carrier.size()) out << " ... (" << s.carrier.size() << " total)";
    out << "\n";
  };

  Agent forall;
  Responder exists;
  if (human == Player::Forall) {
    exists = solver_exists(spec, *oracle, res);
    forall = [&](std::optional<NodeId> node, const IndexPairs&) -> std::optional<ForallMove> {
      const auto nodes = spec.tree.above(node);
      for (;;) {
        out << "your move: <node> <L|R> <coefficients>, or quit\n  legal nodes:";
        for (NodeId t : nodes) out << " " << t;
        out << "\n";
        show_carrier(spec.left);
        show_carrier(spec.right);
        std::string line;
        if (!read_line(line)) return std::nullopt;
        std::istringstream ls(line);
        std::string first;
        ls >> first;
        if (first == "quit") return std::nullopt;
        NodeId t = 0;
        try {
          t = std::stoul(first);
        } catch (const std::exception&) {
          out << "illegal: \"" << first << "\" is not a node id\n";
          continue;
        }
        if (std::find(nodes.begin(), nodes.end(), t) == nodes.end()) {
          out << "illegal: node " << t << " is not strictly above "
              << (node ? "node " + std::to_string(*node) : std::string("the start")) << "\n";
          continue;
        }
        std::string side;
        ls >> side;
        if (side != "L" && side != "R") {
          out << "illegal: side must be L or R\n";
          continue;
        }
        const Side s = side == "L" ? Side::Left : Side::Right;
        std::string err;
        auto e = read_element(ls, spec.side(s), err);
        if (!e) {
          out << "illegal: " << err << "\n";
          continue;
        }
        return ForallMove{t, s, *e};
      }
    };
    const Responder inner = exists;
    exists = [&, inner](std::optional<NodeId> node, const IndexPairs& pairs, const ForallMove& m) {
      auto r = inner(node, pairs, m);
      out << "exists answers " << spec.side(other(m.side)).carrier.at(*r).str() << "\n";
      return r;
    };
  } else {
    const Agent inner = solver_forall(spec, *oracle, res);
    forall = [&, inner](std::optional<NodeId> node, const IndexPairs& pairs) {
      auto m = inner(node, pairs);
      out << "forall plays node " << m->node << " side " << (m->side == Side::Left ? "L" : "R") << " element "
          << spec.side(m->side).carrier.at(m->element).str() << "\n";
      return m;
    };
    exists = [&](std::optional<NodeId>, const IndexPairs&, const ForallMove& m) -> std::optional<ElemIndex> {
      const Structure& target = spec.side(other(m.side));
      for (;;) {
        out << "your reply in " << (m.side == Side::Left ? "R" : "L") << ": <coefficients>, or quit\n";
        show_carrier(target);
        std::string line;
        if (!read_line(line)) return std::nullopt;
        std::istringstream ls(line);
        if (line.find("quit") != std::string::npos) return std::nullopt;
        std::string err;
        auto e = read_element(ls, target, err);
        if (e) return e;
        out << "illegal: " << err << "\n";
      }
    };
  }
  Transcript t = play_out(spec, *oracle, forall, exists);
  out << "verdict: " << t.verdict << " (" << t.detail << ")\n";
  return t;
}

}  // namespace efg
