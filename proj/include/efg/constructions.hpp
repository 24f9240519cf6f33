#pragma once

#include "efg/abgroup.hpp"
#include "efg/trees.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace efg {

struct ConstructionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class StageKind { Free, E0, E1 };
std::string to_string(StageKind k);
StageKind stage_kind_from(const std::string& s);

// The guess for an isomorphism G^0_delta -> G^1_delta at a special stage.
struct HGuess {
  enum class Kind { Identity, Family, Flip, Matrix };
  Kind kind = Kind::Identity;
  NodeId node = 0;              // Family: restriction of f_node
  std::size_t flip_stage = 0;   // Flip: w_{flip_stage,flip_index} goes to -v, other w to v
  std::size_t flip_index = 0;
  IntMatrix matrix;             // Matrix: rows are images of the stage basis
};

struct GuessScript {
  std::map<std::size_t, std::vector<std::vector<NodeId>>> w_nodes;  // gadget stage -> index-node set of each w_n
  std::map<std::size_t, HGuess> guesses;                            // chain stage -> h
};

struct BuildConfig {
  Tree index;
  std::vector<StageKind> plan;
  GuessScript script;
  std::size_t gadget_length = 1;  // u_0..u_M, v_0..v_{M-1}
  std::size_t chain_length = 2;   // z_0..z_N
  long d_bound = 5;
  std::size_t g_radius = 2;
};

struct WEntry {
  std::string name;
  std::size_t stage = 0;  // the gadget stage sigma; the entry exists from sigma+1 on
  std::size_t n = 0;
  std::vector<NodeId> nodes;
};

class WRegistry {
 public:
  const std::vector<WEntry>& entries() const { return entries_; }
  // entries with exactly this node set whose gadget stage is below alpha
  std::vector<WEntry> members(std::size_t alpha, std::vector<NodeId> nodes) const;
  void add(WEntry e) { entries_.push_back(std::move(e)); }

 private:
  std::vector<WEntry> entries_;
};

// w_{sigma,n} is filed under its node set; throws unless every set is a nonempty set of
// nodes below sigma and their union is an antichain of the index tree
WRegistry update_w_registry(const WRegistry& reg, std::size_t sigma, std::size_t length,
                            const std::vector<std::vector<NodeId>>& w_nodes, const Tree& index);

// smallest prime above floor that does not divide target
Int select_prime(const IntVector& target, const Int& floor);

// Data for choosing k with m*h(k) != m'*f(k) + y. Coordinates are those of the
// stage group on each side.
struct KContext {
  IntMatrix h;
  std::string x0_name, x1_name;
  IntVector x0, x1;    // x_{gamma+1,j} on the left
  IntVector fx0, fx1;  // their f-images on the right
  std::vector<std::string> w_names;
  std::vector<IntVector> w, fw;  // registered w and f(w) = v
};

struct KChoice {
  std::string label;       // e.g. "x_{2,0}+w_{1,0}"
  IntVector k;             // left coordinates
  IntVector fk;            // f(k), right coordinates
  std::string case_id;     // offset (y != 0), unequal, equal or opposite multipliers; "listed" otherwise
};

KChoice select_k(const KContext& ctx, const Int& m, const Int& mp, const IntVector& y);
// all x_j +- xi with xi in {0, x_{1-j}, w}
std::vector<KChoice> k_candidates(const KContext& ctx);

struct Triple {
  std::size_t r = 0;
  long d = 1;
  IntVector g;
  std::size_t ball_index = 0;
  std::string str() const;
};

struct ZChain {
  std::size_t stage = 0;
  std::size_t beta = 0;
  Ladder ladder;
  IntMatrix h;                                // R_delta x R_delta
  std::vector<std::vector<NodeId>> node_sets;    // per step n, the index nodes the chain answers to
  std::vector<KChoice> ks;
  std::vector<Int> primes;
  std::vector<Triple> triples;
  std::vector<std::optional<std::size_t>> blocked_at;  // bookkeeping of the build
  std::vector<std::size_t> zero_targets;               // per step, among pending triples
};

struct StageInfo {
  StageKind kind = StageKind::Free;
  std::size_t rank_before = 0;
  std::size_t rank_after = 0;
  bool guess_separates = false;  // the search for beta succeeded
  std::optional<std::size_t> chain;  // index into chains
};

class FiltrationBuild {
 public:
  FiltrationBuild(Tree index, std::vector<StageKind> plan);

  // stage steps, applied in order
  void free_step(std::size_t mu);
  void uv_gadget(std::size_t sigma, std::size_t length, const std::vector<std::vector<NodeId>>& w_nodes);
  void skip_stage(std::size_t delta, const IntMatrix& h);
  void z_chain(std::size_t delta, ZChain chain);

  std::size_t stages_done() const { return infos_.size(); }
  std::size_t stage_count() const { return plan_.size(); }
  const std::vector<StageKind>& plan() const { return plan_; }
  const Tree& index() const { return index_; }
  std::vector<bool> special() const;  // stages labelled E0 or E1

  std::size_t rank() const { return basis_.size(); }
  std::size_t stage_rank(std::size_t mu) const;  // rank of G_mu, mu = 0..stages_done
  std::size_t stage_of_coordinate(std::size_t i) const { return basis_stage_.at(i); }

  const std::vector<std::string>& generator_names() const { return names_; }
  std::size_t generator_stage(std::size_t g) const { return gen_stage_.at(g); }
  std::optional<std::size_t> generator_index(const std::string& name) const;
  // (chain index, n) for z_{delta,n}
  std::optional<std::pair<std::size_t, std::size_t>> chain_position(std::size_t g) const;
  // coordinates of a named element (generators and w_{sigma,n}); padded to `width` (default: rank())
  IntVector coords(int side, const std::string& name, std::optional<std::size_t> width = std::nullopt) const;
  IntVector generator_coords(int side, std::size_t g, std::optional<std::size_t> width = std::nullopt) const;

  // Z^generators modulo relations, for generators of stages below `upto` (default: all)
  Presentation presentation(int side, std::optional<std::size_t> upto = std::nullopt) const;
  IntMatrix coordinate_map(int side, std::optional<std::size_t> upto = std::nullopt) const;  // generators -> coordinates
  Presentation group() const { return Presentation::free(rank()); }

  const WRegistry& registry() const { return registry_; }
  const std::vector<StageInfo>& stages() const { return infos_; }
  const std::vector<ZChain>& chains() const { return chains_; }
  std::size_t gadget_length(std::size_t sigma) const;
  std::size_t chain_length() const { return chain_len_; }

  // the f-family: f_nu for an index node, on G_{min(nu+1, stages)}
  std::size_t family_top(NodeId nu) const;
  IntMatrix family_map(NodeId nu) const;
  // f_nu rebuilt generator by generator, z's by the downward recurrence; a homomorphism of presentations
  Homomorphism family_on_generators(NodeId nu) const;
  // the scripted guess at a chain stage as a matrix on G_delta; throws unless invertible
  IntMatrix guess_matrix(std::size_t delta, const HGuess& g) const;

  // the part of the gadget at sigma that f_nu turns into w -> v, or -1
  long cut_index(std::size_t sigma, NodeId nu) const;

 private:
  void check_next(std::size_t mu, StageKind kind) const;
  std::size_t add_generator(const std::string& name, std::size_t stage, bool basis);

  Tree index_;
  std::vector<StageKind> plan_;
  std::vector<StageInfo> infos_;
  std::vector<std::string> names_;
  std::vector<std::size_t> gen_stage_;
  std::map<std::string, std::size_t> by_name_;
  std::vector<std::size_t> basis_;        // coordinate -> generator
  std::vector<std::size_t> basis_stage_;  // coordinate -> stage
  std::vector<IntVector> gen_coords_[2];  // generator -> coordinates (unpadded)
  std::vector<std::map<std::size_t, Int>> relations_[2];
  std::vector<std::size_t> relation_stage_;
  std::map<std::size_t, std::size_t> gadget_len_;
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> zpos_;
  std::size_t chain_len_ = 0;
  WRegistry registry_;
  std::vector<ZChain> chains_;

  friend FiltrationBuild build_truncated_pair(const BuildConfig& cfg);
};

// the gadget map on u_0..u_M, v_0..v_{M-1}: w_n -> sign_n v_n for n <= cut, u_n fixed above cut
IntMatrix gadget_block(std::size_t length, long cut, const std::vector<int>& signs = {});

// standalone gadget over a free base: generators base..., u_0..u_M, v_0..v_{M-1}
struct Gadget {
  Presentation group;
  std::size_t offset = 0;
  std::size_t length = 0;
  GroupElement u(std::size_t n) const;
  GroupElement v(std::size_t n) const;
  GroupElement w(std::size_t n) const;
  Subgroup w_span(std::size_t count) const;
};
Gadget make_gadget(std::size_t base_rank, std::size_t length);
// h on the gadget block of a standalone gadget, as a homomorphism of the gadget group to itself
Homomorphism gadget_iso(const Gadget& g, long cut);

// standalone chain: adjoin z_0..z_N to base with p_n z_{n+1} = z_n + k_n
Presentation z_chain(const Presentation& base, const std::vector<GroupElement>& ks, const std::vector<Int>& primes);

// p-multiples d_{n,j} = p_n ... p_{j-1}
Int chain_product(const std::vector<Int>& primes, std::size_t from, std::size_t to);
// -(sum_{j >= n} d_{n,j} k_j) for projected k's (zero vectors where k_j projects to 0)
IntVector z_projection(const std::vector<Int>& primes, std::size_t n, const std::vector<IntVector>& projected_k);

FiltrationBuild build_truncated_pair(const BuildConfig& cfg);

// the least beta for which a chain against the guess h can be installed at stage delta, if any
std::optional<std::size_t> separating_beta(const FiltrationBuild& b, std::size_t delta, const IntMatrix& h);

struct ObstructionResult {
  bool blocked = false;
  std::optional<std::size_t> step;  // the n with p_n not dividing the target
};

// target_n = m h(k_n) - m' f(k_n) + y for n in [r, N)
IntVector obstruction_target(const ZChain& c, const IntMatrix& h, const Triple& t, std::size_t n);
ObstructionResult extension_obstruction(const ZChain& c, const IntMatrix& h, const Triple& t);
// direct test: some extension H of h has H(z_0) = d z_r + g
bool extension_exists(const FiltrationBuild& b, std::size_t chain, const IntMatrix& h, const Triple& t);

// z images under the extension of g (coordinates on side 1, width rank of G_{delta+1})
std::vector<IntVector> extend_over_zchain(const FiltrationBuild& b, std::size_t chain, const IntMatrix& g,
                                          std::size_t from);
// least N' with g(k_n) = f(k_n) for all n >= N'
std::size_t agreement_start(const FiltrationBuild& b, std::size_t chain, const IntMatrix& g);

struct ProjectionSystem {
  // pi[side][nu]: rank x rank, row action, zero outside the first stage_rank(nu) coordinates
  std::vector<IntMatrix> pi[2];
  // the same maps built generator by generator from the stage rules
  std::vector<IntMatrix> on_generators[2];
  Subgroup kernel(int side, std::size_t nu, const FiltrationBuild& b) const;
  Subgroup kernel_step(int side, std::size_t nu, const FiltrationBuild& b) const;  // K_nu inside G_{nu+1}
};

ProjectionSystem build_projections(const FiltrationBuild& b);

struct ProjectionCheck {
  bool identity_on_stage = true;
  bool nested = true;
  bool coherent = true;
  bool rules_match = true;
  bool homomorphisms = true;
  bool all() const { return identity_on_stage && nested && coherent && rules_match && homomorphisms; }
};
ProjectionCheck check_projections(const FiltrationBuild& b, const ProjectionSystem& p);

// registered generators Y_delta: z_n with the gadget blocks of its projections removed
std::vector<IntVector> registered_y(const FiltrationBuild& b, std::size_t chain, int side);
std::vector<IntVector> raw_z(const FiltrationBuild& b, std::size_t chain, int side);

struct StandardFormReport {
  bool coherent = true;
  bool ladder_sums = true;
  bool generates = true;
  std::size_t checks = 0;
  std::vector<std::string> failures;
  bool ok() const { return coherent && ladder_sums && generates; }
};

// projection of y onto G_nu equals the sum of its ladder-step differences, for every y,
// every ladder given and every allowed nu below the chain stage.
// Throws TreeError for an invalid ladder.
StandardFormReport check_standard_form(const FiltrationBuild& b, const ProjectionSystem& p, int side,
                                       std::size_t chain, const std::vector<Ladder>& ladders,
                                       const std::vector<IntVector>& ys);

// registry and family conditions on a finished build
struct FamilyCheck {
  bool registry_monotone = true;
  bool registry_w_forms = true;
  bool x_fixed = true;
  bool w_to_v = true;
  bool coherent = true;
  bool isomorphisms = true;
  bool matches_generators = true;
  std::vector<std::string> failures;
  bool all() const {
    return registry_monotone && registry_w_forms && x_fixed && w_to_v && coherent && isomorphisms && matches_generators;
  }
};
FamilyCheck check_family(const FiltrationBuild& b);

// integer vectors of L1 norm at most radius, by norm then in enumeration order
std::vector<IntVector> l1_ball(std::size_t dim, std::size_t radius);

}  // namespace efg
