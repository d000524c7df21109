#pragma once

// Correlative sparsity (cliques over the p-indices, extended to q, p and
// multipliers) and term sparsity (block structure of each moment or
// localizing matrix).

#include <optional>
#include <set>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cpop/bilevel.hpp"
#include "cpop/poly.hpp"

namespace cpop {

class UGraph {
 public:
  UGraph() = default;
  explicit UGraph(int n) : adj_(static_cast<std::size_t>(n)) {}

  int size() const { return static_cast<int>(adj_.size()); }
  void add_edge(int a, int b);
  bool has_edge(int a, int b) const { return adj_[a].count(b) > 0; }
  const std::set<int>& neighbors(int v) const { return adj_[v]; }
  std::size_t edge_count() const;
  std::vector<std::vector<int>> components() const;

 private:
  std::vector<std::set<int>> adj_;
};

// One constraint as the relaxation sees it. Acyclicity inequalities are
// sums of nonnegative walk products on the box, so they are split into
// their variable-disjoint parts (each part must vanish on its own).
struct RelaxConstraint {
  Polynomial poly;
  bool equality = false;
  // Index into pop.ineqs (inequality) or pop.all_eqs() (equality).
  std::size_t origin = 0;
  // Couples every multiplier; imposed with multipliers over the variables
  // shared by all cliques instead of forcing a single clique.
  bool shared = false;
};

std::vector<RelaxConstraint> relaxation_constraints(const SingleLevelPOP& pop);

UGraph build_csp(const SingleLevelPOP& pop);

struct ChordalResult {
  UGraph graph;
  std::vector<int> elimination_order;
  std::size_t fill_edges = 0;
};
// Greedy minimum-degree elimination; ties go to the lowest index.
ChordalResult chordal_extend(const UGraph& g);

// A perfect elimination ordering by maximum cardinality search, or nullopt
// when the graph is not chordal.
std::optional<std::vector<int>> perfect_elimination_order(const UGraph& g);
bool is_chordal(const UGraph& g);

// Maximal cliques of a chordal graph, each sorted, listed in order of their
// smallest member. Throws InvalidInput on non-chordal input.
std::vector<std::vector<int>> max_cliques(const UGraph& chordal);

struct CliqueSet {
  std::vector<std::vector<int>> cliques;          // p-indices
  std::vector<std::vector<VarIndex>> extended;    // x-hat indices, sorted
  std::vector<RelaxConstraint> constraints;
  std::vector<int> assignment;                    // clique per constraint, -1 if shared
  std::vector<std::vector<std::size_t>> partition;  // constraint ids per clique
  std::vector<VarIndex> common_vars;              // in every extended clique

  nlohmann::json to_json() const;
};

// Extends each clique to {q_e, p_e, lambda_e : e in C} + {lambda_0} and
// assigns each constraint to the lowest-index clique containing its
// variables. Throws CoverageError naming the first constraint that fits
// no clique.
CliqueSet extend_and_assign(const std::vector<std::vector<int>>& cliques, const SingleLevelPOP& pop);

// Full clique pipeline with merge-and-retry on coverage failures.
CliqueSet generate_cliques(const SingleLevelPOP& pop);
// Single clique holding every variable (dense relaxation).
CliqueSet single_clique(const SingleLevelPOP& pop);

using MonomialSet = std::set<Monomial, GrlexLess>;

struct TspGraph {
  std::vector<Monomial> basis;
  Eigen::MatrixXi B;                    // symmetric 0/1, unit diagonal
  std::vector<std::vector<int>> blocks;  // connected components, completed to cliques
};

// Term-sparsity graph over the degree-`order` basis of `vars`. Without a
// constraint an edge (a, b) exists when basis[a] + basis[b] lies in the
// support set or is even; with a constraint g the test is on
// alpha + basis[a] + basis[b] for some alpha in supp(g). One support
// extension round follows, then each component is completed to a clique.
TspGraph build_tsp(const std::vector<VarIndex>& vars, int order, const Polynomial* constraint,
                   const MonomialSet& support);
// All-ones mask (no term sparsity).
TspGraph dense_tsp(const std::vector<VarIndex>& vars, int order);

}  // namespace cpop
