#include "cpop/sparsity.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <queue>

#include "cpop/error.hpp"

namespace cpop {

void UGraph::add_edge(int a, int b) {
  if (a == b) return;
  adj_[a].insert(b);
  adj_[b].insert(a);
}

std::size_t UGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& s : adj_) n += s.size();
  return n / 2;
}

std::vector<std::vector<int>> UGraph::components() const {
  std::vector<int> seen(adj_.size(), 0);
  std::vector<std::vector<int>> out;
  for (int s = 0; s < size(); ++s) {
    if (seen[s]) continue;
    std::vector<int> comp;
    std::queue<int> todo;
    todo.push(s);
    seen[s] = 1;
    while (!todo.empty()) {
      const int u = todo.front();
      todo.pop();
      comp.push_back(u);
      for (int v : adj_[u])
        if (!seen[v]) {
          seen[v] = 1;
          todo.push(v);
        }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

namespace {

// Pair index owning a variable of x-hat, or -1 for lambda_0.
int pair_of(VarIndex v, std::size_t dbar) {
  if (v < 2 * dbar) return static_cast<int>(v % dbar);
  if (v == 2 * dbar) return -1;
  return static_cast<int>(v - 2 * dbar - 1);
}

std::vector<int> pairs_in(const Polynomial& f, std::size_t dbar) {
  std::vector<int> out;
  for (VarIndex v : f.variables()) {
    const int e = pair_of(v, dbar);
    if (e >= 0) out.push_back(e);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Splits f into parts whose terms share no variable.
std::vector<Polynomial> separable_parts(const Polynomial& f) {
  const auto support = f.support();
  std::vector<int> parent(support.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); };
  std::map<VarIndex, int> owner;
  for (std::size_t t = 0; t < support.size(); ++t) {
    for (const auto& [v, pw] : support[t].entries()) {
      auto [it, inserted] = owner.try_emplace(v, static_cast<int>(t));
      if (!inserted) parent[find(static_cast<int>(t))] = find(it->second);
    }
  }
  std::map<int, Polynomial> parts;
  for (std::size_t t = 0; t < support.size(); ++t) {
    const int r = find(static_cast<int>(t));
    auto [it, inserted] = parts.try_emplace(r, Polynomial(f.nvars()));
    it->second.add_term(support[t], f.coefficient(support[t]));
  }
  std::vector<Polynomial> out;
  for (auto& [r, p] : parts) out.push_back(std::move(p));
  return out;
}

}  // namespace

std::vector<RelaxConstraint> relaxation_constraints(const SingleLevelPOP& pop) {
  std::vector<RelaxConstraint> out;
  for (std::size_t k = 0; k < pop.ineqs.size(); ++k) {
    if (k < pop.n_acyclic) {
      for (auto& part : separable_parts(pop.ineqs[k])) out.push_back({std::move(part), false, k, false});
    } else {
      out.push_back({pop.ineqs[k], false, k, false});
    }
  }
  const auto eqs = pop.all_eqs();
  for (std::size_t k = 0; k < eqs.size(); ++k) {
    const bool shared = pop.normalization && k + 1 == eqs.size();
    out.push_back({eqs[k], true, k, shared});
  }
  return out;
}

UGraph build_csp(const SingleLevelPOP& pop) {
  const std::size_t dbar = pop.dbar;
  UGraph g(static_cast<int>(dbar));
  auto connect = [&](const std::vector<int>& ps) {
    for (std::size_t a = 0; a < ps.size(); ++a)
      for (std::size_t b = a + 1; b < ps.size(); ++b) g.add_edge(ps[a], ps[b]);
  };
  // co-support inside one monomial of F
  for (const auto& [m, c] : pop.objective.terms()) {
    std::vector<int> ps;
    for (const auto& [v, pw] : m.entries()) {
      const int e = pair_of(v, dbar);
      if (e >= 0) ps.push_back(e);
    }
    std::sort(ps.begin(), ps.end());
    ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
    connect(ps);
  }
  // co-occurrence inside one constraint
  for (const auto& rc : relaxation_constraints(pop)) {
    if (rc.shared) continue;
    connect(pairs_in(rc.poly, dbar));
  }
  return g;
}

ChordalResult chordal_extend(const UGraph& g) {
  const int n = g.size();
  ChordalResult res;
  res.graph = g;
  std::vector<std::set<int>> work(n);
  for (int v = 0; v < n; ++v) work[v] = g.neighbors(v);
  std::vector<char> gone(n, 0);
  for (int step = 0; step < n; ++step) {
    int best = -1;
    for (int v = 0; v < n; ++v) {
      if (gone[v]) continue;
      if (best < 0 || work[v].size() < work[best].size()) best = v;
    }
    const std::vector<int> nb(work[best].begin(), work[best].end());
    for (std::size_t a = 0; a < nb.size(); ++a)
      for (std::size_t b = a + 1; b < nb.size(); ++b) {
        if (!work[nb[a]].count(nb[b])) {
          work[nb[a]].insert(nb[b]);
          work[nb[b]].insert(nb[a]);
          res.graph.add_edge(nb[a], nb[b]);
          ++res.fill_edges;
        }
      }
    for (int u : nb) work[u].erase(best);
    work[best].clear();
    gone[best] = 1;
    res.elimination_order.push_back(best);
  }
  return res;
}

std::optional<std::vector<int>> perfect_elimination_order(const UGraph& g) {
  const int n = g.size();
  std::vector<int> weight(n, 0), pos(n, -1);
  std::vector<int> order(n);
  // Maximum cardinality search numbers vertices n-1 .. 0; the numbering is
  // a perfect elimination order iff the graph is chordal.
  for (int i = n - 1; i >= 0; --i) {
    int best = -1;
    for (int v = 0; v < n; ++v) {
      if (pos[v] >= 0) continue;
      if (best < 0 || weight[v] > weight[best]) best = v;
    }
    pos[best] = i;
    order[i] = best;
    for (int u : g.neighbors(best))
      if (pos[u] < 0) ++weight[u];
  }
  for (int i = 0; i < n; ++i) {
    const int v = order[i];
    std::vector<int> later;
    for (int u : g.neighbors(v))
      if (pos[u] > i) later.push_back(u);
    if (later.empty()) continue;
    const int parent = *std::min_element(later.begin(), later.end(),
                                         [&](int a, int b) { return pos[a] < pos[b]; });
    for (int u : later)
      if (u != parent && !g.has_edge(parent, u)) return std::nullopt;
  }
  return order;
}

bool is_chordal(const UGraph& g) { return perfect_elimination_order(g).has_value(); }

std::vector<std::vector<int>> max_cliques(const UGraph& chordal) {
  const auto peo = perfect_elimination_order(chordal);
  if (!peo) throw InvalidInput("max_cliques: graph is not chordal");
  const int n = chordal.size();
  std::vector<int> pos(n);
  for (int i = 0; i < n; ++i) pos[(*peo)[i]] = i;
  std::vector<std::vector<int>> cand;
  for (int i = 0; i < n; ++i) {
    const int v = (*peo)[i];
    std::vector<int> c{v};
    for (int u : chordal.neighbors(v))
      if (pos[u] > i) c.push_back(u);
    std::sort(c.begin(), c.end());
    cand.push_back(std::move(c));
  }
  std::vector<std::vector<int>> out;
  for (std::size_t a = 0; a < cand.size(); ++a) {
    bool dominated = false;
    for (std::size_t b = 0; b < cand.size() && !dominated; ++b) {
      if (a == b || cand[b].size() < cand[a].size()) continue;
      if (cand[b].size() == cand[a].size() && (cand[b] != cand[a] || b > a)) continue;
      dominated = std::includes(cand[b].begin(), cand[b].end(), cand[a].begin(), cand[a].end());
    }
    if (!dominated) out.push_back(cand[a]);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

CliqueSet extend_and_assign(const std::vector<std::vector<int>>& cliques, const SingleLevelPOP& pop) {
  const VarLayout lay{pop.dbar};
  CliqueSet cs;
  cs.cliques = cliques;
  for (const auto& c : cliques) {
    std::vector<VarIndex> ext{lay.lambda(0)};
    for (int e : c) {
      ext.push_back(lay.q(e));
      ext.push_back(lay.p(e));
      ext.push_back(lay.lambda(e + 1));
    }
    std::sort(ext.begin(), ext.end());
    cs.extended.push_back(std::move(ext));
  }
  if (!cs.extended.empty()) {
    cs.common_vars = cs.extended.front();
    for (const auto& ext : cs.extended) {
      std::vector<VarIndex> tmp;
      std::set_intersection(cs.common_vars.begin(), cs.common_vars.end(), ext.begin(), ext.end(),
                            std::back_inserter(tmp));
      cs.common_vars = std::move(tmp);
    }
  }
  cs.constraints = relaxation_constraints(pop);
  cs.partition.assign(cliques.size(), {});
  for (std::size_t k = 0; k < cs.constraints.size(); ++k) {
    const auto& rc = cs.constraints[k];
    if (rc.shared) {
      cs.assignment.push_back(-1);
      continue;
    }
    const auto vars = rc.poly.variables();
    int home = -1;
    for (std::size_t l = 0; l < cs.extended.size() && home < 0; ++l) {
      if (std::includes(cs.extended[l].begin(), cs.extended[l].end(), vars.begin(), vars.end())) {
        home = static_cast<int>(l);
      }
    }
    if (home < 0) {
      throw CoverageError("constraint " + std::to_string(k) + " fits no clique", k);
    }
    cs.assignment.push_back(home);
    cs.partition[home].push_back(k);
  }
  return cs;
}

CliqueSet generate_cliques(const SingleLevelPOP& pop) {
  auto cliques = max_cliques(chordal_extend(build_csp(pop)).graph);
  const auto constraints = relaxation_constraints(pop);
  for (;;) {
    try {
      return extend_and_assign(cliques, pop);
    } catch (const CoverageError& err) {
      const auto need = pairs_in(constraints[err.constraint()].poly, pop.dbar);
      std::vector<int> merged;
      std::vector<std::vector<int>> rest;
      for (auto& c : cliques) {
        std::vector<int> common;
        std::set_intersection(c.begin(), c.end(), need.begin(), need.end(),
                              std::back_inserter(common));
        if (common.empty()) {
          rest.push_back(std::move(c));
        } else {
          merged.insert(merged.end(), c.begin(), c.end());
        }
      }
      merged.insert(merged.end(), need.begin(), need.end());
      std::sort(merged.begin(), merged.end());
      merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
      rest.push_back(std::move(merged));
      std::sort(rest.begin(), rest.end());
      cliques = std::move(rest);
    }
  }
}

CliqueSet single_clique(const SingleLevelPOP& pop) {
  std::vector<int> all(pop.dbar);
  std::iota(all.begin(), all.end(), 0);
  return extend_and_assign({all}, pop);
}

nlohmann::json CliqueSet::to_json() const {
  nlohmann::json j;
  j["cliques"] = cliques;
  j["extended_sizes"] = nlohmann::json::array();
  for (const auto& e : extended) j["extended_sizes"].push_back(e.size());
  j["assignment"] = assignment;
  j["constraint_count"] = constraints.size();
  return j;
}

namespace {

TspGraph finish_tsp(std::vector<Monomial> basis, const Eigen::MatrixXi& adj) {
  const int n = static_cast<int>(basis.size());
  UGraph g(n);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (adj(a, b)) g.add_edge(a, b);
  TspGraph t;
  t.basis = std::move(basis);
  t.blocks = g.components();
  t.B = Eigen::MatrixXi::Zero(n, n);
  for (const auto& comp : t.blocks)
    for (int a : comp)
      for (int b : comp) t.B(a, b) = 1;
  return t;
}

}  // namespace

TspGraph build_tsp(const std::vector<VarIndex>& vars, int order, const Polynomial* constraint,
                   const MonomialSet& support) {
  auto basis = make_basis(vars, order);
  const int n = static_cast<int>(basis.size());
  const std::vector<Monomial> shifts =
      constraint ? constraint->support() : std::vector<Monomial>{Monomial{}};
  MonomialSet allowed = support;
  auto admissible = [&](const Monomial& m) { return m.is_even() || allowed.count(m) > 0; };
  auto edges = [&]() {
    Eigen::MatrixXi adj = Eigen::MatrixXi::Identity(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        const Monomial ab = basis[a] * basis[b];
        for (const auto& s : shifts)
          if (admissible(s * ab)) {
            adj(a, b) = adj(b, a) = 1;
            break;
          }
      }
    return adj;
  };
  Eigen::MatrixXi adj = edges();
  // support extension: products realised by current edges become admissible
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b)
      if (adj(a, b))
        for (const auto& s : shifts) allowed.insert(s * basis[a] * basis[b]);
  adj = edges();
  return finish_tsp(std::move(basis), adj);
}

TspGraph dense_tsp(const std::vector<VarIndex>& vars, int order) {
  auto basis = make_basis(vars, order);
  const int n = static_cast<int>(basis.size());
  return finish_tsp(std::move(basis), Eigen::MatrixXi::Ones(n, n));
}

}  // namespace cpop
