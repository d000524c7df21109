#include "cpop/bilevel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "cpop/error.hpp"

namespace cpop {

namespace {

// Entry of a walk matrix whose block arcs are symbols: coefficient per
// (forward uses, backward uses).
using WalkEntry = std::map<std::pair<int, int>, double>;

// Exponent pairs (s, t) != (0, 0) of closed walks of length 2..k_max
// through the block pair e, with positive weight under the fixed pairs.
std::set<std::pair<int, int>> walk_classes(const BilevelProblem& bp, std::size_t e,
                                           std::span<const double> x) {
  const EdgeIndexMap map(bp.nodes);
  const VarLayout lay{bp.dbar};
  const int D = bp.nodes;
  std::vector<std::vector<WalkEntry>> A(D, std::vector<WalkEntry>(D));
  for (std::size_t f = 0; f < bp.dbar; ++f) {
    const auto [i, j] = map.pair(f);
    if (f == e) {
      A[i][j][{1, 0}] = 1.0;
      A[j][i][{0, 1}] = 1.0;
      continue;
    }
    const double p2 = x[lay.p(f)] * x[lay.p(f)];
    const double q = x[lay.q(f)];
    if (p2 * q > 0.0) A[i][j][{0, 0}] = p2 * q;
    if (p2 * (1.0 - q) > 0.0) A[j][i][{0, 0}] = p2 * (1.0 - q);
  }
  std::set<std::pair<int, int>> classes;
  auto power = A;
  for (int k = 2; k <= bp.k_max; ++k) {
    std::vector<std::vector<WalkEntry>> next(D, std::vector<WalkEntry>(D));
    for (int i = 0; i < D; ++i)
      for (int m = 0; m < D; ++m) {
        if (power[i][m].empty()) continue;
        for (int j = 0; j < D; ++j)
          for (const auto& [u, cu] : power[i][m])
            for (const auto& [v, cv] : A[m][j]) next[i][j][{u.first + v.first, u.second + v.second}] += cu * cv;
      }
    power = std::move(next);
    for (int i = 0; i < D; ++i)
      for (const auto& [st, c] : power[i][i])
        if (c > 0.0 && st != std::pair<int, int>{0, 0}) classes.insert(st);
  }
  return classes;
}

}  // namespace

Polynomial lower_box_poly(std::size_t nvars, VarIndex p) {
  Polynomial g(nvars);
  g.add_term(Monomial::variable(p, 2), -1.0);
  g.add_term(Monomial::variable(p, 4), 1.0);
  return g;
}

BilevelProblem build_bilevel(const Dataset& ds, const ScoreConfig& cfg, const EdgeIndexMap& map,
                             int k_max, const FeatureMap& features) {
  ds.validate();
  if (map.nodes() != ds.nodes()) throw InvalidInput("edge map and dataset disagree on D");
  if (map.size() == 0) throw InvalidInput("need at least two nodes");
  BilevelProblem bp;
  bp.dbar = map.size();
  const std::size_t n = bp.nvars();
  const VarLayout lay{bp.dbar};
  bp.F = upper_objective(ds, cfg, map, features, n);
  bp.G = lower_objective(ds, cfg, map, features, n);
  bp.upper_ineqs = acyclicity_polys(map, std::min(k_max, map.nodes()), n);
  bp.n_acyclic = bp.upper_ineqs.size();
  bp.nodes = map.nodes();
  bp.k_max = std::min(k_max, map.nodes());
  for (std::size_t e = 0; e < bp.dbar; ++e) {
    // -q(1-q) <= 0 keeps q in [0, 1]
    Polynomial box(n);
    box.add_term(Monomial::variable(lay.q(e)), -1.0);
    box.add_term(Monomial::variable(lay.q(e), 2), 1.0);
    bp.upper_ineqs.push_back(std::move(box));
  }
  for (std::size_t e = 0; e < bp.dbar; ++e) bp.lower_ineqs.push_back(lower_box_poly(n, lay.p(e)));
  return bp;
}

BilevelProblem restrict_to_pair(const BilevelProblem& bp, std::size_t e, std::span<const double> x) {
  if (e >= bp.dbar) throw InvalidInput("restrict_to_pair: pair index out of range");
  if (x.size() < bp.nvars()) throw InvalidInput("restrict_to_pair: state too short");
  const VarLayout lay{bp.dbar};
  std::vector<bool> fixed(bp.nvars(), true);
  fixed[lay.q(e)] = false;
  fixed[lay.p(e)] = false;
  std::vector<std::int64_t> mapping(bp.nvars(), -1);
  mapping[lay.q(e)] = 0;
  mapping[lay.p(e)] = 1;
  auto restrict = [&](const Polynomial& f) { return f.substitute(fixed, x).reindex(mapping, 2); };

  BilevelProblem out;
  out.dbar = 1;
  out.nodes = 2;
  out.k_max = 2;
  out.F = restrict(bp.F);
  out.G = restrict(bp.G);
  for (const auto& [s, t] : walk_classes(bp, e, x)) {
    const Polynomial q = Polynomial::variable(2, 0);
    const Polynomial p2 = Polynomial::monomial(2, Monomial::variable(1, 2));
    const Polynomial fwd = p2 * q, bwd = p2 - fwd;
    out.upper_ineqs.push_back(fwd.pow(s) * bwd.pow(t));
  }
  out.n_acyclic = out.upper_ineqs.size();
  // Box of this pair only; the other boxes are constants.
  out.upper_ineqs.push_back(restrict(bp.upper_ineqs[bp.n_acyclic + e]));
  out.lower_ineqs.push_back(restrict(bp.lower_ineqs[e]));
  return out;
}

ConstraintKind SingleLevelPOP::ineq_kind(std::size_t k) const {
  if (k < I) return ConstraintKind::Upper;
  if (k < I + J + 1) return ConstraintKind::Multiplier;
  return ConstraintKind::LowerBox;
}

std::vector<Polynomial> SingleLevelPOP::all_eqs() const {
  std::vector<Polynomial> out = eqs;
  if (normalization) out.push_back(*normalization);
  return out;
}

nlohmann::json SingleLevelPOP::to_json() const {
  nlohmann::json j;
  j["dbar"] = dbar;
  j["nvars"] = nvars();
  j["I"] = I;
  j["J"] = J;
  j["objective"] = objective.to_json();
  j["ineqs"] = nlohmann::json::array();
  for (const auto& f : ineqs) j["ineqs"].push_back(f.to_json());
  j["eqs"] = nlohmann::json::array();
  for (const auto& g : eqs) j["eqs"].push_back(g.to_json());
  if (normalization) j["normalization"] = normalization->to_json();
  return j;
}

SingleLevelPOP kkt_reformulate(const BilevelProblem& bp, MultiplierNormalization norm) {
  SingleLevelPOP pop;
  pop.dbar = bp.dbar;
  pop.I = bp.I();
  pop.n_acyclic = bp.n_acyclic;
  pop.J = bp.J();
  if (pop.J != bp.dbar) throw InvalidInput("kkt_reformulate: expected one lower constraint per pair");
  const std::size_t n = pop.nvars();
  const VarLayout lay{bp.dbar};
  pop.objective = bp.F.widen(n);
  pop.G = bp.G.widen(n);
  for (const auto& g : bp.lower_ineqs) pop.lower_ineqs.push_back(g.widen(n));

  for (const auto& f : bp.upper_ineqs) pop.ineqs.push_back(-f.widen(n));
  for (std::size_t k = 0; k <= pop.J; ++k) pop.ineqs.push_back(Polynomial::variable(n, lay.lambda(k)));
  for (const auto& g : pop.lower_ineqs) pop.ineqs.push_back(-g);

  const Polynomial lambda0 = Polynomial::variable(n, lay.lambda(0));
  for (std::size_t e = 0; e < bp.dbar; ++e) {
    const Polynomial lam = Polynomial::variable(n, lay.lambda(e + 1));
    // g_j touches only p_j, so the cross terms of the gradient vanish.
    pop.eqs.push_back(lambda0 * pop.G.grad(lay.p(e)) + lam * pop.lower_ineqs[e].grad(lay.p(e)));
  }
  for (std::size_t j = 0; j < pop.J; ++j) {
    pop.eqs.push_back(Polynomial::variable(n, lay.lambda(j + 1)) * pop.lower_ineqs[j]);
  }
  if (norm == MultiplierNormalization::Sphere) {
    Polynomial s = Polynomial::constant(n, -1.0);
    for (std::size_t k = 0; k <= pop.J; ++k) s.add_term(Monomial::variable(lay.lambda(k), 2), 1.0);
    pop.normalization = std::move(s);
  }
  return pop;
}

double KktResidual::max() const {
  return std::max({stationarity, complementarity, sign, inequality, normalization});
}

nlohmann::json KktResidual::to_json() const {
  return {{"stationarity", stationarity}, {"complementarity", complementarity}, {"sign", sign},
          {"inequality", inequality},     {"normalization", normalization},     {"max", max()}};
}

KktResidual verify_kkt(const SingleLevelPOP& pop, std::span<const double> x) {
  if (x.size() != pop.nvars()) throw InvalidInput("verify_kkt: point dimension mismatch");
  KktResidual r;
  for (std::size_t k = 0; k < pop.dbar; ++k) {
    r.stationarity = std::max(r.stationarity, std::abs(pop.eqs[k].evaluate(x)));
  }
  for (std::size_t k = pop.dbar; k < pop.eqs.size(); ++k) {
    r.complementarity = std::max(r.complementarity, std::abs(pop.eqs[k].evaluate(x)));
  }
  for (std::size_t k = 0; k < pop.ineqs.size(); ++k) {
    const double viol = std::max(0.0, -pop.ineqs[k].evaluate(x));
    if (pop.ineq_kind(k) == ConstraintKind::Upper) {
      r.inequality = std::max(r.inequality, viol);
    } else {
      r.sign = std::max(r.sign, viol);
    }
  }
  if (pop.normalization) r.normalization = std::abs(pop.normalization->evaluate(x));
  return r;
}

std::vector<double> recover_multipliers(const SingleLevelPOP& pop, std::span<const double> q,
                                        std::span<const double> p, double active_tol) {
  const std::size_t dbar = pop.dbar;
  if (q.size() != dbar || p.size() != dbar) throw InvalidInput("recover_multipliers: size mismatch");
  const VarLayout lay{dbar};
  std::vector<double> x(pop.nvars(), 0.0);
  for (std::size_t e = 0; e < dbar; ++e) {
    x[lay.q(e)] = q[e];
    x[lay.p(e)] = p[e];
  }
  const bool sphere = pop.normalization.has_value();

  auto with_lambda = [&](const std::vector<double>& lam) {
    std::vector<double> z = x;
    for (std::size_t k = 0; k < lam.size(); ++k) z[lay.lambda(k)] = lam[k];
    return z;
  };

  // lambda_0 > 0: lambda_j = a_j lambda_0 on active constraints.
  std::vector<double> a(pop.J, 0.0);
  for (std::size_t j = 0; j < pop.J; ++j) {
    const double gj = pop.lower_ineqs[j].evaluate(x);
    const double dg = pop.lower_ineqs[j].grad(lay.p(j)).evaluate(x);
    const double dG = pop.G.grad(lay.p(j)).evaluate(x);
    if (std::abs(gj) <= active_tol && std::abs(dg) > 1e-12) a[j] = std::max(0.0, -dG / dg);
  }
  double s = 1.0;
  for (double v : a) s += v * v;
  const double l0 = sphere ? 1.0 / std::sqrt(s) : 1.0;
  std::vector<double> branch_a(pop.J + 1);
  branch_a[0] = l0;
  for (std::size_t j = 0; j < pop.J; ++j) branch_a[j + 1] = a[j] * l0;

  // lambda_0 = 0: only pairs with p_j = 0 may carry weight.
  std::vector<double> branch_b(pop.J + 1, 0.0);
  std::size_t zeros = 0;
  for (std::size_t j = 0; j < pop.J; ++j)
    if (std::abs(p[j]) <= active_tol) ++zeros;
  if (zeros > 0) {
    const double w = sphere ? 1.0 / std::sqrt(static_cast<double>(zeros)) : 1.0;
    for (std::size_t j = 0; j < pop.J; ++j)
      if (std::abs(p[j]) <= active_tol) branch_b[j + 1] = w;
  }

  const double ra = verify_kkt(pop, with_lambda(branch_a)).max();
  if (zeros == 0) return branch_a;
  const double rb = verify_kkt(pop, with_lambda(branch_b)).max();
  return rb < ra ? branch_b : branch_a;
}

}  // namespace cpop
