#include "cpop/learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "cpop/error.hpp"
#include "cpop/sparsity.hpp"

namespace cpop {

namespace {

int severity(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return 0;
    case SolveStatus::MaxIterations: return 1;
    case SolveStatus::NumericalTrouble: return 2;
    case SolveStatus::Infeasible: return 3;
  }
  return 3;
}

template <typename E>
E enum_field(const nlohmann::json& j, const char* key, E def,
             std::initializer_list<std::pair<const char*, E>> names) {
  if (!j.contains(key)) return def;
  const auto s = j.at(key).get<std::string>();
  for (const auto& [n, v] : names)
    if (s == n) return v;
  throw InvalidInput(std::string(key) + ": unknown value '" + s + "'");
}

template <typename E>
const char* enum_name(E v, std::initializer_list<std::pair<const char*, E>> names) {
  for (const auto& [n, e] : names)
    if (e == v) return n;
  return "?";
}

const std::initializer_list<std::pair<const char*, Strategy>> kStrategies = {
    {"global", Strategy::Global}, {"block", Strategy::Block}, {"auto", Strategy::Auto}};
const std::initializer_list<std::pair<const char*, TermSparsity>> kTsp = {
    {"on", TermSparsity::On}, {"off", TermSparsity::Off}};
const std::initializer_list<std::pair<const char*, MultiplierNormalization>> kNorm = {
    {"sphere", MultiplierNormalization::Sphere}, {"none", MultiplierNormalization::None}};
const std::initializer_list<std::pair<const char*, FeatureMode>> kFeatures = {
    {"linear", FeatureMode::Linear}, {"monomial", FeatureMode::PerPairMonomial}};

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidInput(std::string(key) + ": wrong type");
  }
}

double snap(double v, std::initializer_list<double> points, double tol) {
  for (double t : points)
    if (std::abs(v - t) <= tol) return t;
  return v;
}

double merit(const SolveResult& r) {
  return std::max({r.primal_residual, r.dual_residual, r.gap});
}

bool usable(const SolveResult& r, const LearnConfig& cfg) {
  if (r.status == SolveStatus::Optimal) return true;
  if (r.status == SolveStatus::Infeasible) return false;
  return std::isfinite(merit(r)) && merit(r) <= cfg.accept_tol;
}

void tally(LearnResult& out, const SubproblemLog& l) {
  out.status = worst_status(out.status, l.status);
  if (l.status == SolveStatus::Optimal) {
    ++out.optimal_solves;
  } else if (l.accepted) {
    ++out.accepted_solves;
  } else {
    ++out.rejected_solves;
  }
}

struct BlockOutcome {
  bool accepted = true;
  double q = 0.0;
  double p = 0.0;
  SolveResult result;
  nlohmann::json sparsity;
  int order = 0;
};

BlockOutcome solve_pair(const BilevelProblem& bp, std::size_t e, const PairState& x,
                        const std::optional<PairState>& anchor, const LearnConfig& cfg) {
  BilevelProblem sub = restrict_to_pair(bp, e, x);
  const VarLayout lay{bp.dbar};
  if (anchor && cfg.rho > 0.0) {
    const double aq = (*anchor)[lay.q(e)];
    const double ap = (*anchor)[lay.p(e)];
    const Polynomial q = Polynomial::variable(2, 0), p = Polynomial::variable(2, 1);
    const Polynomial dq = q - Polynomial::constant(2, aq), dp = p - Polynomial::constant(2, ap);
    sub.F = sub.F + (dq * dq + dp * dp) * cfg.rho;
  }
  const SingleLevelPOP pop = kkt_reformulate(sub, cfg.normalization);
  const CliqueSet cs = generate_cliques(pop);
  BlockOutcome out;
  out.order = cfg.order > 0 ? cfg.order : d_min(pop);
  const SdpProblem sdp = assemble_sdp(pop, cs, out.order, cfg.term_sparsity);
  out.result = solve(sdp.program, cfg.solver);
  out.sparsity = sdp.report();
  out.sparsity["cliques"] = cs.to_json();
  out.accepted = usable(out.result, cfg);
  if (!out.accepted) {
    out.q = x[lay.q(e)];
    out.p = x[lay.p(e)];
    return out;
  }
  const MomentVector mv = sdp.moments(out.result.y);
  out.q = std::clamp(mv.at(Monomial::variable(0)), 0.0, 1.0);
  out.p = std::clamp(mv.at(Monomial::variable(1)), -1.0, 1.0);
  // Values within eps_cert of a binary point are landed on it exactly: a
  // residual 1e-7 on q or p would otherwise count as a live arc when the
  // next pair's walk classes are formed.
  out.q = snap(out.q, {0.0, 1.0}, cfg.eps_cert);
  out.p = snap(out.p, {-1.0, 0.0, 1.0}, cfg.eps_cert);
  // The pair's own 2-cycle class p^4 q (1 - q) <= 0 forces binary q once
  // p != 0; for small p that constraint is below solver resolution.
  if (out.p != 0.0) out.q = out.q >= 0.5 ? 1.0 : 0.0;
  return out;
}

}  // namespace

SolveStatus worst_status(SolveStatus a, SolveStatus b) { return severity(a) >= severity(b) ? a : b; }

void LearnConfig::validate() const {
  score.validate();
  if (k_max < 2) throw InvalidInput("k_max: must be at least 2");
  if (order < 0) throw InvalidInput("order: must be non-negative");
  if (!(tau_p > 0.0 && tau_p < 1.0)) throw InvalidInput("tau_p: must lie in (0, 1)");
  if (!(eps_cert > 0.0)) throw InvalidInput("eps_cert: must be positive");
  if (!(rho >= 0.0)) throw InvalidInput("rho: must be non-negative");
  if (max_sweeps < 1) throw InvalidInput("max_sweeps: must be at least 1");
  if (!(sweep_tol >= 0.0)) throw InvalidInput("sweep_tol: must be non-negative");
  if (!(accept_tol > 0.0)) throw InvalidInput("accept_tol: must be positive");
  if (restarts < 1) throw InvalidInput("restarts: must be at least 1");
  if (solver.progress_window < 1) throw InvalidInput("progress_window: must be at least 1");
  if (!(solver.feas_tol > 0.0)) throw InvalidInput("feas_tol: must be positive");
  if (!(solver.gap_tol > 0.0)) throw InvalidInput("gap_tol: must be positive");
  if (solver.max_iter < 1) throw InvalidInput("max_iter: must be at least 1");
}

nlohmann::json LearnConfig::to_json() const {
  return {{"alpha", score.alpha},
          {"lambda_sp", score.lambda_sp},
          {"features", enum_name(score.feature_mode, kFeatures)},
          {"k_max", k_max},
          {"order", order},
          {"tau_p", tau_p},
          {"eps_cert", eps_cert},
          {"term_sparsity", enum_name(term_sparsity, kTsp)},
          {"normalization", enum_name(normalization, kNorm)},
          {"strategy", enum_name(strategy, kStrategies)},
          {"rho", rho},
          {"max_sweeps", max_sweeps},
          {"sweep_tol", sweep_tol},
          {"observational_only", observational_only},
          {"accept_tol", accept_tol},
          {"restarts", restarts},
          {"seed", seed},
          {"progress_window", solver.progress_window},
          {"feas_tol", solver.feas_tol},
          {"gap_tol", solver.gap_tol},
          {"max_iter", solver.max_iter}};
}

LearnConfig LearnConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidInput("learn config: expected an object");
  LearnConfig c;
  read_field(j, "alpha", c.score.alpha);
  read_field(j, "lambda_sp", c.score.lambda_sp);
  c.score.feature_mode = enum_field(j, "features", c.score.feature_mode, kFeatures);
  read_field(j, "k_max", c.k_max);
  read_field(j, "order", c.order);
  read_field(j, "tau_p", c.tau_p);
  read_field(j, "eps_cert", c.eps_cert);
  c.term_sparsity = enum_field(j, "term_sparsity", c.term_sparsity, kTsp);
  c.normalization = enum_field(j, "normalization", c.normalization, kNorm);
  c.strategy = enum_field(j, "strategy", c.strategy, kStrategies);
  read_field(j, "rho", c.rho);
  read_field(j, "max_sweeps", c.max_sweeps);
  read_field(j, "sweep_tol", c.sweep_tol);
  read_field(j, "observational_only", c.observational_only);
  read_field(j, "accept_tol", c.accept_tol);
  read_field(j, "restarts", c.restarts);
  read_field(j, "seed", c.seed);
  read_field(j, "progress_window", c.solver.progress_window);
  read_field(j, "feas_tol", c.solver.feas_tol);
  read_field(j, "gap_tol", c.solver.gap_tol);
  read_field(j, "max_iter", c.solver.max_iter);
  c.validate();
  return c;
}

LearnProblem prepare_problem(const Dataset& ds, const LearnConfig& cfg) {
  cfg.validate();
  ds.validate();
  const Dataset used = cfg.observational_only ? ds.observational_only() : ds;
  LearnProblem prob;
  prob.map = EdgeIndexMap(ds.nodes());
  prob.features = FeatureMap::for_config(used, cfg.score.feature_mode);
  prob.bilevel = build_bilevel(used, cfg.score, prob.map, std::min(cfg.k_max, ds.nodes()), prob.features);
  return prob;
}

PairState initial_state(std::size_t dbar) {
  PairState x(2 * dbar, 0.0);
  for (std::size_t e = 0; e < dbar; ++e) x[e] = 0.5;
  return x;
}

std::vector<std::size_t> visit_order(std::size_t dbar, std::uint64_t seed, int restart) {
  std::vector<std::size_t> v(dbar);
  std::iota(v.begin(), v.end(), std::size_t{0});
  if (restart == 0) return v;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(restart)};
  std::mt19937_64 rng(seq);
  std::shuffle(v.begin(), v.end(), rng);
  return v;
}

SweepResult block_sweep(const BilevelProblem& bp, const PairState& x,
                        const std::optional<PairState>& anchor, const LearnConfig& cfg, int sweep,
                        std::span<const std::size_t> visit) {
  if (x.size() != bp.nvars()) throw InvalidInput("block_sweep: state has the wrong length");
  if (!visit.empty() && visit.size() != bp.dbar) throw InvalidInput("block_sweep: visit order has the wrong length");
  SweepResult r;
  r.x = x;
  const VarLayout lay{bp.dbar};
  for (std::size_t k = 0; k < bp.dbar; ++k) {
    const std::size_t e = visit.empty() ? k : visit[k];
    BlockOutcome o = solve_pair(bp, e, r.x, anchor, cfg);
    r.x[lay.q(e)] = o.q;
    r.x[lay.p(e)] = o.p;
    if (k == 0) r.sparsity = std::move(o.sparsity);
    r.logs.push_back({sweep, e, o.result.status, o.result.objective, o.result.iterations,
                      merit(o.result), o.accepted, std::move(o.result.trace)});
  }
  for (std::size_t k = 0; k < x.size(); ++k) r.drift = std::max(r.drift, std::abs(r.x[k] - x[k]));
  return r;
}

LearnedGraph finalize(const LearnProblem& prob, const PairState& x, const Dataset& ds,
                      const LearnConfig& cfg, int order, SolveStatus status,
                      StructureParams* params_out) {
  const std::size_t dbar = prob.map.size();
  const SingleLevelPOP pop = kkt_reformulate(prob.bilevel, cfg.normalization);
  std::vector<double> q(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(dbar));
  std::vector<double> p(x.begin() + static_cast<std::ptrdiff_t>(dbar), x.end());
  std::vector<double> lambda = recover_multipliers(pop, q, p);
  StructureParams params(std::move(p), std::move(q), std::move(lambda));

  LearnedGraph g;
  g.certificate = certify(params, pop, cfg.eps_cert);
  RoundResult rr = round_and_repair(params, prob.map, cfg.tau_p);
  g.adj = std::move(rr.adj);
  g.repairs = std::move(rr.repairs);
  RefitResult fit = refit_weights(g.adj, ds);
  g.W = std::move(fit.W);
  g.rank_deficient = fit.rank_deficient;
  g.order = order;
  g.solver_status = to_string(status);
  if (params_out) *params_out = std::move(params);
  return g;
}

nlohmann::json LearnResult::summary() const {
  return {{"status", to_string(status)},
          {"sweeps", sweeps},
          {"drift", drift},
          {"restart", restart},
          {"restart_objectives", restart_objectives},
          {"optimal_solves", optimal_solves},
          {"accepted_solves", accepted_solves},
          {"rejected_solves", rejected_solves}};
}

LearnResult learn(const Dataset& ds, const LearnConfig& cfg) {
  const LearnProblem prob = prepare_problem(ds, cfg);
  const BilevelProblem& bp = prob.bilevel;
  LearnResult out;
  PairState x = initial_state(bp.dbar);
  int order = 0;
  const bool global = cfg.strategy == Strategy::Global || (cfg.strategy == Strategy::Auto && bp.dbar == 1);
  if (global) {
    const SingleLevelPOP pop = kkt_reformulate(bp, cfg.normalization);
    const CliqueSet cs = generate_cliques(pop);
    order = cfg.order > 0 ? cfg.order : d_min(pop);
    const SdpProblem sdp = assemble_sdp(pop, cs, order, cfg.term_sparsity);
    SolveResult res = solve(sdp.program, cfg.solver);
    out.sparsity = sdp.report();
    out.sparsity["cliques"] = cs.to_json();
    out.sweeps = 1;
    const bool ok = usable(res, cfg);
    if (ok) {
      const StructureParams sp = extract_params(sdp.moments(res.y), prob.map);
      for (std::size_t e = 0; e < bp.dbar; ++e) {
        x[e] = sp.q[e];
        x[bp.dbar + e] = sp.p[e];
      }
    }
    out.logs.push_back({0, 0, res.status, res.objective, res.iterations, merit(res), ok,
                        std::move(res.trace)});
    tally(out, out.logs.back());
  } else {
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < cfg.restarts; ++k) {
      const auto visit = visit_order(bp.dbar, cfg.seed, k);
      PairState xk = initial_state(bp.dbar);
      std::vector<double> drift;
      int sweeps = 0;
      std::optional<PairState> anchor;
      for (int s = 0; s < cfg.max_sweeps; ++s) {
        SweepResult sr = block_sweep(bp, xk, anchor, cfg, s, visit);
        if (k == 0 && s == 0) out.sparsity = std::move(sr.sparsity);
        for (auto& l : sr.logs) {
          tally(out, l);
          out.logs.push_back(std::move(l));
        }
        xk = std::move(sr.x);
        drift.push_back(sr.drift);
        sweeps = s + 1;
        if (sr.drift <= cfg.sweep_tol) break;
        anchor = xk;
      }
      const double f = bp.F.evaluate(xk);
      out.restart_objectives.push_back(f);
      if (f < best) {
        best = f;
        x = std::move(xk);
        out.drift = std::move(drift);
        out.sweeps = sweeps;
        out.restart = k;
      }
    }
    order = cfg.order > 0 ? cfg.order : (out.sparsity.contains("order") ? out.sparsity["order"].get<int>() : 0);
  }
  out.graph = finalize(prob, x, ds, cfg, order, out.status, &out.params);
  return out;
}

}  // namespace cpop
