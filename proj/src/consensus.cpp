#include "cpop/consensus.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>

#include "cpop/datagen.hpp"
#include "cpop/error.hpp"

namespace cpop {

namespace {

constexpr std::uint64_t kPartitionStream = 300;
constexpr std::uint64_t kServerStream = 1000;

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, std::span<const int> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(rows[k]);
  return out;
}

std::vector<Eigen::MatrixXd> split(const Eigen::MatrixXd& m, int M, std::uint64_t seed, std::uint64_t stream) {
  const int n = static_cast<int>(m.rows());
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  auto rng = derived_rng(seed, stream);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<Eigen::MatrixXd> parts;
  for (int k = 0; k < M; ++k) {
    const auto lo = static_cast<std::size_t>(static_cast<long>(k) * n / M);
    const auto hi = static_cast<std::size_t>(static_cast<long>(k + 1) * n / M);
    parts.push_back(take_rows(m, std::span<const int>(idx).subspan(lo, hi - lo)));
  }
  return parts;
}

// Runs f(i) for i in [0, n) on up to `jobs` threads; rethrows the first
// failure in index order so the outcome does not depend on scheduling.
template <typename F>
void parallel_for(int n, int jobs, F f) {
  std::vector<std::exception_ptr> errs(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        errs[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int t = std::clamp(jobs, 1, std::max(n, 1));
  if (t == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < t; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

double max_change(const PairState& a, const PairState& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
  return d;
}

}  // namespace

void RoundConfig::validate() const {
  if (M < 1) throw InvalidInput("M: must be at least 1");
  if (r < 1 || r > M) throw InvalidInput("r: must lie in [1, M]");
  if (t_cr < 1) throw InvalidInput("t_cr: must be at least 1");
  if (T_s < 1) throw InvalidInput("T_s: must be at least 1");
  if (!(rho >= 0.0)) throw InvalidInput("rho: must be non-negative");
  if (jobs < 1) throw InvalidInput("jobs: must be at least 1");
}

nlohmann::json RoundConfig::to_json() const {
  return {{"M", M}, {"r", r}, {"t_cr", t_cr}, {"T_s", T_s}, {"rho", rho}, {"seed", seed}, {"jobs", jobs}};
}

RoundConfig RoundConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidInput("round config: expected an object");
  RoundConfig c;
  auto read = [&](const char* key, auto& out) {
    if (!j.contains(key)) return;
    try {
      out = j.at(key).get<std::remove_reference_t<decltype(out)>>();
    } catch (const nlohmann::json::exception&) {
      throw InvalidInput(std::string(key) + ": wrong type");
    }
  };
  read("M", c.M);
  read("r", c.r);
  read("t_cr", c.t_cr);
  read("T_s", c.T_s);
  read("rho", c.rho);
  read("seed", c.seed);
  read("jobs", c.jobs);
  c.validate();
  return c;
}

std::vector<Dataset> partition(const Dataset& ds, int M, std::uint64_t seed) {
  if (M < 1) throw InvalidInput("partition: M must be at least 1");
  ds.validate();
  if (ds.obs.rows() < M) throw InvalidInput("partition: observational regime has fewer rows than clients");
  for (const auto& b : ds.ints)
    if (b.data.rows() < M)
      throw InvalidInput("partition: intervention on node " + std::to_string(b.target) + " has fewer rows than clients");
  if (M == 1) return {ds};
  std::vector<Dataset> out(static_cast<std::size_t>(M));
  auto obs = split(ds.obs, M, seed, kPartitionStream);
  for (int k = 0; k < M; ++k) out[static_cast<std::size_t>(k)].obs = std::move(obs[static_cast<std::size_t>(k)]);
  for (std::size_t b = 0; b < ds.ints.size(); ++b) {
    auto parts = split(ds.ints[b].data, M, seed, kPartitionStream + 1 + b);
    for (int k = 0; k < M; ++k)
      out[static_cast<std::size_t>(k)].ints.push_back({ds.ints[b].target, std::move(parts[static_cast<std::size_t>(k)])});
  }
  return out;
}

ClientState make_client(int id, Dataset data, const LearnConfig& cfg) {
  ClientState c;
  c.id = id;
  c.problem = prepare_problem(data, cfg);
  c.data = std::move(data);
  c.x = initial_state(c.problem.bilevel.dbar);
  return c;
}

void client_step(ClientState& c, const LearnConfig& cfg, double rho) {
  LearnConfig local = cfg;
  local.rho = rho;
  try {
    SweepResult sr = block_sweep(c.problem.bilevel, c.x, c.anchor, local, c.steps, c.visit);
    c.x = std::move(sr.x);
    if (c.steps == 0) c.sparsity = std::move(sr.sparsity);
    for (auto& l : sr.logs) c.logs.push_back(std::move(l));
  } catch (const InvalidInput& e) {
    throw InvalidInput("client " + std::to_string(c.id) + ": " + e.what());
  } catch (const Error& e) {
    throw Error("client " + std::to_string(c.id) + ": " + e.what());
  }
  ++c.steps;
}

nlohmann::json ServerState::to_json() const {
  return {{"dbar", dbar},
          {"consensus", consensus ? nlohmann::json(*consensus) : nlohmann::json()},
          {"last_selected", last_selected},
          {"aggregations", aggregations}};
}

PairState server_aggregate(ServerState& s, std::span<const PairState> submitted, int r, std::uint64_t seed) {
  const int M = static_cast<int>(submitted.size());
  if (r < 1 || r > M) throw InvalidInput("r: must lie in [1, M]");
  for (const auto& x : submitted)
    if (x.size() != 2 * s.dbar) throw InvalidInput("server_aggregate: vector has the wrong length");
  std::vector<int> idx(static_cast<std::size_t>(M));
  std::iota(idx.begin(), idx.end(), 0);
  auto rng = derived_rng(seed, kServerStream + static_cast<std::uint64_t>(s.aggregations));
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(r));
  std::sort(idx.begin(), idx.end());
  PairState mean = submitted[static_cast<std::size_t>(idx[0])];
  for (std::size_t k = 1; k < idx.size(); ++k) {
    const auto& x = submitted[static_cast<std::size_t>(idx[k])];
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += x[i];
  }
  for (double& v : mean) v /= r;
  s.consensus = mean;
  s.last_selected = std::move(idx);
  ++s.aggregations;
  return mean;
}

nlohmann::json DistResult::summary() const {
  nlohmann::json j = result.summary();
  j["messages"] = messages;
  j["aggregations"] = server.aggregations;
  return j;
}

namespace {

struct Descent {
  PairState consensus;
  std::vector<RoundLog> rounds;
  ServerState server;
  std::vector<double> drift;
  int sweeps = 0;
  long messages = 0;
  std::vector<SubproblemLog> logs;
  nlohmann::json sparsity;
};

Descent descend(const Dataset& ds, const RoundConfig& rc, const LearnConfig& cfg, std::size_t dbar,
                const std::vector<std::size_t>& visit) {
  std::vector<Dataset> slices = partition(ds, rc.M, rc.seed);
  std::vector<ClientState> clients(static_cast<std::size_t>(rc.M));
  parallel_for(rc.M, rc.jobs, [&](int m) {
    auto& c = clients[static_cast<std::size_t>(m)];
    c = make_client(m, std::move(slices[static_cast<std::size_t>(m)]), cfg);
    c.visit = visit;
  });

  Descent d;
  d.server.dbar = dbar;
  d.consensus = initial_state(dbar);
  for (int t = 0; t < rc.T_s; ++t) {
    parallel_for(rc.M, rc.jobs, [&](int m) { client_step(clients[static_cast<std::size_t>(m)], cfg, rc.rho); });
    RoundLog log;
    log.round = t;
    for (const auto& c : clients) log.client_objective.push_back(c.problem.bilevel.F.evaluate(c.x));
    const bool aggregate = (t + 1) % rc.t_cr == 0 || t == rc.T_s - 1;
    bool converged = false;
    if (aggregate) {
      std::vector<PairState> submitted;
      for (const auto& c : clients) submitted.push_back(c.x);
      PairState next = server_aggregate(d.server, submitted, rc.r, rc.seed);
      log.selected = d.server.last_selected;
      log.drift = max_change(next, d.consensus);
      d.messages += rc.r + rc.M;
      d.consensus = std::move(next);
      for (auto& c : clients) {
        c.x = d.consensus;
        c.anchor = d.consensus;
      }
      d.drift.push_back(log.drift);
      converged = log.drift <= cfg.sweep_tol;
    }
    log.message_count = d.messages;
    d.rounds.push_back(std::move(log));
    d.sweeps = t + 1;
    if (converged) break;
  }
  for (auto& c : clients)
    for (auto& l : c.logs) d.logs.push_back(std::move(l));
  d.sparsity = clients.front().sparsity;
  return d;
}

}  // namespace

DistResult run_simulation(const Dataset& ds, const RoundConfig& rc, const LearnConfig& cfg) {
  rc.validate();
  cfg.validate();
  const LearnProblem pooled = prepare_problem(ds, cfg);
  const std::size_t dbar = pooled.bilevel.dbar;

  DistResult out;
  LearnResult& res = out.result;
  PairState best_x;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < cfg.restarts; ++k) {
    Descent d = descend(ds, rc, cfg, dbar, visit_order(dbar, cfg.seed, k));
    out.messages += d.messages;
    for (auto& l : d.logs) {
      res.status = worst_status(res.status, l.status);
      if (l.status == SolveStatus::Optimal) {
        ++res.optimal_solves;
      } else if (l.accepted) {
        ++res.accepted_solves;
      } else {
        ++res.rejected_solves;
      }
      res.logs.push_back(std::move(l));
    }
    if (k == 0) res.sparsity = std::move(d.sparsity);
    const double f = pooled.bilevel.F.evaluate(d.consensus);
    res.restart_objectives.push_back(f);
    if (f < best) {
      best = f;
      best_x = std::move(d.consensus);
      out.rounds = std::move(d.rounds);
      out.server = std::move(d.server);
      res.drift = std::move(d.drift);
      res.sweeps = d.sweeps;
      res.restart = k;
    }
  }
  const int order = cfg.order > 0 ? cfg.order : res.sparsity.value("order", 0);
  res.graph = finalize(pooled, best_x, ds, cfg, order, res.status, &res.params);
  return out;
}

void write_round_log_csv(const std::vector<RoundLog>& rounds, std::ostream& out) {
  out << "round,selected,drift,message_count,client_objective\n";
  for (const auto& r : rounds) {
    out << r.round << ',';
    for (std::size_t k = 0; k < r.selected.size(); ++k) out << (k ? ";" : "") << r.selected[k];
    out << ',';
    if (!r.selected.empty()) out << format_double(r.drift);
    out << ',' << r.message_count << ',';
    for (std::size_t k = 0; k < r.client_objective.size(); ++k)
      out << (k ? ";" : "") << format_double(r.client_objective[k]);
    out << '\n';
  }
}

}  // namespace cpop
