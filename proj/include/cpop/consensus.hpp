#pragma once

// Distributed simulation: M clients each run block sweeps on their own
// data slice, and a server periodically averages a random r-subset of the
// clients' (q, p) vectors and broadcasts the mean back as warm start and
// anchor. Clients run concurrently between aggregation barriers.

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include <json.hpp>

#include "cpop/dataset.hpp"
#include "cpop/learn.hpp"

namespace cpop {

struct RoundConfig {
  int M = 4;
  int r = 2;
  int t_cr = 2;
  int T_s = 20;
  double rho = 0.1;
  std::uint64_t seed = 0;
  int jobs = 1;  // worker threads for the client phase

  void validate() const;
  nlohmann::json to_json() const;
  static RoundConfig from_json(const nlohmann::json& j);
};

// Each regime's rows are shuffled and cut into M near-equal parts; M = 1
// returns the dataset unchanged (same row order).
std::vector<Dataset> partition(const Dataset& ds, int M, std::uint64_t seed);

// Local data never leaves this record; only `x` is read by the server.
struct ClientState {
  int id = 0;
  Dataset data;
  LearnProblem problem;
  PairState x;
  std::optional<PairState> anchor;
  std::vector<std::size_t> visit;  // pair order; empty means index order
  int steps = 0;
  std::vector<SubproblemLog> logs;
  nlohmann::json sparsity;  // report of the first subproblem
};

ClientState make_client(int id, Dataset data, const LearnConfig& cfg);

// One Gauss-Seidel sweep from the client's current x, pulled toward the
// anchor with weight rho when one is set. Library errors are rethrown
// with the client id prefixed.
void client_step(ClientState& c, const LearnConfig& cfg, double rho);

// The server sees (q, p) vectors only.
struct ServerState {
  std::size_t dbar = 0;
  std::optional<PairState> consensus;
  std::vector<int> last_selected;
  int aggregations = 0;

  nlohmann::json to_json() const;
};

// Uniform random r-subset of the submitted vectors, seeded by
// (seed, aggregation count); returns their component-wise mean.
PairState server_aggregate(ServerState& s, std::span<const PairState> submitted, int r,
                           std::uint64_t seed);

struct RoundLog {
  int round = 0;
  std::vector<int> selected;  // empty on rounds without aggregation
  double drift = 0.0;         // max-norm consensus change, aggregation rounds only
  long message_count = 0;     // cumulative
  std::vector<double> client_objective;  // local upper objective at each client's x
};

struct DistResult {
  LearnResult result;  // graph, params, status and solve counts
  std::vector<RoundLog> rounds;
  ServerState server;
  long messages = 0;  // summed over all descents

  nlohmann::json summary() const;
};

// T_s rounds; each round every client performs one step, and the server
// aggregates after every t_cr-th round and after the last one. Stops early
// once an aggregation moves the consensus by at most cfg.sweep_tol. With
// cfg.restarts > 1 the whole simulation is repeated with the same pair
// orders as the centralized learner and the consensus with the lowest
// pooled upper objective is kept; `rounds` and `server` describe that
// descent. The final consensus goes through the same certificate,
// rounding and refit as the centralized learner, on the pooled data.
DistResult run_simulation(const Dataset& ds, const RoundConfig& rc, const LearnConfig& cfg);

void write_round_log_csv(const std::vector<RoundLog>& rounds, std::ostream& out);

}  // namespace cpop
