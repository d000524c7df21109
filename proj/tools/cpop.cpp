// Command-line driver: generate, learn, learn-dist, eval, sweep.
//
// Exit codes: 0 success, 1 solver failure, 2 configuration or input error.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cpop/consensus.hpp"
#include "cpop/datagen.hpp"
#include "cpop/error.hpp"
#include "cpop/learn.hpp"
#include "cpop/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cpop;

namespace {

class SolverFailure : public Error {
 public:
  using Error::Error;
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// Flags shared by every command; values given on the command line take
// precedence over the --config file.
struct Common {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out = ".";

  void add(CLI::App* app) {
    app->add_option("--seed", seed, "Random seed");
    app->add_option("--config", config, "JSON config file (a manifest.json also works)");
    app->add_option("--out", out, "Output directory")->capture_default_str();
  }
  json file() const { return config.empty() ? json::object() : read_json(config); }
  fs::path dir() const {
    fs::create_directories(out);
    return fs::path(out);
  }
};

json section(const json& file, const char* key) {
  if (!file.is_object()) throw InvalidInput("config: expected an object");
  return file.contains(key) ? file.at(key) : json::object();
}

struct GenFlags {
  std::optional<int> D, edges, N;
  std::optional<double> noise;
  std::optional<std::string> mechanism, intervention;
  bool latent = false, no_interventions = false;

  void add(CLI::App* app) {
    app->add_option("--D", D, "Number of observed nodes");
    app->add_option("--edges", edges, "Number of edges");
    app->add_option("--N", N, "Rows per regime");
    app->add_option("--noise", noise, "Noise scale");
    app->add_option("--mechanism", mechanism, "linear | polynomial");
    app->add_option("--intervention", intervention, "perfect | imperfect");
    app->add_flag("--latent", latent, "Add a hidden common cause of two observed nodes");
    app->add_flag("--no-interventions", no_interventions, "Observational regime only");
  }
  GenConfig resolve(const json& file, const std::optional<std::uint64_t>& seed) const {
    json j = section(file, "gen");
    if (file.contains("seed")) j["seed"] = file.at("seed");
    if (D) j["D"] = *D;
    if (edges) j["edge_count"] = *edges;
    if (N) j["N"] = *N;
    if (noise) j["noise_scale"] = *noise;
    if (mechanism) j["mechanism"] = *mechanism;
    if (intervention) j["intervention"] = *intervention;
    if (latent) j["latent"] = true;
    if (no_interventions) j["interventions"] = false;
    if (seed) j["seed"] = *seed;
    return GenConfig::from_json(j);
  }
};

struct LearnFlags {
  std::optional<double> alpha, lambda_sp, tau_p, eps_cert, rho, sweep_tol, accept_tol;
  std::optional<std::string> features, strategy, term_sparsity, normalization;
  std::optional<int> order, k_max, max_sweeps, max_iter, restarts;
  bool obs_only = false;

  void add(CLI::App* app) {
    app->add_option("--alpha", alpha, "Weight of the observational score");
    app->add_option("--lambda-sp", lambda_sp, "Sparsity weight");
    app->add_option("--features", features, "linear | monomial");
    app->add_option("--order", order, "Relaxation order (0 = d_min)");
    app->add_option("--k-max", k_max, "Longest closed walk in the acyclicity constraints");
    app->add_option("--tau-p", tau_p, "Rounding threshold on |p|");
    app->add_option("--eps-cert", eps_cert, "Certificate tolerance");
    app->add_option("--strategy", strategy, "global | block | auto");
    app->add_option("--term-sparsity", term_sparsity, "on | off");
    app->add_option("--normalization", normalization, "sphere | none");
    app->add_option("--rho", rho, "Anchoring weight between sweeps");
    app->add_option("--max-sweeps", max_sweeps, "Sweep limit of the block strategy");
    app->add_option("--sweep-tol", sweep_tol, "Stop once a sweep moves (q, p) by at most this");
    app->add_option("--accept-tol", accept_tol, "Residual up to which a stalled solve is used");
    app->add_option("--max-iter", max_iter, "Interior-point iteration limit");
    app->add_option("--restarts", restarts, "Block descents with seeded pair orders");
    app->add_flag("--obs-only", obs_only, "Use the observational score only");
  }
  LearnConfig resolve(const json& file, const std::optional<std::uint64_t>& seed) const {
    json j = section(file, "learn");
    if (!j.contains("seed") && file.contains("seed")) j["seed"] = file.at("seed");
    if (seed) j["seed"] = *seed;
    if (restarts) j["restarts"] = *restarts;
    if (alpha) j["alpha"] = *alpha;
    if (lambda_sp) j["lambda_sp"] = *lambda_sp;
    if (features) j["features"] = *features;
    if (order) j["order"] = *order;
    if (k_max) j["k_max"] = *k_max;
    if (tau_p) j["tau_p"] = *tau_p;
    if (eps_cert) j["eps_cert"] = *eps_cert;
    if (strategy) j["strategy"] = *strategy;
    if (term_sparsity) j["term_sparsity"] = *term_sparsity;
    if (normalization) j["normalization"] = *normalization;
    if (rho) j["rho"] = *rho;
    if (max_sweeps) j["max_sweeps"] = *max_sweeps;
    if (sweep_tol) j["sweep_tol"] = *sweep_tol;
    if (accept_tol) j["accept_tol"] = *accept_tol;
    if (max_iter) j["max_iter"] = *max_iter;
    if (obs_only) j["observational_only"] = true;
    return LearnConfig::from_json(j);
  }
};

struct RoundFlags {
  std::optional<int> M, r, t_cr, T_s, jobs;
  std::optional<double> rho;

  void add(CLI::App* app) {
    app->add_option("--M", M, "Number of clients");
    app->add_option("--r", r, "Clients averaged per aggregation");
    app->add_option("--t-cr", t_cr, "Rounds between aggregations");
    app->add_option("--T-s", T_s, "Server rounds");
    app->add_option("--consensus-rho", rho, "Weight of the pull toward the consensus");
    app->add_option("--jobs", jobs, "Threads for the client phase");
  }
  RoundConfig resolve(const json& file, const std::optional<std::uint64_t>& seed) const {
    json j = section(file, "round");
    if (file.contains("seed")) j["seed"] = file.at("seed");
    if (M) j["M"] = *M;
    if (r) j["r"] = *r;
    if (t_cr) j["t_cr"] = *t_cr;
    if (T_s) j["T_s"] = *T_s;
    if (rho) j["rho"] = *rho;
    if (jobs) j["jobs"] = *jobs;
    if (seed) j["seed"] = *seed;
    return RoundConfig::from_json(j);
  }
};

void write_traces(const fs::path& path, const std::vector<SubproblemLog>& logs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "sweep,pair,iteration,pobj,dobj,gap,pinf,dinf,mu,step_primal,step_dual\n";
  for (const auto& l : logs)
    for (const auto& t : l.trace)
      out << l.sweep << ',' << l.pair << ',' << t.iter << ',' << format_double(t.pobj) << ','
          << format_double(t.dobj) << ',' << format_double(t.gap) << ',' << format_double(t.pinf) << ','
          << format_double(t.dinf) << ',' << format_double(t.mu) << ',' << format_double(t.step_primal) << ','
          << format_double(t.step_dual) << '\n';
}

void print_sparsity(const json& report) {
  std::cout << "sparsity: " << report.dump() << "\n";
}

void check_solver(const LearnResult& r) {
  if (r.solver_failed())
    throw SolverFailure("solver failure: " + std::to_string(r.rejected_solves) + " rejected solve(s), worst status " +
                        to_string(r.status));
}

json manifest(const std::string& command, std::uint64_t seed) {
  return {{"command", command}, {"seed", seed}};
}

int cmd_generate(const Common& c, const GenFlags& g) {
  const json file = c.file();
  const GenConfig cfg = g.resolve(file, c.seed);
  const fs::path dir = c.dir();
  const Generated gen = generate(cfg);
  write_dataset_csv(gen.data, (dir / "data.csv").string());
  write_truth_json(gen.truth, (dir / "truth.json").string());
  json m = manifest("generate", cfg.seed);
  m["gen"] = cfg.to_json();
  m["outputs"] = {"data.csv", "truth.json"};
  write_json(dir / "manifest.json", m);
  std::cout << "wrote " << (dir / "data.csv").string() << " and " << (dir / "truth.json").string() << "\n";
  return 0;
}

// --data wins over the config file's "data" entry.
std::string resolve_data(const json& file, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (file.contains("data") && file.at("data").is_string()) return file.at("data").get<std::string>();
  throw InvalidInput("data: no dataset given (--data or \"data\" in the config)");
}

int cmd_learn(const Common& c, const LearnFlags& l, const std::string& data_flag, bool report_sparsity,
              bool trace) {
  const json file = c.file();
  const std::string data = resolve_data(file, data_flag);
  const LearnConfig cfg = l.resolve(file, c.seed);
  const Dataset ds = read_dataset_csv(data);
  const fs::path dir = c.dir();
  const LearnResult res = learn(ds, cfg);
  json graph = res.graph.to_json();
  graph["summary"] = res.summary();
  write_json(dir / "graph.json", graph);
  write_json(dir / "sparsity.json", res.sparsity);
  json outputs = {"graph.json", "sparsity.json"};
  if (trace) {
    write_traces(dir / "trace.csv", res.logs);
    outputs.push_back("trace.csv");
  }
  if (report_sparsity) print_sparsity(res.sparsity);
  json m = manifest("learn", c.seed.value_or(0));
  m["data"] = data;
  m["learn"] = cfg.to_json();
  m["outputs"] = outputs;
  m["summary"] = res.summary();
  write_json(dir / "manifest.json", m);
  std::cout << "edges " << graph.at("edges").size() << ", solves optimal/accepted/rejected " << res.optimal_solves
            << "/" << res.accepted_solves << "/" << res.rejected_solves << ", certified "
            << (res.graph.certificate.certified ? "yes" : "no") << ", repairs " << res.graph.repairs.size() << "\n";
  check_solver(res);
  return 0;
}

int cmd_learn_dist(const Common& c, const LearnFlags& l, const RoundFlags& rf, const std::string& data_flag,
                   bool report_sparsity, bool trace) {
  const json file = c.file();
  const std::string data = resolve_data(file, data_flag);
  const LearnConfig cfg = l.resolve(file, c.seed);
  const RoundConfig rc = rf.resolve(file, c.seed);
  const Dataset ds = read_dataset_csv(data);
  const fs::path dir = c.dir();
  const DistResult res = run_simulation(ds, rc, cfg);
  json graph = res.result.graph.to_json();
  graph["summary"] = res.summary();
  write_json(dir / "graph.json", graph);
  {
    std::ofstream out(dir / "rounds.csv");
    if (!out) throw IoError("cannot write rounds.csv");
    write_round_log_csv(res.rounds, out);
  }
  json outputs = {"graph.json", "rounds.csv"};
  if (trace) {
    write_traces(dir / "trace.csv", res.result.logs);
    outputs.push_back("trace.csv");
  }
  if (report_sparsity) print_sparsity(res.result.sparsity);
  json m = manifest("learn-dist", rc.seed);
  m["data"] = data;
  m["learn"] = cfg.to_json();
  m["round"] = rc.to_json();
  m["outputs"] = outputs;
  m["summary"] = res.summary();
  write_json(dir / "manifest.json", m);
  std::cout << "edges " << graph.at("edges").size() << ", rounds " << res.rounds.size() << ", messages "
            << res.messages << ", solves optimal/accepted/rejected " << res.result.optimal_solves << "/"
            << res.result.accepted_solves << "/" << res.result.rejected_solves << "\n";
  check_solver(res.result);
  return 0;
}

int cmd_eval(const Common& c, const std::string& est, const std::string& truth) {
  const Adjacency a = graph_from_json(read_json(est));
  const Adjacency t = graph_from_json(read_json(truth));
  const fs::path dir = c.dir();
  const EvalReport rep = evaluate(a, t);
  write_json(dir / "eval.json", rep.to_json());
  json m = manifest("eval", c.seed.value_or(0));
  m["estimate"] = est;
  m["truth"] = truth;
  m["outputs"] = {"eval.json"};
  write_json(dir / "manifest.json", m);
  std::cout << rep.to_json().dump() << "\n";
  return 0;
}

struct SweepCell {
  std::uint64_t seed = 0;
  std::string value;
  std::string row;
  std::exception_ptr error;
};

void apply_param(const std::string& param, const std::string& value, GenConfig& g, LearnConfig& l) {
  try {
    if (param == "alpha") l.score.alpha = std::stod(value);
    else if (param == "N") g.N = std::stoi(value);
    else if (param == "noise") g.noise_scale = std::stod(value);
    else if (param == "iterations") l.max_sweeps = std::stoi(value);
    else throw InvalidInput("param: unknown parameter '" + param + "' (alpha, N, noise, iterations)");
  } catch (const std::logic_error&) {
    throw InvalidInput("values: cannot parse '" + value + "' for " + param);
  }
  g.validate();
  l.validate();
}

int cmd_sweep(const Common& c, const GenFlags& gf, const LearnFlags& lf, const std::string& param,
              const std::vector<std::string>& values, int seeds, int jobs) {
  const json file = c.file();
  const GenConfig gen0 = gf.resolve(file, c.seed);
  const LearnConfig learn0 = lf.resolve(file, c.seed);
  if (values.empty()) throw InvalidInput("values: need at least one value");
  if (seeds < 1) throw InvalidInput("seeds: must be at least 1");
  if (jobs < 1) throw InvalidInput("jobs: must be at least 1");
  // Reject bad grid points before any work starts.
  for (const auto& v : values) {
    GenConfig g = gen0;
    LearnConfig l = learn0;
    apply_param(param, v, g, l);
  }
  const fs::path dir = c.dir();

  std::vector<SweepCell> cells;
  for (const auto& v : values)
    for (int s = 0; s < seeds; ++s) cells.push_back({gen0.seed + static_cast<std::uint64_t>(s), v, {}, nullptr});

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      SweepCell& cell = cells[i];
      try {
        GenConfig g = gen0;
        LearnConfig l = learn0;
        apply_param(param, cell.value, g, l);
        g.seed = cell.seed;
        l.seed = cell.seed;
        const Generated gen = generate(g);
        const auto t0 = std::chrono::steady_clock::now();
        const LearnResult res = learn(gen.data, l);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const EvalReport rep = evaluate(res.graph.adj, gen.truth.observed_adjacency());
        std::ostringstream row;
        row << cell.seed << ',' << g.D << ',' << param << ',' << cell.value << ',' << rep.shd << ','
            << format_double(rep.tpr) << ',' << format_double(secs) << ',' << to_string(res.status) << ','
            << res.rejected_solves << '\n';
        cell.row = row.str();
        if (res.solver_failed()) failed = true;
      } catch (...) {
        cell.error = std::current_exception();
      }
    }
  };
  const int t = std::min<int>(jobs, static_cast<int>(cells.size()));
  std::vector<std::thread> pool;
  for (int k = 1; k < t; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& cell : cells)
    if (cell.error) std::rethrow_exception(cell.error);

  std::string csv = "seed,D,param,value,shd,tpr,wall_time,status,rejected_solves\n";
  for (const auto& cell : cells) csv += cell.row;
  write_text(dir / "sweep.csv", csv);
  json m = manifest("sweep", gen0.seed);
  m["gen"] = gen0.to_json();
  m["learn"] = learn0.to_json();
  m["sweep"] = {{"param", param}, {"values", values}, {"seeds", seeds}, {"jobs", jobs}};
  m["outputs"] = {"sweep.csv"};
  write_json(dir / "manifest.json", m);
  std::cout << "wrote " << cells.size() << " rows to " << (dir / "sweep.csv").string() << "\n";
  if (failed) throw SolverFailure("solver failure in at least one sweep cell (see rejected_solves)");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal structure learning by sparse moment relaxations"};
  app.require_subcommand(1);

  Common common;
  GenFlags gen;
  LearnFlags lrn;
  RoundFlags rnd;
  std::string data, est, truth, param;
  std::vector<std::string> values;
  bool report_sparsity = false, trace = false;
  int seeds = 5, jobs = 1;

  auto* g = app.add_subcommand("generate", "Sample a ground-truth DAG and data");
  common.add(g);
  gen.add(g);

  auto add_learn = [&](CLI::App* sub) {
    common.add(sub);
    lrn.add(sub);
    sub->add_option("--data", data, "Dataset CSV (or \"data\" in the config)");
    sub->add_flag("--report-sparsity", report_sparsity, "Print clique and block sizes");
    sub->add_flag("--trace", trace, "Write per-iteration solver traces to trace.csv");
  };
  auto* l = app.add_subcommand("learn", "Learn a DAG from a dataset");
  add_learn(l);
  auto* d = app.add_subcommand("learn-dist", "Distributed simulation over client slices");
  add_learn(d);
  rnd.add(d);

  auto* e = app.add_subcommand("eval", "Compare an estimated graph with the truth");
  common.add(e);
  e->add_option("--est", est, "Estimated graph JSON")->required();
  e->add_option("--truth", truth, "Ground-truth graph JSON")->required();

  auto* s = app.add_subcommand("sweep", "Generate, learn and evaluate over a parameter grid");
  common.add(s);
  gen.add(s);
  lrn.add(s);
  s->add_option("--param", param, "alpha | N | noise | iterations")->required();
  s->add_option("--values", values, "Comma-separated grid")->delimiter(',')->required();
  s->add_option("--seeds", seeds, "Seeds per grid point, starting at --seed")->capture_default_str();
  s->add_option("--jobs", jobs, "Concurrent cells")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return 2;
  }

  try {
    if (*g) return cmd_generate(common, gen);
    if (*l) return cmd_learn(common, lrn, data, report_sparsity, trace);
    if (*d) return cmd_learn_dist(common, lrn, rnd, data, report_sparsity, trace);
    if (*e) return cmd_eval(common, est, truth);
    if (*s) return cmd_sweep(common, gen, lrn, param, values, seeds, jobs);
  } catch (const SolverFailure& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  } catch (const InvalidInput& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return 2;
  } catch (const IoError& ex) {
    std::cerr << "input error: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
