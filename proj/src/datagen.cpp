#include "cpop/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "cpop/error.hpp"

namespace cpop {

namespace {

constexpr std::uint64_t kGraphStream = 0;
constexpr std::uint64_t kLatentStream = 1;
constexpr std::uint64_t kObsStream = 100;
constexpr std::uint64_t kIntStream = 101;

double signed_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> mag(lo, hi);
  std::bernoulli_distribution sign(0.5);
  const double v = mag(rng);
  return sign(rng) ? v : -v;
}

double mechanism(const GroundTruthGraph& g, const Eigen::MatrixXd& coeff, const Eigen::RowVectorXd& x,
                 int i) {
  double s = 0.0;
  for (int j = 0; j < g.nodes(); ++j)
    if (g.adj(j, i)) s += coeff(j, i) * std::pow(x(j), g.degree(j, i));
  return s;
}

Eigen::MatrixXd drop_hidden(const GroundTruthGraph& g, const Eigen::MatrixXd& full) {
  return full.leftCols(g.observed_nodes());
}

// Hidden nodes are unit-variance sources.
}  // namespace

int GroundTruthGraph::observed_nodes() const {
  return static_cast<int>(std::count(hidden.begin(), hidden.end(), false));
}

Adjacency GroundTruthGraph::observed_adjacency() const {
  const int d = observed_nodes();
  return adj.topLeftCorner(d, d);
}

std::vector<int> GroundTruthGraph::topological_order() const {
  const int D = nodes();
  std::vector<int> indeg(D, 0), order;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) indeg[j] += adj(i, j);
  std::vector<int> ready;
  for (int i = 0; i < D; ++i)
    if (indeg[i] == 0) ready.push_back(i);
  while (!ready.empty()) {
    std::sort(ready.begin(), ready.end(), std::greater<>());
    const int u = ready.back();
    ready.pop_back();
    order.push_back(u);
    for (int v = 0; v < D; ++v)
      if (adj(u, v) && --indeg[v] == 0) ready.push_back(v);
  }
  if (static_cast<int>(order.size()) != D) throw InvalidInput("ground truth graph has a cycle");
  return order;
}

nlohmann::json GroundTruthGraph::to_json() const {
  nlohmann::json j = graph_to_json(observed_adjacency());
  const int d = observed_nodes();
  nlohmann::json coeffs = nlohmann::json::array(), degs = nlohmann::json::array();
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      if (adj(a, b)) {
        coeffs.push_back(coeff(a, b));
        degs.push_back(degree(a, b));
      }
  j["coefficients"] = coeffs;
  j["degrees"] = degs;
  if (d < nodes()) {
    nlohmann::json lat = nlohmann::json::array();
    for (int h = d; h < nodes(); ++h) {
      nlohmann::json children = nlohmann::json::array(), cs = nlohmann::json::array();
      for (int b = 0; b < d; ++b)
        if (adj(h, b)) {
          children.push_back(b);
          cs.push_back(coeff(h, b));
        }
      lat.push_back({{"children", children}, {"coefficients", cs}});
    }
    j["latent"] = lat;
  }
  return j;
}

void GenConfig::validate() const {
  if (D < 2) throw InvalidInput("D: need at least 2 nodes");
  if (edge_count < D - 1 || edge_count > D * (D - 1) / 2) {
    throw InvalidInput("edge_count: must lie in [D-1, D(D-1)/2]");
  }
  if (N < 1) throw InvalidInput("N: must be positive");
  if (!(noise_scale > 0.0)) throw InvalidInput("noise_scale: must be positive");
  if (!(int_low < int_high)) throw InvalidInput("int_low: must be below int_high");
}

nlohmann::json GenConfig::to_json() const {
  return {{"D", D},
          {"edge_count", edge_count},
          {"N", N},
          {"noise_scale", noise_scale},
          {"mechanism", mechanism == Mechanism::Linear ? "linear" : "polynomial"},
          {"intervention", intervention == InterventionKind::Perfect ? "perfect" : "imperfect"},
          {"latent", latent},
          {"interventions", interventions},
          {"int_low", int_low},
          {"int_high", int_high},
          {"seed", seed}};
}

GenConfig GenConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidInput("generate config: expected an object");
  GenConfig c;
  auto read = [&](const char* key, auto& out) {
    if (!j.contains(key)) return;
    try {
      out = j.at(key).get<std::remove_reference_t<decltype(out)>>();
    } catch (const nlohmann::json::exception&) {
      throw InvalidInput(std::string(key) + ": wrong type");
    }
  };
  std::string mech = c.mechanism == Mechanism::Linear ? "linear" : "polynomial";
  std::string kind = c.intervention == InterventionKind::Perfect ? "perfect" : "imperfect";
  read("D", c.D);
  read("edge_count", c.edge_count);
  read("N", c.N);
  read("noise_scale", c.noise_scale);
  read("mechanism", mech);
  read("intervention", kind);
  read("latent", c.latent);
  read("interventions", c.interventions);
  read("int_low", c.int_low);
  read("int_high", c.int_high);
  read("seed", c.seed);
  if (mech == "linear") c.mechanism = Mechanism::Linear;
  else if (mech == "polynomial") c.mechanism = Mechanism::Polynomial;
  else throw InvalidInput("mechanism: unknown value '" + mech + "'");
  if (kind == "perfect") c.intervention = InterventionKind::Perfect;
  else if (kind == "imperfect") c.intervention = InterventionKind::Imperfect;
  else throw InvalidInput("intervention: unknown value '" + kind + "'");
  c.validate();
  return c;
}

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

GroundTruthGraph sample_sf_dag(int D, int edge_count, std::mt19937_64& rng, Mechanism mech) {
  if (D < 1 || edge_count < std::max(0, D - 1) || edge_count > D * (D - 1) / 2) {
    throw InvalidInput("sample_sf_dag: infeasible edge count " + std::to_string(edge_count) +
                       " for D = " + std::to_string(D));
  }
  Eigen::MatrixXi und = Eigen::MatrixXi::Zero(D, D);
  std::vector<double> deg(D, 0.0);
  // preferential-attachment spanning tree
  for (int v = 1; v < D; ++v) {
    std::vector<double> w(deg.begin(), deg.begin() + v);
    for (double& x : w) x += 1.0;
    std::discrete_distribution<int> pick(w.begin(), w.end());
    const int u = pick(rng);
    und(u, v) = und(v, u) = 1;
    deg[u] += 1.0;
    deg[v] += 1.0;
  }
  for (int added = D - 1; added < edge_count; ++added) {
    std::vector<std::pair<int, int>> cand;
    std::vector<double> w;
    for (int a = 0; a < D; ++a)
      for (int b = a + 1; b < D; ++b)
        if (!und(a, b)) {
          cand.emplace_back(a, b);
          w.push_back((deg[a] + 1.0) * (deg[b] + 1.0));
        }
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    const auto [a, b] = cand[pick(rng)];
    und(a, b) = und(b, a) = 1;
    deg[a] += 1.0;
    deg[b] += 1.0;
  }
  std::vector<int> perm(D);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> rank(D);
  for (int k = 0; k < D; ++k) rank[perm[k]] = k;

  GroundTruthGraph g;
  g.adj = Adjacency::Zero(D, D);
  g.coeff = Eigen::MatrixXd::Zero(D, D);
  g.degree = Eigen::MatrixXi::Zero(D, D);
  g.hidden.assign(D, false);
  std::uniform_int_distribution<int> pick_deg(1, 3);
  for (int a = 0; a < D; ++a)
    for (int b = a + 1; b < D; ++b) {
      if (!und(a, b)) continue;
      const int from = rank[a] < rank[b] ? a : b;
      const int to = from == a ? b : a;
      g.adj(from, to) = 1;
      if (mech == Mechanism::Linear) {
        g.coeff(from, to) = signed_uniform(rng, 0.4, 1.0);
        g.degree(from, to) = 1;
      } else {
        g.coeff(from, to) = 0.8;
        g.degree(from, to) = pick_deg(rng);
      }
    }
  return g;
}

Eigen::MatrixXd sample_observational(const GroundTruthGraph& g, int N, double noise_scale,
                                     std::mt19937_64& rng) {
  const auto order = g.topological_order();
  std::normal_distribution<double> n01;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(N, g.nodes());
  for (int r = 0; r < N; ++r) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(g.nodes());
    for (int i : order) row(i) = mechanism(g, g.coeff, row, i) + noise_scale * n01(rng);
    x.row(r) = row;
  }
  return drop_hidden(g, x);
}

Eigen::MatrixXd sample_interventional(const GroundTruthGraph& g, int target, int N,
                                      InterventionKind kind, double noise_scale,
                                      std::mt19937_64& rng, double low, double high) {
  if (target < 0 || target >= g.observed_nodes()) throw InvalidInput("intervention target out of range");
  const auto order = g.topological_order();
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> uni(low, high);
  bool is_root = true;
  for (int j = 0; j < g.nodes(); ++j)
    if (g.adj(j, target)) is_root = false;
  const bool replace = kind == InterventionKind::Perfect || is_root;
  Eigen::MatrixXd coeff = g.coeff;
  if (!replace) {
    for (int j = 0; j < g.nodes(); ++j)
      if (g.adj(j, target)) coeff(j, target) = signed_uniform(rng, 1.2, 2.0);
  }
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(N, g.nodes());
  for (int r = 0; r < N; ++r) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(g.nodes());
    for (int i : order) {
      if (i == target && replace) {
        row(i) = uni(rng);
      } else {
        row(i) = mechanism(g, coeff, row, i) + noise_scale * n01(rng);
      }
    }
    x.row(r) = row;
  }
  return drop_hidden(g, x);
}

GroundTruthGraph add_latent_confounder(const GroundTruthGraph& g, std::mt19937_64& rng) {
  const int D = g.nodes();
  const int d = g.observed_nodes();
  if (d < 2) throw InvalidInput("latent confounder needs two observed nodes");
  GroundTruthGraph out;
  out.adj = Adjacency::Zero(D + 1, D + 1);
  out.coeff = Eigen::MatrixXd::Zero(D + 1, D + 1);
  out.degree = Eigen::MatrixXi::Zero(D + 1, D + 1);
  out.adj.topLeftCorner(D, D) = g.adj;
  out.coeff.topLeftCorner(D, D) = g.coeff;
  out.degree.topLeftCorner(D, D) = g.degree;
  out.hidden = g.hidden;
  out.hidden.push_back(true);
  std::vector<int> obs(d);
  std::iota(obs.begin(), obs.end(), 0);
  std::shuffle(obs.begin(), obs.end(), rng);
  for (int k = 0; k < 2; ++k) {
    out.adj(D, obs[k]) = 1;
    out.coeff(D, obs[k]) = signed_uniform(rng, 0.4, 1.0);
    out.degree(D, obs[k]) = 1;
  }
  return out;
}

Generated generate(const GenConfig& cfg) {
  cfg.validate();
  Generated out;
  auto grng = derived_rng(cfg.seed, kGraphStream);
  out.truth = sample_sf_dag(cfg.D, cfg.edge_count, grng, cfg.mechanism);
  if (cfg.latent) {
    auto lrng = derived_rng(cfg.seed, kLatentStream);
    out.truth = add_latent_confounder(out.truth, lrng);
  }
  auto orng = derived_rng(cfg.seed, kObsStream);
  out.data.obs = sample_observational(out.truth, cfg.N, cfg.noise_scale, orng);
  if (cfg.interventions) {
    for (int t = 0; t < cfg.D; ++t) {
      auto irng = derived_rng(cfg.seed, kIntStream + static_cast<std::uint64_t>(t));
      out.data.ints.push_back({t, sample_interventional(out.truth, t, cfg.N, cfg.intervention,
                                                        cfg.noise_scale, irng, cfg.int_low,
                                                        cfg.int_high)});
    }
  }
  return out;
}

void write_truth_json(const GroundTruthGraph& g, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << g.to_json().dump(2) << '\n';
  if (!f) throw IoError("write failed: " + path);
}

}  // namespace cpop
