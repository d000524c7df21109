#pragma once

// Synthetic benchmark generator: scale-free DAGs, linear or single-monomial
// polynomial mechanisms, perfect or imperfect single-target interventions
// and an optional hidden common cause.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cpop/dataset.hpp"
#include "cpop/graph.hpp"

namespace cpop {

enum class Mechanism { Linear, Polynomial };
enum class InterventionKind { Perfect, Imperfect };

// Nodes flagged hidden are sampled but never emitted; they always come
// after the observed nodes.
struct GroundTruthGraph {
  Adjacency adj;
  Eigen::MatrixXd coeff;   // coeff(j, i) for j -> i
  Eigen::MatrixXi degree;  // monomial degree per edge
  std::vector<bool> hidden;

  int nodes() const { return static_cast<int>(adj.rows()); }
  int observed_nodes() const;
  Adjacency observed_adjacency() const;
  std::vector<int> topological_order() const;
  nlohmann::json to_json() const;
};

struct GenConfig {
  int D = 5;
  int edge_count = 8;
  int N = 300;
  double noise_scale = 0.4;
  Mechanism mechanism = Mechanism::Linear;
  InterventionKind intervention = InterventionKind::Perfect;
  bool latent = false;
  bool interventions = true;  // one regime per observed node
  double int_low = -2.0;
  double int_high = 2.0;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults; bad values throw InvalidInput naming
  // the field.
  static GenConfig from_json(const nlohmann::json& j);
};

// Stream derived from (seed, stream id); regimes use distinct ids so each
// can be sampled independently.
std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream);

GroundTruthGraph sample_sf_dag(int D, int edge_count, std::mt19937_64& rng,
                               Mechanism mech = Mechanism::Linear);
Eigen::MatrixXd sample_observational(const GroundTruthGraph& g, int N, double noise_scale,
                                     std::mt19937_64& rng);
Eigen::MatrixXd sample_interventional(const GroundTruthGraph& g, int target, int N,
                                      InterventionKind kind, double noise_scale,
                                      std::mt19937_64& rng, double low = -2.0, double high = 2.0);
// Appends one hidden source node with two observed children.
GroundTruthGraph add_latent_confounder(const GroundTruthGraph& g, std::mt19937_64& rng);

struct Generated {
  GroundTruthGraph truth;
  Dataset data;  // hidden columns dropped
};

Generated generate(const GenConfig& cfg);

void write_truth_json(const GroundTruthGraph& g, const std::string& path);

}  // namespace cpop
