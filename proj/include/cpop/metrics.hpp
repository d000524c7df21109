#pragma once

// Structural Hamming distance and true positive rate between directed
// graphs. A reversed edge costs one edit.

#include <cstddef>

#include <json.hpp>

#include "cpop/graph.hpp"

namespace cpop {

struct EvalReport {
  int shd = 0;
  double tpr = 0.0;
  int tp = 0;
  int fp = 0;
  int fn = 0;
  int reversed = 0;
  int true_edges = 0;
  bool empty_truth = false;  // tpr defined as 1 on an empty truth
  nlohmann::json config;

  nlohmann::json to_json() const;
};

int shd(const Adjacency& est, const Adjacency& truth);
double tpr(const Adjacency& est, const Adjacency& truth);
EvalReport evaluate(const Adjacency& est, const Adjacency& truth);

}  // namespace cpop
