#pragma once

// Observational plus single-target interventional samples, and the CSV
// layout shared by the generator and the learner.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cpop {

struct InterventionBlock {
  int target = 0;
  Eigen::MatrixXd data;
};

struct Dataset {
  Eigen::MatrixXd obs;
  std::vector<InterventionBlock> ints;

  int nodes() const;
  // Checks column counts, targets and the one-block-per-target rule.
  void validate() const;
  // Copy restricted to the observational regime only.
  Dataset observational_only() const;
};

// CSV: header X1..XD,target; target 0 is observational, k is an
// intervention on node k-1. Doubles are written in shortest round-trip
// form so reading back is bit-exact.
void write_dataset_csv(const Dataset& ds, const std::string& path);
Dataset read_dataset_csv(const std::string& path);

std::string format_double(double v);

}  // namespace cpop
