#pragma once

#include "bfc/optimizer.hpp"

#include <vector>

namespace bfc {

struct OracleEntry {
  Eigen::VectorXd theta;
  double J = 0.0;
};

struct OracleResult {
  std::vector<OracleEntry> table;  ///< enumeration order, last parameter fastest
  int best_index = 0;
  double best_J = 0.0;
  Eigen::VectorXd best_theta;
};

/// Exhaustive forward solves over a tensor grid of `levels` equispaced values
/// per parameter (bounds included). Ties keep the first entry in enumeration
/// order. Throws ValidationError for more than 4 parameters, levels outside
/// [2, 9] or more than 10^4 combinations.
OracleResult brute_force_oracle(const ReducedProblem& problem, const ControlSpace& space, int levels);

}  // namespace bfc
