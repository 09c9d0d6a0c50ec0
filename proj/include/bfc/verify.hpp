#pragma once

#include "bfc/forms.hpp"
#include "bfc/state.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace bfc {

/// Uniform [-1, 1] entries with the admissibility constraints applied.
VelocityField random_admissible_velocity(const Domain& d, std::mt19937_64& rng);
/// Random admissible field projected onto discretely divergence-free fields.
VelocityField random_solenoidal_velocity(const StateSolver& solver, std::mt19937_64& rng);
ScalarField random_scalar(const Domain& d, std::mt19937_64& rng);

struct PropertyCheck {
  std::string name;
  double value = 0.0;      ///< worst observed quantity
  double tolerance = 0.0;  ///< pass iff value <= tolerance
  bool passed = false;
};

/// Randomized battery for the discrete forms: skew-symmetry and
/// antisymmetry of b and c, trilinearity, coercivity against the computed
/// constants, symmetric a1/a2 matrices, exact values on linear fields and
/// the divergence of projected fields.
std::vector<PropertyCheck> verify_forms(const StateSolver& solver, const CoercivityConstants& constants, int samples,
                                        std::uint64_t seed);

}  // namespace bfc
