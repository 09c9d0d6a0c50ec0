#pragma once

#include "bfc/config.hpp"

#include <cmath>

namespace bfc::test {

inline Domain unit_square(int n = 8) {
  GeometryConfig g;
  g.nx = n;
  g.ny = n;
  return build_domain(g);
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

/// Default problem with a few fields overridden.
inline Problem make_problem(const std::function<void(RunConfig&)>& edit = {}) {
  RunConfig c = default_config();
  if (edit) edit(c);
  return build_problem(c);
}

/// beta = 0, r1 = 0, flux objective: J is affine in the controls.
inline void linear_case(RunConfig& c) {
  c.physics.expansion = 0.0;
  c.cost.outflow_profile.clear();
  c.cost.form = ObjectiveForm::Flux;
}

}  // namespace bfc::test
