#pragma once

#include "bfc/state.hpp"

#include <cstdint>
#include <vector>

namespace bfc {

/// Perturbation of the two controls, same layout as ControlPair::v1/v2.
struct ControlDirection {
  BoundaryFunction pressure;
  BoundaryFunction heat_flux;
};

ControlDirection zero_direction(const Domain& d, int nt);
/// Uniform entries in [-1, 1], reproducible from the seed.
ControlDirection random_direction(const Domain& d, int nt, std::uint64_t seed);
ControlDirection scaled(const ControlDirection& dv, double s);
/// controls + eps * dv, bounds untouched.
ControlPair displaced(const ControlPair& controls, const ControlDirection& dv, double eps);

/// Linearized states g (velocity) and eta (temperature) at levels 0..nt.
struct TangentTrajectory {
  std::vector<VelocityField> velocity;
  std::vector<ScalarField> temperature;
};

/// Exact derivative of StateSolver::step along dv, with coefficients frozen
/// at the base trajectory. g(0) = 0 and eta(0) = 0.
TangentTrajectory solve_tangent(const StateSolver& solver, const StateTrajectory& base, const ControlDirection& dv);

/// Adjoint states at levels 0..nt, attached to the step they leave: p[m], q[m]
/// belong to the step m -> m+1, and p[nt] = q[nt] = 0.
struct AdjointTrajectory {
  std::vector<VelocityField> velocity;
  std::vector<ScalarField> temperature;
  /// p.n on Gamma1 and trace(q) on Gamma2, one slot per step.
  BoundaryFunction velocity_normal;
  BoundaryFunction temperature_trace;
  /// Relative residual of the time-continuous adjoint equations evaluated on
  /// the discrete adjoint (diagnostic only).
  double residual_velocity = 0.0;
  double residual_temperature = 0.0;
  /// max_m |z_m|_inf of the base trajectory, logged as a regularity proxy.
  double base_sup_norm = 0.0;
};

/// Reverse sweep through the transposed tangent steps. The cost sources
/// carry N1 and N2, so the result differentiates the full J.
AdjointTrajectory solve_adjoint(const StateSolver& solver, const StateTrajectory& base, const CostWeights& weights);

/// Riesz representatives of dJ with respect to the pairing
/// sum_steps sum_faces dt |face| grad * dv.
struct CostGradient {
  BoundaryFunction pressure;
  BoundaryFunction heat_flux;
};

/// dJ/dv1 = kAdjointGradientSign * p.n and dJ/dv2 = kAdjointGradientSign * trace(q)
/// (+ the direct term -N2 r2/k for the flux objective).
inline constexpr double kAdjointGradientSign = -1.0;

CostGradient assemble_gradient(const StateSolver& solver, const AdjointTrajectory& adj, const CostWeights& weights,
                               bool include_direct_term = true);

/// Switching functions s_i = -grad_i / N_i: the optimal control sits at beta_i
/// where s_i > 0 and at alpha_i where s_i < 0.
CostGradient switching_functions(const CostGradient& grad, const CostWeights& weights);

/// Pairing of the gradient with a direction.
double pair(const Domain& d, double dt, const CostGradient& grad, const ControlDirection& dv);

/// N1 sum_m tau_m dt <H1 r1, g_m> + N2 sum_m tau_m dt <H2 r2, eta_m>.
double state_pairing(const StateSolver& solver, const TangentTrajectory& tangent, const CostWeights& weights);
/// Full dJ[dv]: the state pairing plus the direct flux-form term.
double directional_derivative(const StateSolver& solver, const StateTrajectory& base, const ControlDirection& dv,
                              const CostWeights& weights);

/// |primal - adjoint| / max(1, |primal|) with the primal side from the tangent
/// and the adjoint side from the gradient without direct terms.
double duality_check(const StateSolver& solver, const StateTrajectory& base, const ControlDirection& dv,
                     const CostWeights& weights);
/// Same, with the adjoint computed on a separate (possibly stale) trajectory.
double duality_check(const StateSolver& solver, const StateTrajectory& base, const StateTrajectory& adjoint_base,
                     const ControlDirection& dv, const CostWeights& weights);

struct GradientCheckRow {
  double epsilon = 0.0;
  double finite_difference = 0.0;
  double adjoint = 0.0;
  double error = 0.0;          ///< |fd - adjoint| / max(|fd|, |adjoint|)
  double roundoff = 0.0;       ///< estimated cancellation floor of the quotient
  double observed_order = 0.0; ///< against the previous row; 0 when not measured
  bool above_floor = false;
};

struct GradientCheckReport {
  std::vector<GradientCheckRow> rows;
  double cost = 0.0;
  double min_error = 0.0;
  bool order_ok = false;
  bool passed = false;
};

inline const std::vector<double> kDefaultEpsilons{1e-2, 5e-3, 1e-3, 5e-4, 1e-4, 5e-5, 1e-5};

/// Central differences of J along dv against the adjoint pairing. PASS iff
/// the smallest error is <= 1e-4 and every pair of rows above the roundoff
/// floor shows an observed order in [1.5, 2.5] (vacuous when every row is
/// already at roundoff). gradient_sign = -1 flips the
/// adjoint gradient (sanity check of the check).
GradientCheckReport gradient_check(const StateSolver& solver, const VelocityField& z0, const ScalarField& w0,
                                   const ControlPair& controls, const CostWeights& weights,
                                   const ControlDirection& dv, const std::vector<double>& epsilons = kDefaultEpsilons,
                                   double gradient_sign = 1.0);

}  // namespace bfc
