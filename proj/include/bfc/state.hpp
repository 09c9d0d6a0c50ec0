#pragma once

#include "bfc/forms.hpp"
#include "bfc/grid.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/IterativeLinearSolvers>

#include <memory>
#include <vector>

namespace bfc {

struct TimeGrid {
  double T = 1.0;
  int nt = 10;

  double dt() const { return T / nt; }
  void validate() const;
};

/// Controls are piecewise constant per boundary face and per time step:
/// slot m of v1/v2 acts on the step from t_m to t_{m+1} (num_times = nt, or 1
/// for time-constant data).
struct ControlPair {
  BoundaryFunction pressure;   ///< total pressure on Gamma1
  BoundaryFunction heat_flux;  ///< outward heat flux on Gamma2
  BoundaryFunction pressure_min, pressure_max, heat_flux_min, heat_flux_max;
};

/// Constant controls and bounds, expanded to nt time slots.
ControlPair make_controls(const Domain& d, int nt, double pressure, double heat_flux, double pressure_min,
                          double pressure_max, double heat_flux_min, double heat_flux_max);
/// Throws ValidationError unless 0 < alpha_i <= beta_i pointwise.
void validate_bounds(const ControlPair& v);
bool is_admissible(const ControlPair& v, double tol = 0.0);

enum class ObjectiveForm { Trace, Flux };

/// J = N1 int int r1 z.n + N2 int int r2 (trace of w | dw/dn). r1, r2 are given
/// per time level (num_times = nt + 1, or 1 for time-constant weights).
struct CostWeights {
  double outflow_weight = 1.0;
  double heat_weight = 1.0;
  BoundaryFunction outflow_profile;
  BoundaryFunction heat_profile;
  ObjectiveForm form = ObjectiveForm::Trace;

  void validate() const;
};

struct StateTrajectory {
  double dt = 0.0;
  std::vector<VelocityField> velocity;  ///< levels 0..nt
  std::vector<ScalarField> temperature;
  std::vector<ScalarField> total_pressure;  ///< pi + |z|^2/2 (level 0 is zero)
  std::vector<double> kinetic_energy;
  std::vector<double> thermal_energy;
  std::vector<double> max_divergence;
  std::vector<double> cfl;  ///< dt / CFL limit, per step

  int num_steps() const { return static_cast<int>(velocity.size()) - 1; }
  /// Static pressure pi = P - |z|^2/2 at cell centers, for output.
  ScalarField static_pressure(int level, const Domain& d) const;
};

struct SolveOptions {
  bool enforce_bounds = true;        ///< false: simulation mode, any controls accepted
  bool allow_cfl_violation = false;  ///< turn the CFL abort into a no-op
};

/// SPD solve: sparse LDL^T up to 64x64 cells, conjugate gradients (tol 1e-12) above.
class SpdSolver {
 public:
  SpdSolver() = default;
  SpdSolver(const SparseMatrix& A, bool direct);
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

 private:
  bool direct_ = true;
  std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> ldlt_;
  std::shared_ptr<Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper>> cg_;
};

/// First-order IMEX stepper for the Boussinesq system with total-pressure
/// control on Gamma1 and heat-flux control on Gamma2.
///
/// One step from (z, w) with controls (v1, v2):
///   1. (M + dt nu A1) z* = M z - dt B(z, z) - dt beta (xi w, .)
///   2. z' = Pi(z* - dt M^{-1} H1 v1), Pi the M-orthogonal projection onto
///      discretely divergence-free fields; the Poisson multiplier is the total
///      pressure P with P = v1 on Gamma1 faces and dP/dn = 0 on Gamma2
///   3. (M_c + dt k A2) w' = M_c w - dt C(z', w) - dt H2 v2
/// All implicit matrices are symmetric and constant, factorized once.
///
/// The weak form here carries the Gamma1 lift with the sign that makes P the
/// Dirichlet datum of the pressure (higher v1 pushes fluid inward), and the
/// Gamma2 lift with the sign of the outward flux -k dw/dn = v2.
class StateSolver {
 public:
  StateSolver(std::shared_ptr<const DiscreteForms> forms, PhysicalParams params, TimeGrid time);

  const DiscreteForms& forms() const { return *forms_; }
  const Domain& domain() const { return forms_->domain(); }
  const PhysicalParams& params() const { return params_; }
  const TimeGrid& time() const { return time_; }
  double dt() const { return time_.dt(); }

  struct StepResult {
    VelocityField velocity;
    ScalarField temperature;
    ScalarField total_pressure;
  };

  /// One IMEX step; v1/v2 hold face values of the step's control slot.
  StepResult step(const VelocityField& z, const ScalarField& w, const Eigen::VectorXd& pressure,
                  const Eigen::VectorXd& heat_flux) const;

  StateTrajectory solve_forward(const VelocityField& z0, const ScalarField& w0, const ControlPair& controls,
                                const SolveOptions& options = {}) const;

  /// dt bound 0.5 min(h/|z|_inf, h^2/(4 nu), h^2/(4 k)).
  double cfl_limit(double zmax) const;

  // Linear building blocks shared with the tangent and adjoint sweeps. Vectors
  // are in the full velocity layout with fixed entries equal to zero.
  Eigen::VectorXd mask(Eigen::VectorXd x) const;
  Eigen::VectorXd apply_mass_inverse(const Eigen::VectorXd& x) const;
  /// (M + dt nu A1)^{-1} on free entries.
  Eigen::VectorXd solve_predictor(const Eigen::VectorXd& rhs) const;
  /// Pi x; optionally returns the multiplier phi with Pi x = x + M^{-1} D^T phi.
  Eigen::VectorXd project(const Eigen::VectorXd& x, Eigen::VectorXd* multiplier = nullptr) const;
  Eigen::VectorXd project_transpose(const Eigen::VectorXd& x) const;
  /// (M_c + dt k A2)^{-1}.
  Eigen::VectorXd solve_temperature(const Eigen::VectorXd& rhs) const;
  /// Initial velocity: constraints applied, projected when |div| > 1e-10.
  VelocityField prepare_initial_velocity(const VelocityField& z0) const;

 private:
  std::shared_ptr<const DiscreteForms> forms_;
  PhysicalParams params_;
  TimeGrid time_;
  SparseMatrix select_;            // free-entry selection
  Eigen::VectorXd free_mass_inv_;  // M^{-1} on free entries
  SparseMatrix div_free_;          // D restricted to free entries
  SpdSolver predictor_, poisson_, temperature_;
  bool pin_pressure_ = false;
};

/// Trapezoidal-in-time, midpoint-in-space cost.
double evaluate_cost(const StateTrajectory& traj, const ControlPair& controls, const CostWeights& weights,
                     const StateSolver& solver);

/// Sum over steps and faces of dt |face| a b for per-step boundary data.
double control_pairing(const Domain& d, double dt, int nt, const BoundaryFunction& a, const BoundaryFunction& b);

}  // namespace bfc
