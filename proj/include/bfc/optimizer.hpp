#pragma once

#include "bfc/adjoint.hpp"
#include "bfc/state.hpp"

#include <memory>
#include <string>
#include <vector>

namespace bfc {

/// Pointwise clip of v1 to [alpha1, beta1] and v2 to [alpha2, beta2].
ControlPair project_admissible(const ControlPair& v);

/// sup over admissible mu of N1 sum s1 (mu1 - v1) + N2 sum s2 (mu2 - v2),
/// with the same dt |face| quadrature as the control pairing.
double optimality_residual(const Domain& d, double dt, const ControlPair& v, const CostGradient& switching,
                           const CostWeights& weights);

/// beta where s > tie_tol, alpha where s < -tie_tol, the box midpoint in between.
ControlPair bang_bang_control(const CostGradient& switching, const ControlPair& bounds, double tie_tol = 0.0);

/// Forward solve, cost and adjoint gradient for one control.
class ReducedProblem {
 public:
  ReducedProblem(std::shared_ptr<const StateSolver> solver, VelocityField z0, ScalarField w0, CostWeights weights,
                 SolveOptions options = {});

  struct Evaluation {
    double J = 0.0;
    StateTrajectory trajectory;
    AdjointTrajectory adjoint;
    CostGradient gradient;
    CostGradient switching;
  };

  double cost(const ControlPair& v) const;
  Evaluation evaluate(const ControlPair& v) const;

  const StateSolver& solver() const { return *solver_; }
  const Domain& domain() const { return solver_->domain(); }
  const CostWeights& weights() const { return weights_; }
  const VelocityField& initial_velocity() const { return z0_; }
  const ScalarField& initial_temperature() const { return w0_; }

 private:
  std::shared_ptr<const StateSolver> solver_;
  VelocityField z0_;
  ScalarField w0_;
  CostWeights weights_;
  SolveOptions options_;
};

/// Finite-dimensional control parametrization. Every (step, face) entry of v1
/// and v2 is owned by one parameter; the parameter space carries the measure
/// weights sum dt |face| of its entries, so gradients are Riesz
/// representatives in the same pairing as the full controls.
class ControlSpace {
 public:
  /// One parameter per step and face.
  static ControlSpace full(const Domain& d, const ControlPair& reference, const TimeGrid& time);
  /// Three parameters: v1 on the left side of Gamma1 (inlet), v1 on the rest
  /// of Gamma1 (outlet), v2 on Gamma2 (walls). Bounds must be constant on
  /// each group.
  static ControlSpace coarse3(const Domain& d, const ControlPair& reference, const TimeGrid& time);

  int size() const { return static_cast<int>(lower_.size()); }
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }
  const Eigen::VectorXd& measure() const { return measure_; }
  Part part(int j) const { return parts_[j]; }
  const std::vector<std::string>& names() const { return names_; }

  ControlPair expand(const Eigen::VectorXd& theta) const;
  /// Measure-weighted average of v over each parameter's entries.
  Eigen::VectorXd restrict(const ControlPair& v) const;
  /// Representative of the gradient in the weighted parameter metric.
  Eigen::VectorXd pullback(const CostGradient& grad) const;
  Eigen::VectorXd project(const Eigen::VectorXd& theta) const;
  /// Closed-form sup of <-grad, mu - theta> over the box.
  double residual(const Eigen::VectorXd& theta, const Eigen::VectorXd& grad) const;
  /// Box vertex minimizing the linearization; ties go to the midpoint.
  Eigen::VectorXd vertex(const Eigen::VectorXd& grad) const;

  struct BoundFractions {
    double lower = 0.0;
    double upper = 0.0;
    double interior = 0.0;
  };
  BoundFractions fractions(const Eigen::VectorXd& theta) const;

 private:
  ControlPair reference_;
  int nt_ = 0;
  int n1_ = 0;
  std::vector<int> owner_;
  Eigen::VectorXd entry_weight_;
  Eigen::VectorXd lower_, upper_, measure_;
  std::vector<Part> parts_;
  std::vector<std::string> names_;
};

enum class Method { ProjectedGradient, ConditionalGradient };

struct OptimizerOptions {
  Method method = Method::ProjectedGradient;
  double tol_rel = 1e-6;
  int max_iter = 200;
  double armijo_c = 1e-4;
  double sigma0 = 1.0;
  int max_backtracks = 40;
  /// Relative band |s| <= tie_rel * max|s| excluded from the bang-bang audit.
  double tie_rel = 1e-6;
};

struct IterationRecord {
  int iter = 0;
  double J = 0.0;
  double residual = 0.0;
  double step_size = 0.0;
  double frac_lower = 0.0;
  double frac_upper = 0.0;
  double frac_interior = 0.0;
};

struct PartSwitching {
  double positive = 0.0;  ///< measure fraction with s > tol
  double negative = 0.0;  ///< s < -tol
  double tie = 0.0;       ///< |s| <= tol
  double agreement = 1.0; ///< fraction of {|s| > tol} at the sign-dictated bound
};

struct SwitchingReport {
  double tol = 0.0;
  PartSwitching pressure;
  PartSwitching heat_flux;
  double agreement = 1.0;
  bool bang_bang_verified = false;
};

/// Sign structure of the switching functions against a control.
SwitchingReport switching_report(const Domain& d, double dt, const CostGradient& switching, const ControlPair& v,
                                 double tol, double tol_frac = 0.0);

struct OptimizationReport {
  std::vector<IterationRecord> history;
  Eigen::VectorXd theta;
  ControlPair control;
  CostGradient switching;
  SwitchingReport switching_stats;
  double J = 0.0;
  double residual = 0.0;
  double initial_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string termination;
};

OptimizationReport projected_gradient_solve(const ReducedProblem& problem, const ControlSpace& space,
                                            const Eigen::VectorXd& theta0, const OptimizerOptions& options = {});
OptimizationReport conditional_gradient_solve(const ReducedProblem& problem, const ControlSpace& space,
                                              const Eigen::VectorXd& theta0, const OptimizerOptions& options = {});
OptimizationReport optimize(const ReducedProblem& problem, const ControlSpace& space, const Eigen::VectorXd& theta0,
                            const OptimizerOptions& options = {});

}  // namespace bfc
