#include "bfc/state.hpp"

#include "bfc/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace bfc {

namespace {

constexpr int kDirectCellLimit = 64 * 64;
constexpr double kDivergenceTolerance = 1e-10;

double trapezoid_weight(int level, int nt) { return (level == 0 || level == nt) ? 0.5 : 1.0; }

void check_slots(const BoundaryFunction& f, int expected, const char* what) {
  if (f.num_times != 1 && f.num_times != expected) {
    throw ValidationError(fmt::format("{} has {} time slots, expected 1 or {}", what, f.num_times, expected));
  }
}

}  // namespace

void TimeGrid::validate() const {
  if (!(T > 0.0)) throw ValidationError("time horizon T > 0 required");
  if (nt < 1) throw ValidationError("nt >= 1 required");
}

ControlPair make_controls(const Domain& d, int nt, double v1, double v2, double alpha1, double beta1, double alpha2,
                          double beta2) {
  ControlPair c;
  c.pressure = BoundaryFunction::constant(d, Part::Gamma1, nt, v1);
  c.heat_flux = BoundaryFunction::constant(d, Part::Gamma2, nt, v2);
  c.pressure_min = BoundaryFunction::constant(d, Part::Gamma1, nt, alpha1);
  c.pressure_max = BoundaryFunction::constant(d, Part::Gamma1, nt, beta1);
  c.heat_flux_min = BoundaryFunction::constant(d, Part::Gamma2, nt, alpha2);
  c.heat_flux_max = BoundaryFunction::constant(d, Part::Gamma2, nt, beta2);
  return c;
}

void validate_bounds(const ControlPair& v) {
  auto check = [](const BoundaryFunction& lo, const BoundaryFunction& hi, const BoundaryFunction& ref,
                  const char* name) {
    for (int t = 0; t < ref.num_times; ++t) {
      for (int k = 0; k < ref.num_faces; ++k) {
        const double a = lo.get(t, k), b = hi.get(t, k);
        if (!(a > 0.0)) throw ValidationError(fmt::format("admissible set for {}: alpha > 0 required", name));
        if (!(a <= b)) {
          throw ValidationError(fmt::format("admissible set for {}: alpha <= beta violated at face {} slot {}", name, k, t));
        }
      }
    }
  };
  check(v.pressure_min, v.pressure_max, v.pressure, "v1");
  check(v.heat_flux_min, v.heat_flux_max, v.heat_flux, "v2");
}

bool is_admissible(const ControlPair& v, double tol) {
  auto inside = [tol](const BoundaryFunction& x, const BoundaryFunction& lo, const BoundaryFunction& hi) {
    for (int t = 0; t < x.num_times; ++t) {
      for (int k = 0; k < x.num_faces; ++k) {
        if (x.at(t, k) < lo.get(t, k) - tol || x.at(t, k) > hi.get(t, k) + tol) return false;
      }
    }
    return true;
  };
  return inside(v.pressure, v.pressure_min, v.pressure_max) && inside(v.heat_flux, v.heat_flux_min, v.heat_flux_max);
}

void CostWeights::validate() const {
  if (!(outflow_weight > 0.0) || !(heat_weight > 0.0)) throw ValidationError("cost weights N1, N2 > 0 required");
  if (outflow_profile.part != Part::Gamma1 || heat_profile.part != Part::Gamma2) {
    throw ValidationError("cost profiles: r1 lives on Gamma1, r2 on Gamma2");
  }
}

ScalarField StateTrajectory::static_pressure(int level, const Domain& d) const {
  ScalarField pi = total_pressure.at(level);
  const auto& x = velocity.at(level).values;
  for (int i = 0; i < d.nx(); ++i) {
    for (int j = 0; j < d.ny(); ++j) {
      const double uc = 0.5 * (x[d.u_index(i, j + 1)] + x[d.u_index(i + 1, j + 1)]);
      const double vc = 0.5 * (x[d.v_index(i + 1, j)] + x[d.v_index(i + 1, j + 1)]);
      pi.values[d.cell_index(i, j)] -= 0.5 * (uc * uc + vc * vc);
    }
  }
  return pi;
}

SpdSolver::SpdSolver(const SparseMatrix& A, bool direct) : direct_(direct) {
  if (direct_) {
    ldlt_ = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>(A);
    if (ldlt_->info() != Eigen::Success) throw NumericalError("sparse LDL^T factorization failed");
  } else {
    cg_ = std::make_shared<Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper>>();
    cg_->setTolerance(1e-12);
    cg_->setMaxIterations(static_cast<Eigen::Index>(10 * A.rows()));
    cg_->compute(A);
  }
}

Eigen::VectorXd SpdSolver::solve(const Eigen::VectorXd& rhs) const {
  if (direct_) return ldlt_->solve(rhs);
  Eigen::VectorXd x = cg_->solve(rhs);
  if (cg_->info() != Eigen::Success) {
    throw NumericalError(fmt::format("conjugate gradients did not converge (residual {:.3e})", cg_->error()));
  }
  return x;
}

StateSolver::StateSolver(std::shared_ptr<const DiscreteForms> forms, PhysicalParams params, TimeGrid time)
    : forms_(std::move(forms)), params_(std::move(params)), time_(time) {
  params_.validate();
  time_.validate();
  const Domain& d = domain();
  const bool direct = d.num_cells() <= kDirectCellLimit;
  const double dt = time_.dt();

  select_ = forms_->free_selection();
  const Eigen::VectorXd free_mass = select_ * d.velocity_weights();
  free_mass_inv_ = free_mass.cwiseInverse();

  SparseMatrix mass(free_mass.size(), free_mass.size());
  mass.setIdentity();
  mass = free_mass.asDiagonal() * mass;
  const SparseMatrix A1f = select_ * forms_->viscous_matrix() * select_.transpose();
  predictor_ = SpdSolver(SparseMatrix(mass + dt * params_.viscosity * A1f), direct);

  div_free_ = forms_->divergence_matrix() * select_.transpose();
  SparseMatrix L = div_free_ * free_mass_inv_.asDiagonal() * div_free_.transpose();
  pin_pressure_ = d.part_faces(Part::Gamma1).empty();
  if (pin_pressure_) {
    // Closed cavity: pressure is defined up to a constant, fix cell 0.
    std::vector<Eigen::Triplet<double>> t;
    for (int c = 0; c < L.outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(L, c); it; ++it) {
        if (it.row() != 0 && it.col() != 0) t.emplace_back(it.row(), it.col(), it.value());
      }
    }
    t.emplace_back(0, 0, 1.0);
    L.setZero();
    L.setFromTriplets(t.begin(), t.end());
  }
  poisson_ = SpdSolver(L, direct);

  SparseMatrix cmass(d.num_cells(), d.num_cells());
  cmass.setIdentity();
  temperature_ = SpdSolver(SparseMatrix(d.cell_weight() * cmass + dt * params_.conductivity * forms_->diffusion_matrix()), direct);
}

double StateSolver::cfl_limit(double zmax) const {
  const double h = std::min(domain().hx(), domain().hy());
  double lim = std::min(h * h / (4.0 * params_.viscosity), h * h / (4.0 * params_.conductivity));
  if (zmax > 0.0) lim = std::min(lim, h / zmax);
  return 0.5 * lim;
}

Eigen::VectorXd StateSolver::mask(Eigen::VectorXd x) const {
  const auto& m = domain().velocity_free_mask();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!m[i]) x[i] = 0.0;
  }
  return x;
}

Eigen::VectorXd StateSolver::apply_mass_inverse(const Eigen::VectorXd& x) const {
  return select_.transpose() * free_mass_inv_.cwiseProduct(select_ * x);
}

Eigen::VectorXd StateSolver::solve_predictor(const Eigen::VectorXd& rhs) const {
  return select_.transpose() * predictor_.solve(select_ * rhs);
}

Eigen::VectorXd StateSolver::project(const Eigen::VectorXd& x, Eigen::VectorXd* multiplier) const {
  const Eigen::VectorXd y = select_ * x;
  Eigen::VectorXd rhs = -(div_free_ * y);
  if (pin_pressure_) rhs[0] = 0.0;
  const Eigen::VectorXd phi = poisson_.solve(rhs);
  if (multiplier) *multiplier = phi;
  return select_.transpose() * (y + free_mass_inv_.cwiseProduct(div_free_.transpose() * phi));
}

Eigen::VectorXd StateSolver::project_transpose(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd y = select_ * x;
  Eigen::VectorXd rhs = div_free_ * free_mass_inv_.cwiseProduct(y);
  if (pin_pressure_) rhs[0] = 0.0;
  const Eigen::VectorXd phi = poisson_.solve(rhs);
  return select_.transpose() * (y - div_free_.transpose() * phi);
}

Eigen::VectorXd StateSolver::solve_temperature(const Eigen::VectorXd& rhs) const { return temperature_.solve(rhs); }

VelocityField StateSolver::prepare_initial_velocity(const VelocityField& z0) const {
  check_shape(z0, domain());
  VelocityField z{mask(z0.values)};
  if (divergence(z, domain()).values.lpNorm<Eigen::Infinity>() > kDivergenceTolerance) z.values = project(z.values);
  return z;
}

StateSolver::StepResult StateSolver::step(const VelocityField& z, const ScalarField& w, const Eigen::VectorXd& v1,
                                          const Eigen::VectorXd& v2) const {
  const Domain& d = domain();
  const DiscreteForms& f = *forms_;
  const double dt = time_.dt();
  if (v1.size() != d.part_size(Part::Gamma1) || v2.size() != d.part_size(Part::Gamma2)) {
    throw ValidationError("step: control slot sizes do not match the boundary partition");
  }

  Eigen::VectorXd rhs = d.velocity_weights().cwiseProduct(z.values) - dt * f.convection_force(z.values, z.values);
  if (params_.expansion != 0.0) rhs -= dt * params_.expansion * f.buoyancy(w.values);
  const Eigen::VectorXd zstar = solve_predictor(rhs);
  const Eigen::VectorXd lifted = zstar - dt * apply_mass_inverse(f.normal_trace_matrix().transpose() * v1);
  Eigen::VectorXd phi;
  StepResult out;
  out.velocity.values = project(lifted, &phi);
  out.total_pressure.values = phi / (dt * d.cell_weight());

  const Eigen::VectorXd wrhs = d.cell_weight() * w.values - dt * f.transport_force(out.velocity.values, w.values) -
                               dt * (f.heat_trace_matrix().transpose() * v2);
  out.temperature.values = solve_temperature(wrhs);
  return out;
}

StateTrajectory StateSolver::solve_forward(const VelocityField& z0, const ScalarField& w0, const ControlPair& controls,
                                           const SolveOptions& options) const {
  const Domain& d = domain();
  const int nt = time_.nt;
  check_shape(w0, d);
  check_shape(controls.pressure, d);
  check_shape(controls.heat_flux, d);
  check_slots(controls.pressure, nt, "v1");
  check_slots(controls.heat_flux, nt, "v2");
  if (options.enforce_bounds) {
    validate_bounds(controls);
    if (!is_admissible(controls)) throw ValidationError("controls violate their admissible bounds");
  }

  StateTrajectory traj;
  traj.dt = time_.dt();
  traj.velocity.reserve(nt + 1);
  traj.temperature.reserve(nt + 1);
  traj.total_pressure.reserve(nt + 1);
  traj.velocity.push_back(prepare_initial_velocity(z0));
  traj.temperature.push_back(w0);
  traj.total_pressure.push_back(zero_scalar(d));

  auto record = [&](const VelocityField& z, const ScalarField& w) {
    traj.kinetic_energy.push_back(0.5 * inner_product(z, z, d));
    traj.thermal_energy.push_back(0.5 * inner_product(w, w, d));
    traj.max_divergence.push_back(divergence(z, d).values.lpNorm<Eigen::Infinity>());
  };
  record(traj.velocity.back(), traj.temperature.back());

  for (int m = 0; m < nt; ++m) {
    const double zmax = traj.velocity.back().values.lpNorm<Eigen::Infinity>();
    const double limit = cfl_limit(zmax);
    traj.cfl.push_back(traj.dt / limit);
    if (traj.dt > limit * (1.0 + 1e-12) && !options.allow_cfl_violation) {
      throw NumericalError(fmt::format("CFL violation at step {}: dt = {:.4g} exceeds {:.4g}; use nt >= {}", m,
                                       traj.dt, limit, static_cast<long>(std::ceil(time_.T / limit))));
    }
    auto next = step(traj.velocity.back(), traj.temperature.back(), controls.pressure.slot(m), controls.heat_flux.slot(m));
    if (!next.velocity.values.allFinite() || !next.temperature.values.allFinite()) {
      throw NumericalError(fmt::format("state became non-finite at step {}", m));
    }
    traj.velocity.push_back(std::move(next.velocity));
    traj.temperature.push_back(std::move(next.temperature));
    traj.total_pressure.push_back(std::move(next.total_pressure));
    record(traj.velocity.back(), traj.temperature.back());
  }
  return traj;
}

double evaluate_cost(const StateTrajectory& traj, const ControlPair& controls, const CostWeights& weights,
                     const StateSolver& solver) {
  const Domain& d = solver.domain();
  const DiscreteForms& f = solver.forms();
  const int nt = traj.num_steps();
  if (nt != solver.time().nt) throw ValidationError("evaluate_cost: trajectory and time grid disagree");
  check_slots(weights.outflow_profile, nt + 1, "r1");
  check_slots(weights.heat_profile, nt + 1, "r2");
  const double dt = traj.dt;

  double flow = 0.0, heat = 0.0;
  for (int m = 0; m <= nt; ++m) {
    const double tw = trapezoid_weight(m, nt) * dt;
    flow += tw * weights.outflow_profile.slot(m).dot(f.normal_trace_matrix() * traj.velocity[m].values);
    if (weights.form == ObjectiveForm::Trace) {
      heat += tw * weights.heat_profile.slot(m).dot(f.heat_trace_matrix() * traj.temperature[m].values);
    }
  }
  if (weights.form == ObjectiveForm::Flux) {
    // dw/dn = -v2/k on Gamma2; r2 averaged over each control step.
    const auto& ids = d.part_faces(Part::Gamma2);
    for (int m = 0; m < nt; ++m) {
      for (int k = 0; k < static_cast<int>(ids.size()); ++k) {
        const double rbar = 0.5 * (weights.heat_profile.get(m, k) + weights.heat_profile.get(m + 1, k));
        heat += dt * d.faces()[ids[k]].length * rbar * (-controls.heat_flux.get(m, k) / solver.params().conductivity);
      }
    }
  }
  return weights.outflow_weight * flow + weights.heat_weight * heat;
}

double control_pairing(const Domain& d, double dt, int nt, const BoundaryFunction& a, const BoundaryFunction& b) {
  if (a.part != b.part) throw ValidationError("control_pairing: different boundary parts");
  const auto& ids = d.part_faces(a.part);
  double s = 0.0;
  for (int m = 0; m < nt; ++m) {
    for (int k = 0; k < static_cast<int>(ids.size()); ++k) s += dt * d.faces()[ids[k]].length * a.get(m, k) * b.get(m, k);
  }
  return s;
}

}  // namespace bfc
