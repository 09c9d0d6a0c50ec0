#include "bfc/adjoint.hpp"

#include "bfc/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <random>

namespace bfc {

namespace {

double trapezoid(int level, int nt) { return (level == 0 || level == nt) ? 0.5 : 1.0; }

void check_direction(const ControlDirection& dv, const Domain& d, int nt) {
  check_shape(dv.pressure, d);
  check_shape(dv.heat_flux, d);
  if (dv.pressure.part != Part::Gamma1 || dv.heat_flux.part != Part::Gamma2) throw ValidationError("direction parts are swapped");
  for (const auto* f : {&dv.pressure, &dv.heat_flux}) {
    if (f->num_times != 1 && f->num_times != nt) {
      throw ValidationError(fmt::format("direction has {} time slots, expected 1 or {}", f->num_times, nt));
    }
  }
}

void check_base(const StateSolver& solver, const StateTrajectory& base) {
  if (base.num_steps() != solver.time().nt || base.temperature.size() != base.velocity.size()) {
    throw ValidationError(fmt::format("trajectory has {} levels, expected {}", base.velocity.size(), solver.time().nt + 1));
  }
  for (const auto& z : base.velocity) check_shape(z, solver.domain());
  for (const auto& w : base.temperature) check_shape(w, solver.domain());
}

// Cost source N1 tau dt Tn^T r1 (velocity) and N2 tau dt Tw^T r2 (temperature) at one level.
Eigen::VectorXd velocity_source(const StateSolver& s, const CostWeights& wts, int level, double factor) {
  return factor * wts.outflow_weight * (s.forms().normal_trace_matrix().transpose() * wts.outflow_profile.slot(level));
}
Eigen::VectorXd scalar_source(const StateSolver& s, const CostWeights& wts, int level, double factor) {
  if (wts.form != ObjectiveForm::Trace) return Eigen::VectorXd::Zero(s.domain().num_cells());
  return factor * wts.heat_weight * (s.forms().heat_trace_matrix().transpose() * wts.heat_profile.slot(level));
}

}  // namespace

ControlDirection zero_direction(const Domain& d, int nt) {
  return {BoundaryFunction::constant(d, Part::Gamma1, nt, 0.0), BoundaryFunction::constant(d, Part::Gamma2, nt, 0.0)};
}

ControlDirection random_direction(const Domain& d, int nt, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  ControlDirection dv = zero_direction(d, nt);
  for (auto* f : {&dv.pressure, &dv.heat_flux}) {
    for (Eigen::Index i = 0; i < f->values.size(); ++i) f->values[i] = dist(rng);
  }
  return dv;
}

ControlDirection scaled(const ControlDirection& dv, double s) {
  ControlDirection out = dv;
  out.pressure.values *= s;
  out.heat_flux.values *= s;
  return out;
}

ControlPair displaced(const ControlPair& controls, const ControlDirection& dv, double eps) {
  auto shift = [eps](const BoundaryFunction& base, const BoundaryFunction& delta) {
    const int nt = std::max(base.num_times, delta.num_times);
    BoundaryFunction out = base;
    out.num_times = nt;
    out.values.resize(static_cast<Eigen::Index>(nt) * base.num_faces);
    for (int t = 0; t < nt; ++t) {
      for (int k = 0; k < base.num_faces; ++k) out.at(t, k) = base.get(t, k) + eps * delta.get(t, k);
    }
    return out;
  };
  if (dv.pressure.num_faces != controls.pressure.num_faces || dv.heat_flux.num_faces != controls.heat_flux.num_faces) {
    throw ValidationError("direction and controls live on different faces");
  }
  ControlPair out = controls;
  out.pressure = shift(controls.pressure, dv.pressure);
  out.heat_flux = shift(controls.heat_flux, dv.heat_flux);
  return out;
}

TangentTrajectory solve_tangent(const StateSolver& solver, const StateTrajectory& base, const ControlDirection& dv) {
  const Domain& d = solver.domain();
  const DiscreteForms& f = solver.forms();
  const int nt = solver.time().nt;
  const double dt = solver.dt();
  const double beta = solver.params().expansion;
  check_base(solver, base);
  check_direction(dv, d, nt);

  TangentTrajectory tan;
  tan.velocity.assign(1, zero_velocity(d));
  tan.temperature.assign(1, zero_scalar(d));
  const Eigen::VectorXd& mass = d.velocity_weights();
  for (int m = 0; m < nt; ++m) {
    const Eigen::VectorXd& z = base.velocity[m].values;
    const Eigen::VectorXd& g = tan.velocity[m].values;
    const Eigen::VectorXd& eta = tan.temperature[m].values;

    Eigen::VectorXd da = mass.cwiseProduct(g) - dt * (f.convection_force(g, z) + f.convection_force(z, g));
    if (beta != 0.0) da -= dt * beta * f.buoyancy(eta);
    const Eigen::VectorXd gstar = solver.solve_predictor(da);
    const Eigen::VectorXd gnext =
        solver.project(gstar - dt * solver.apply_mass_inverse(f.normal_trace_matrix().transpose() * dv.pressure.slot(m)));

    const Eigen::VectorXd rhs = d.cell_weight() * eta - dt * f.transport_force(gnext, base.temperature[m].values) -
                                dt * f.transport_force(base.velocity[m + 1].values, eta) -
                                dt * (f.heat_trace_matrix().transpose() * dv.heat_flux.slot(m));
    tan.temperature.push_back({solver.solve_temperature(rhs)});
    tan.velocity.push_back({gnext});
  }
  return tan;
}

AdjointTrajectory solve_adjoint(const StateSolver& solver, const StateTrajectory& base, const CostWeights& weights) {
  const Domain& d = solver.domain();
  const DiscreteForms& f = solver.forms();
  const int nt = solver.time().nt;
  const double dt = solver.dt();
  const double beta = solver.params().expansion;
  check_base(solver, base);
  weights.validate();
  check_shape(weights.outflow_profile, d);
  check_shape(weights.heat_profile, d);
  for (const auto* r : {&weights.outflow_profile, &weights.heat_profile}) {
    if (r->num_times != 1 && r->num_times != nt + 1) {
      throw ValidationError(fmt::format("cost weight has {} time levels, expected 1 or {}", r->num_times, nt + 1));
    }
  }

  AdjointTrajectory adj;
  adj.velocity.assign(nt + 1, zero_velocity(d));
  adj.temperature.assign(nt + 1, zero_scalar(d));
  adj.velocity_normal = BoundaryFunction::constant(d, Part::Gamma1, nt, 0.0);
  adj.temperature_trace = BoundaryFunction::constant(d, Part::Gamma2, nt, 0.0);
  for (const auto& z : base.velocity) adj.base_sup_norm = std::max(adj.base_sup_norm, z.values.lpNorm<Eigen::Infinity>());

  const Eigen::VectorXd& mass = d.velocity_weights();
  Eigen::VectorXd lam_x = velocity_source(solver, weights, nt, trapezoid(nt, nt) * dt);
  Eigen::VectorXd lam_y = scalar_source(solver, weights, nt, trapezoid(nt, nt) * dt);

  for (int m = nt - 1; m >= 0; --m) {
    const Eigen::VectorXd& z = base.velocity[m].values;
    const Eigen::VectorXd& znext = base.velocity[m + 1].values;

    const Eigen::VectorXd ybar = solver.solve_temperature(lam_y);
    Eigen::VectorXd lam_y_prev = d.cell_weight() * ybar + dt * f.transport_force(znext, ybar);
    const Eigen::VectorXd lam_x_tot = solver.mask(lam_x - dt * f.transport_force_velocity(base.temperature[m].values, ybar));

    const Eigen::VectorXd gbar = solver.project_transpose(lam_x_tot);
    const Eigen::VectorXd abar = solver.solve_predictor(gbar);
    Eigen::VectorXd lam_x_prev = solver.mask(mass.cwiseProduct(abar) - dt * (f.convection_force_first(z, abar) - f.convection_force(z, abar)));
    if (beta != 0.0) lam_y_prev -= dt * beta * (f.buoyancy_matrix().transpose() * abar);

    adj.velocity[m].values = solver.apply_mass_inverse(gbar);
    adj.temperature[m].values = ybar;
    const double tw = trapezoid(m, nt) * dt;
    lam_x = lam_x_prev + velocity_source(solver, weights, m, tw);
    lam_y = lam_y_prev + scalar_source(solver, weights, m, tw);
  }

  const auto& g1 = d.part_faces(Part::Gamma1);
  const auto& g2 = d.part_faces(Part::Gamma2);
  for (int m = 0; m < nt; ++m) {
    const Eigen::VectorXd pn = f.normal_trace_matrix() * adj.velocity[m].values;
    const Eigen::VectorXd qt = f.heat_trace_matrix() * adj.temperature[m].values;
    for (int k = 0; k < static_cast<int>(g1.size()); ++k) adj.velocity_normal.at(m, k) = pn[k] / d.faces()[g1[k]].length;
    for (int k = 0; k < static_cast<int>(g2.size()); ++k) adj.temperature_trace.at(m, k) = qt[k] / d.faces()[g2[k]].length;
  }

  // Time-continuous adjoint equations, evaluated with the same spatial
  // operators; the last step is skipped (the terminal jump is O(1) by design).
  const double nu = solver.params().viscosity, kappa = solver.params().conductivity;
  double res_x = 0.0, scale_x = 0.0, res_y = 0.0, scale_y = 0.0;
  for (int m = 0; m + 1 < nt; ++m) {
    const Eigen::VectorXd& p = adj.velocity[m].values;
    const Eigen::VectorXd& q = adj.temperature[m].values;
    const Eigen::VectorXd dp = mass.cwiseProduct(adj.velocity[m + 1].values - p) / dt;
    const Eigen::VectorXd visc = nu * (f.viscous_matrix() * p);
    const Eigen::VectorXd adv = f.convection_force_first(base.velocity[m].values, p) - f.convection_force(base.velocity[m].values, p);
    const Eigen::VectorXd coup = f.transport_force_velocity(base.temperature[m].values, q);
    const Eigen::VectorXd src = velocity_source(solver, weights, m, 1.0);
    const Eigen::VectorXd rx = solver.project_transpose(solver.mask(dp - visc - adv - coup + src));
    const double sx = solver.project_transpose(solver.mask(dp)).norm() + visc.norm() + adv.norm() + coup.norm() +
                      solver.project_transpose(solver.mask(src)).norm();
    res_x += rx.squaredNorm();
    scale_x += sx * sx;

    const Eigen::VectorXd dq = d.cell_weight() * (adj.temperature[m + 1].values - q) / dt;
    const Eigen::VectorXd diff = kappa * (f.diffusion_matrix() * q);
    const Eigen::VectorXd tadv = f.transport_force(base.velocity[m + 1].values, q);
    const Eigen::VectorXd buoy = beta * (f.buoyancy_matrix().transpose() * p);
    const Eigen::VectorXd tsrc = scalar_source(solver, weights, m, 1.0);
    const Eigen::VectorXd ry = dq - diff + tadv - buoy + tsrc;
    const double sy = dq.norm() + diff.norm() + tadv.norm() + buoy.norm() + tsrc.norm();
    res_y += ry.squaredNorm();
    scale_y += sy * sy;
  }
  if (scale_x > 0.0) adj.residual_velocity = std::sqrt(res_x / scale_x);
  if (scale_y > 0.0) adj.residual_temperature = std::sqrt(res_y / scale_y);
  return adj;
}

CostGradient assemble_gradient(const StateSolver& solver, const AdjointTrajectory& adj, const CostWeights& weights,
                               bool include_direct_term) {
  const int nt = solver.time().nt;
  if (adj.velocity_normal.num_times != nt || adj.temperature_trace.num_times != nt) {
    throw ValidationError("adjoint and time grid disagree");
  }
  CostGradient grad{adj.velocity_normal, adj.temperature_trace};
  grad.pressure.values *= kAdjointGradientSign;
  grad.heat_flux.values *= kAdjointGradientSign;
  if (include_direct_term && weights.form == ObjectiveForm::Flux) {
    const double kappa = solver.params().conductivity;
    for (int m = 0; m < nt; ++m) {
      for (int k = 0; k < grad.heat_flux.num_faces; ++k) {
        const double rbar = 0.5 * (weights.heat_profile.get(m, k) + weights.heat_profile.get(m + 1, k));
        grad.heat_flux.at(m, k) += -weights.heat_weight * rbar / kappa;
      }
    }
  }
  return grad;
}

CostGradient switching_functions(const CostGradient& grad, const CostWeights& weights) {
  CostGradient s = grad;
  s.pressure.values *= -1.0 / weights.outflow_weight;
  s.heat_flux.values *= -1.0 / weights.heat_weight;
  return s;
}

double pair(const Domain& d, double dt, const CostGradient& grad, const ControlDirection& dv) {
  const int nt = grad.pressure.num_times;
  return control_pairing(d, dt, nt, grad.pressure, dv.pressure) + control_pairing(d, dt, nt, grad.heat_flux, dv.heat_flux);
}

double state_pairing(const StateSolver& solver, const TangentTrajectory& tangent, const CostWeights& weights) {
  const int nt = solver.time().nt;
  const double dt = solver.dt();
  const DiscreteForms& f = solver.forms();
  if (static_cast<int>(tangent.velocity.size()) != nt + 1) throw ValidationError("tangent and time grid disagree");
  double s = 0.0;
  for (int m = 0; m <= nt; ++m) {
    const double tw = trapezoid(m, nt) * dt;
    s += tw * weights.outflow_weight * weights.outflow_profile.slot(m).dot(f.normal_trace_matrix() * tangent.velocity[m].values);
    if (weights.form == ObjectiveForm::Trace) {
      s += tw * weights.heat_weight * weights.heat_profile.slot(m).dot(f.heat_trace_matrix() * tangent.temperature[m].values);
    }
  }
  return s;
}

double directional_derivative(const StateSolver& solver, const StateTrajectory& base, const ControlDirection& dv,
                              const CostWeights& weights) {
  double s = state_pairing(solver, solve_tangent(solver, base, dv), weights);
  if (weights.form == ObjectiveForm::Flux) {
    const Domain& d = solver.domain();
    const int nt = solver.time().nt;
    const auto& ids = d.part_faces(Part::Gamma2);
    for (int m = 0; m < nt; ++m) {
      for (int k = 0; k < static_cast<int>(ids.size()); ++k) {
        const double rbar = 0.5 * (weights.heat_profile.get(m, k) + weights.heat_profile.get(m + 1, k));
        s += solver.dt() * d.faces()[ids[k]].length * weights.heat_weight * rbar * (-dv.heat_flux.get(m, k) / solver.params().conductivity);
      }
    }
  }
  return s;
}

double duality_check(const StateSolver& solver, const StateTrajectory& base, const ControlDirection& dv,
                     const CostWeights& weights) {
  return duality_check(solver, base, base, dv, weights);
}

double duality_check(const StateSolver& solver, const StateTrajectory& base, const StateTrajectory& adjoint_base,
                     const ControlDirection& dv, const CostWeights& weights) {
  const double primal = state_pairing(solver, solve_tangent(solver, base, dv), weights);
  const CostGradient grad = assemble_gradient(solver, solve_adjoint(solver, adjoint_base, weights), weights, false);
  const double dual = pair(solver.domain(), solver.dt(), grad, dv);
  return std::abs(primal - dual) / std::max(1.0, std::abs(primal));
}

GradientCheckReport gradient_check(const StateSolver& solver, const VelocityField& z0, const ScalarField& w0,
                                   const ControlPair& controls, const CostWeights& weights,
                                   const ControlDirection& dv, const std::vector<double>& epsilons,
                                   double gradient_sign) {
  if (epsilons.empty()) throw ValidationError("gradient_check needs at least one epsilon");
  SolveOptions free_run;
  free_run.enforce_bounds = false;
  const Domain& d = solver.domain();

  GradientCheckReport report;
  const StateTrajectory base = solver.solve_forward(z0, w0, controls, free_run);
  report.cost = evaluate_cost(base, controls, weights, solver);
  const CostGradient grad = assemble_gradient(solver, solve_adjoint(solver, base, weights), weights);
  const double adjoint = gradient_sign * pair(d, solver.dt(), grad, dv);

  for (double eps : epsilons) {
    const ControlPair plus = displaced(controls, dv, eps);
    const ControlPair minus = displaced(controls, dv, -eps);
    const double jp = evaluate_cost(solver.solve_forward(z0, w0, plus, free_run), plus, weights, solver);
    const double jm = evaluate_cost(solver.solve_forward(z0, w0, minus, free_run), minus, weights, solver);
    GradientCheckRow row;
    row.epsilon = eps;
    row.finite_difference = (jp - jm) / (2.0 * eps);
    row.adjoint = adjoint;
    const double scale = std::max(std::abs(row.finite_difference), std::abs(adjoint));
    row.error = scale > 0.0 ? std::abs(row.finite_difference - adjoint) / scale : 0.0;
    // Cancellation in jp - jm.
    row.roundoff = scale > 0.0 ? DBL_EPSILON * std::max(std::abs(jp), std::abs(jm)) / (eps * scale) : 0.0;
    row.above_floor = row.error > 10.0 * row.roundoff;
    report.rows.push_back(row);
  }

  bool orders_in_band = true;
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    auto& prev = report.rows[i - 1];
    auto& cur = report.rows[i];
    if (!prev.above_floor || !cur.above_floor || prev.error <= 0.0 || cur.error <= 0.0) continue;
    cur.observed_order = std::log(prev.error / cur.error) / std::log(prev.epsilon / cur.epsilon);
    if (cur.observed_order < 1.5 || cur.observed_order > 2.5) orders_in_band = false;
  }
  report.min_error = report.rows.front().error;
  for (const auto& r : report.rows) report.min_error = std::min(report.min_error, r.error);
  // Rows already at the roundoff floor carry no order information.
  report.order_ok = orders_in_band;
  report.passed = report.min_error <= 1e-4 && report.order_ok;
  return report;
}

}  // namespace bfc
