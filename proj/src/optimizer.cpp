#include "bfc/optimizer.hpp"

#include "bfc/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace bfc {

namespace {

bool near(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

// Expand a BoundaryFunction to exactly nt slots.
BoundaryFunction widen(const BoundaryFunction& f, int nt) {
  BoundaryFunction out = f;
  out.num_times = nt;
  out.values.resize(static_cast<Eigen::Index>(nt) * f.num_faces);
  for (int t = 0; t < nt; ++t) {
    for (int k = 0; k < f.num_faces; ++k) out.at(t, k) = f.get(t, k);
  }
  return out;
}

double face_length(const Domain& d, Part p, int k) { return d.faces()[d.part_faces(p)[k]].length; }

}  // namespace

ControlPair project_admissible(const ControlPair& v) {
  validate_bounds(v);
  ControlPair out = v;
  auto clip = [](BoundaryFunction& x, const BoundaryFunction& lo, const BoundaryFunction& hi) {
    for (int t = 0; t < x.num_times; ++t) {
      for (int k = 0; k < x.num_faces; ++k) x.at(t, k) = std::clamp(x.at(t, k), lo.get(t, k), hi.get(t, k));
    }
  };
  clip(out.pressure, v.pressure_min, v.pressure_max);
  clip(out.heat_flux, v.heat_flux_min, v.heat_flux_max);
  return out;
}

double optimality_residual(const Domain& d, double dt, const ControlPair& v, const CostGradient& switching,
                           const CostWeights& weights) {
  auto part_sum = [&](const BoundaryFunction& x, const BoundaryFunction& s, const BoundaryFunction& lo,
                      const BoundaryFunction& hi, double N) {
    double r = 0.0;
    for (int t = 0; t < s.num_times; ++t) {
      for (int k = 0; k < s.num_faces; ++k) {
        const double sv = s.at(t, k);
        const double gap = sv > 0.0 ? sv * (hi.get(t, k) - x.get(t, k)) : sv < 0.0 ? sv * (lo.get(t, k) - x.get(t, k)) : 0.0;
        r += N * dt * face_length(d, s.part, k) * gap;
      }
    }
    return r;
  };
  return part_sum(v.pressure, switching.pressure, v.pressure_min, v.pressure_max, weights.outflow_weight) +
         part_sum(v.heat_flux, switching.heat_flux, v.heat_flux_min, v.heat_flux_max, weights.heat_weight);
}

ControlPair bang_bang_control(const CostGradient& switching, const ControlPair& bounds, double tie_tol) {
  ControlPair out = bounds;
  auto pick = [tie_tol](const BoundaryFunction& s, const BoundaryFunction& lo, const BoundaryFunction& hi) {
    BoundaryFunction v = s;
    for (int t = 0; t < s.num_times; ++t) {
      for (int k = 0; k < s.num_faces; ++k) {
        const double sv = s.at(t, k);
        v.at(t, k) = sv > tie_tol ? hi.get(t, k) : sv < -tie_tol ? lo.get(t, k) : 0.5 * (lo.get(t, k) + hi.get(t, k));
      }
    }
    return v;
  };
  out.pressure = pick(switching.pressure, bounds.pressure_min, bounds.pressure_max);
  out.heat_flux = pick(switching.heat_flux, bounds.heat_flux_min, bounds.heat_flux_max);
  return out;
}

ReducedProblem::ReducedProblem(std::shared_ptr<const StateSolver> solver, VelocityField z0, ScalarField w0,
                               CostWeights weights, SolveOptions options)
    : solver_(std::move(solver)),
      z0_(std::move(z0)),
      w0_(std::move(w0)),
      weights_(std::move(weights)),
      options_(options) {
  weights_.validate();
}

double ReducedProblem::cost(const ControlPair& v) const {
  return evaluate_cost(solver_->solve_forward(z0_, w0_, v, options_), v, weights_, *solver_);
}

ReducedProblem::Evaluation ReducedProblem::evaluate(const ControlPair& v) const {
  Evaluation e;
  e.trajectory = solver_->solve_forward(z0_, w0_, v, options_);
  e.J = evaluate_cost(e.trajectory, v, weights_, *solver_);
  e.adjoint = solve_adjoint(*solver_, e.trajectory, weights_);
  e.gradient = assemble_gradient(*solver_, e.adjoint, weights_);
  e.switching = switching_functions(e.gradient, weights_);
  return e;
}

ControlSpace ControlSpace::full(const Domain& d, const ControlPair& reference, const TimeGrid& time) {
  const int nt = time.nt;
  validate_bounds(reference);
  ControlSpace s;
  s.reference_ = reference;
  s.nt_ = nt;
  s.n1_ = d.part_size(Part::Gamma1);
  const int n2 = d.part_size(Part::Gamma2);
  const int entries = nt * (s.n1_ + n2);
  s.owner_.resize(entries);
  s.entry_weight_.resize(entries);
  s.lower_.resize(entries);
  s.upper_.resize(entries);
  s.parts_.resize(entries);
  for (int e = 0; e < entries; ++e) {
    const bool first = e < nt * s.n1_;
    const int local = first ? e : e - nt * s.n1_;
    const int nf = first ? s.n1_ : n2;
    const int t = local / nf, k = local % nf;
    const Part p = first ? Part::Gamma1 : Part::Gamma2;
    s.owner_[e] = e;
    s.entry_weight_[e] = time.dt() * face_length(d, p, k);
    s.lower_[e] = first ? reference.pressure_min.get(t, k) : reference.heat_flux_min.get(t, k);
    s.upper_[e] = first ? reference.pressure_max.get(t, k) : reference.heat_flux_max.get(t, k);
    s.parts_[e] = p;
  }
  s.measure_ = s.entry_weight_;
  s.names_.reserve(entries);
  for (int e = 0; e < entries; ++e) s.names_.push_back(fmt::format("entry{}", e));
  return s;
}

ControlSpace ControlSpace::coarse3(const Domain& d, const ControlPair& reference, const TimeGrid& time) {
  const int nt = time.nt;
  validate_bounds(reference);
  ControlSpace s;
  s.reference_ = reference;
  s.nt_ = nt;
  s.n1_ = d.part_size(Part::Gamma1);
  const int n2 = d.part_size(Part::Gamma2);
  const int entries = nt * (s.n1_ + n2);
  s.owner_.resize(entries);
  s.entry_weight_.resize(entries);
  s.lower_ = Eigen::VectorXd::Constant(3, std::nan(""));
  s.upper_ = Eigen::VectorXd::Constant(3, std::nan(""));
  s.measure_ = Eigen::VectorXd::Zero(3);
  s.parts_ = {Part::Gamma1, Part::Gamma1, Part::Gamma2};
  s.names_ = {"inlet_v1", "outlet_v1", "wall_v2"};
  for (int e = 0; e < entries; ++e) {
    const bool first = e < nt * s.n1_;
    const int local = first ? e : e - nt * s.n1_;
    const int nf = first ? s.n1_ : n2;
    const int t = local / nf, k = local % nf;
    const Part p = first ? Part::Gamma1 : Part::Gamma2;
    const int j = first ? (d.faces()[d.part_faces(p)[k]].side == Side::Left ? 0 : 1) : 2;
    const double lo = first ? reference.pressure_min.get(t, k) : reference.heat_flux_min.get(t, k);
    const double hi = first ? reference.pressure_max.get(t, k) : reference.heat_flux_max.get(t, k);
    if (std::isnan(s.lower_[j])) {
      s.lower_[j] = lo;
      s.upper_[j] = hi;
    } else if (lo != s.lower_[j] || hi != s.upper_[j]) {
      throw ValidationError(fmt::format("coarse parametrization needs constant bounds on group {}", s.names_[j]));
    }
    s.owner_[e] = j;
    s.entry_weight_[e] = time.dt() * face_length(d, p, k);
    s.measure_[j] += s.entry_weight_[e];
  }
  for (int j = 0; j < 3; ++j) {
    if (s.measure_[j] == 0.0) throw ValidationError(fmt::format("coarse parametrization: group {} is empty", s.names_[j]));
  }
  return s;
}

ControlPair ControlSpace::expand(const Eigen::VectorXd& theta) const {
  if (theta.size() != size()) throw ValidationError("parameter vector has the wrong size");
  ControlPair v = reference_;
  v.pressure = widen(reference_.pressure, nt_);
  v.heat_flux = widen(reference_.heat_flux, nt_);
  const Eigen::Index split = static_cast<Eigen::Index>(nt_) * n1_;
  for (Eigen::Index e = 0; e < static_cast<Eigen::Index>(owner_.size()); ++e) {
    if (e < split) {
      v.pressure.values[e] = theta[owner_[e]];
    } else {
      v.heat_flux.values[e - split] = theta[owner_[e]];
    }
  }
  return v;
}

Eigen::VectorXd ControlSpace::restrict(const ControlPair& v) const {
  const BoundaryFunction v1 = widen(v.pressure, nt_), v2 = widen(v.heat_flux, nt_);
  const Eigen::Index split = static_cast<Eigen::Index>(nt_) * n1_;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(size());
  for (Eigen::Index e = 0; e < static_cast<Eigen::Index>(owner_.size()); ++e) {
    const double x = e < split ? v1.values[e] : v2.values[e - split];
    theta[owner_[e]] += entry_weight_[e] * x;
  }
  return theta.cwiseQuotient(measure_);
}

Eigen::VectorXd ControlSpace::pullback(const CostGradient& grad) const {
  const BoundaryFunction g1 = widen(grad.pressure, nt_), g2 = widen(grad.heat_flux, nt_);
  const Eigen::Index split = static_cast<Eigen::Index>(nt_) * n1_;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(size());
  for (Eigen::Index e = 0; e < static_cast<Eigen::Index>(owner_.size()); ++e) {
    const double x = e < split ? g1.values[e] : g2.values[e - split];
    out[owner_[e]] += entry_weight_[e] * x;
  }
  return out.cwiseQuotient(measure_);
}

Eigen::VectorXd ControlSpace::project(const Eigen::VectorXd& theta) const {
  return theta.cwiseMax(lower_).cwiseMin(upper_);
}

double ControlSpace::residual(const Eigen::VectorXd& theta, const Eigen::VectorXd& grad) const {
  double r = 0.0;
  for (int j = 0; j < size(); ++j) {
    const double g = grad[j];
    if (g < 0.0) r += measure_[j] * (-g) * (upper_[j] - theta[j]);
    if (g > 0.0) r += measure_[j] * g * (theta[j] - lower_[j]);
  }
  return r;
}

Eigen::VectorXd ControlSpace::vertex(const Eigen::VectorXd& grad) const {
  Eigen::VectorXd v(size());
  for (int j = 0; j < size(); ++j) {
    v[j] = grad[j] < 0.0 ? upper_[j] : grad[j] > 0.0 ? lower_[j] : 0.5 * (lower_[j] + upper_[j]);
  }
  return v;
}

ControlSpace::BoundFractions ControlSpace::fractions(const Eigen::VectorXd& theta) const {
  BoundFractions f;
  const double total = measure_.sum();
  for (int j = 0; j < size(); ++j) {
    const double w = measure_[j] / total;
    if (near(theta[j], lower_[j])) {
      f.lower += w;
    } else if (near(theta[j], upper_[j])) {
      f.upper += w;
    } else {
      f.interior += w;
    }
  }
  return f;
}

SwitchingReport switching_report(const Domain& d, double /*dt*/, const CostGradient& switching, const ControlPair& v,
                                 double tol, double tol_frac) {
  SwitchingReport rep;
  rep.tol = tol;
  double active_total = 0.0, agree_total = 0.0;
  auto audit = [&](const BoundaryFunction& s, const BoundaryFunction& x, const BoundaryFunction& lo,
                   const BoundaryFunction& hi) {
    PartSwitching ps;
    double total = 0.0, active = 0.0, agree = 0.0;
    for (int t = 0; t < s.num_times; ++t) {
      for (int k = 0; k < s.num_faces; ++k) {
        const double w = face_length(d, s.part, k);
        const double sv = s.at(t, k);
        total += w;
        if (sv > tol) {
          ps.positive += w;
          active += w;
          if (near(x.get(t, k), hi.get(t, k))) agree += w;
        } else if (sv < -tol) {
          ps.negative += w;
          active += w;
          if (near(x.get(t, k), lo.get(t, k))) agree += w;
        } else {
          ps.tie += w;
        }
      }
    }
    if (total > 0.0) {
      ps.positive /= total;
      ps.negative /= total;
      ps.tie /= total;
    }
    ps.agreement = active > 0.0 ? agree / active : 1.0;
    active_total += active;
    agree_total += agree;
    return ps;
  };
  rep.pressure = audit(switching.pressure, v.pressure, v.pressure_min, v.pressure_max);
  rep.heat_flux = audit(switching.heat_flux, v.heat_flux, v.heat_flux_min, v.heat_flux_max);
  rep.agreement = active_total > 0.0 ? agree_total / active_total : 1.0;
  rep.bang_bang_verified = rep.agreement >= 1.0 - tol_frac;
  return rep;
}

namespace {

struct Iterate {
  Eigen::VectorXd theta;
  ReducedProblem::Evaluation eval;
  Eigen::VectorXd grad;
  double residual = 0.0;
};

Iterate evaluate_at(const ReducedProblem& problem, const ControlSpace& space, Eigen::VectorXd theta, int iter) {
  Iterate it;
  it.theta = std::move(theta);
  try {
    it.eval = problem.evaluate(space.expand(it.theta));
  } catch (const NumericalError& e) {
    throw NumericalError(fmt::format("iteration {}: {}", iter, e.what()));
  }
  it.grad = space.pullback(it.eval.gradient);
  it.residual = space.residual(it.theta, it.grad);
  return it;
}

double trial_cost(const ReducedProblem& problem, const ControlSpace& space, const Eigen::VectorXd& theta, int iter) {
  try {
    return problem.cost(space.expand(theta));
  } catch (const NumericalError& e) {
    throw NumericalError(fmt::format("iteration {} (line search): {}", iter, e.what()));
  }
}

void record(OptimizationReport& rep, const ControlSpace& space, const Iterate& it, int iter, double step) {
  const auto f = space.fractions(it.theta);
  rep.history.push_back({iter, it.eval.J, it.residual, step, f.lower, f.upper, f.interior});
}

void finish(OptimizationReport& rep, const ReducedProblem& problem, const ControlSpace& space, const Iterate& it,
            const OptimizerOptions& options) {
  rep.theta = it.theta;
  rep.control = space.expand(it.theta);
  rep.switching = it.eval.switching;
  rep.J = it.eval.J;
  rep.residual = it.residual;
  const double smax = std::max(rep.switching.pressure.values.lpNorm<Eigen::Infinity>(),
                               rep.switching.heat_flux.values.lpNorm<Eigen::Infinity>());
  rep.switching_stats =
      switching_report(problem.domain(), problem.solver().dt(), rep.switching, rep.control, options.tie_rel * smax);
}

void check_options(const OptimizerOptions& o) {
  if (!(o.tol_rel >= 0.0)) throw ValidationError("tol_rel >= 0 required");
  if (o.max_iter < 0) throw ValidationError("max_iter >= 0 required");
  if (!(o.armijo_c > 0.0 && o.armijo_c < 1.0)) throw ValidationError("armijo_c in (0, 1) required");
  if (!(o.sigma0 > 0.0)) throw ValidationError("sigma0 > 0 required");
}

bool converged(const Iterate& it, double r0, double tol_rel) { return it.residual <= tol_rel * r0; }

}  // namespace

OptimizationReport projected_gradient_solve(const ReducedProblem& problem, const ControlSpace& space,
                                            const Eigen::VectorXd& theta0, const OptimizerOptions& options) {
  check_options(options);
  if (space.project(theta0) != theta0) throw ValidationError("initial control is not admissible");
  OptimizationReport rep;
  Iterate it = evaluate_at(problem, space, theta0, 0);
  rep.initial_residual = it.residual;
  record(rep, space, it, 0, 0.0);

  int iter = 0;
  rep.termination = "max_iter";
  while (true) {
    if (converged(it, rep.initial_residual, options.tol_rel)) {
      rep.converged = true;
      rep.termination = "residual";
      break;
    }
    if (iter >= options.max_iter) break;
    ++iter;
    double sigma = options.sigma0;
    bool accepted = false;
    Eigen::VectorXd trial;
    for (int b = 0; b <= options.max_backtracks; ++b, sigma *= 0.5) {
      trial = space.project(it.theta - sigma * it.grad);
      const double slope = space.measure().cwiseProduct(it.grad).dot(trial - it.theta);
      if (!(slope < 0.0)) break;
      if (trial_cost(problem, space, trial, iter) <= it.eval.J + options.armijo_c * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      rep.termination = "line_search";
      --iter;
      break;
    }
    it = evaluate_at(problem, space, std::move(trial), iter);
    record(rep, space, it, iter, sigma);
  }
  rep.iterations = iter;
  finish(rep, problem, space, it, options);
  return rep;
}

OptimizationReport conditional_gradient_solve(const ReducedProblem& problem, const ControlSpace& space,
                                              const Eigen::VectorXd& theta0, const OptimizerOptions& options) {
  check_options(options);
  if (space.project(theta0) != theta0) throw ValidationError("initial control is not admissible");
  OptimizationReport rep;
  Iterate it = evaluate_at(problem, space, theta0, 0);
  rep.initial_residual = it.residual;
  record(rep, space, it, 0, 0.0);

  int iter = 0;
  rep.termination = "max_iter";
  while (true) {
    if (converged(it, rep.initial_residual, options.tol_rel)) {
      rep.converged = true;
      rep.termination = "residual";
      break;
    }
    if (iter >= options.max_iter) break;
    ++iter;
    // The gap <grad, theta - vertex> equals the optimality residual.
    const Eigen::VectorXd direction = space.vertex(it.grad) - it.theta;
    const double gap = it.residual;
    double gamma = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial;
    for (int b = 0; b <= options.max_backtracks; ++b, gamma *= 0.5) {
      trial = space.project(it.theta + gamma * direction);
      if (trial_cost(problem, space, trial, iter) <= it.eval.J - options.armijo_c * gamma * gap) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      rep.termination = "line_search";
      --iter;
      break;
    }
    it = evaluate_at(problem, space, std::move(trial), iter);
    record(rep, space, it, iter, gamma);
  }
  rep.iterations = iter;
  finish(rep, problem, space, it, options);
  return rep;
}

OptimizationReport optimize(const ReducedProblem& problem, const ControlSpace& space, const Eigen::VectorXd& theta0,
                            const OptimizerOptions& options) {
  return options.method == Method::ProjectedGradient ? projected_gradient_solve(problem, space, theta0, options)
                                                     : conditional_gradient_solve(problem, space, theta0, options);
}

}  // namespace bfc
