#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bfc/adjoint.hpp"
#include "support.hpp"

using namespace bfc;
using bfc::test::make_problem;

namespace {

struct Fixture {
  Problem p = make_problem();
  const Domain& d() const { return p.forms->domain(); }
  int nt() const { return p.solver->time().nt; }
  StateTrajectory base() const { return p.solver->solve_forward(p.initial_velocity, p.initial_temperature, p.controls); }
};

double state_norm(const std::vector<VelocityField>& g, const std::vector<ScalarField>& eta) {
  double s = 0.0;
  for (std::size_t m = 0; m < g.size(); ++m) s += g[m].values.squaredNorm() + eta[m].values.squaredNorm();
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("tangent of a zero direction is zero") {
  const Fixture f;
  const TangentTrajectory t = solve_tangent(*f.p.solver, f.base(), zero_direction(f.d(), f.nt()));
  CHECK(state_norm(t.velocity, t.temperature) == 0.0);
}

TEST_CASE("tangent is linear in the direction") {
  const Fixture f;
  const StateTrajectory base = f.base();
  const ControlDirection dv = random_direction(f.d(), f.nt(), 3);
  const TangentTrajectory one = solve_tangent(*f.p.solver, base, dv);
  const TangentTrajectory two = solve_tangent(*f.p.solver, base, scaled(dv, 2.0));
  double diff = 0.0;
  for (int m = 0; m <= f.nt(); ++m) {
    diff += (two.velocity[m].values - 2.0 * one.velocity[m].values).squaredNorm();
    diff += (two.temperature[m].values - 2.0 * one.temperature[m].values).squaredNorm();
  }
  CHECK(std::sqrt(diff) <= 1e-12 * 2.0 * state_norm(one.velocity, one.temperature));
}

TEST_CASE("tangent matches nonlinear re-solves to first order") {
  const Fixture f;
  const StateTrajectory base = f.base();
  const ControlDirection dv = random_direction(f.d(), f.nt(), 4);
  const TangentTrajectory t = solve_tangent(*f.p.solver, base, dv);
  std::vector<double> errors;
  for (double eps = 1e-2; eps >= 1e-5; eps *= 0.5) {
    const StateTrajectory moved =
        f.p.solver->solve_forward(f.p.initial_velocity, f.p.initial_temperature, displaced(f.p.controls, dv, eps), {false, false});
    double s = 0.0;
    for (int m = 0; m <= f.nt(); ++m) {
      s += ((moved.velocity[m].values - base.velocity[m].values) / eps - t.velocity[m].values).squaredNorm();
      s += ((moved.temperature[m].values - base.temperature[m].values) / eps - t.temperature[m].values).squaredNorm();
    }
    errors.push_back(std::sqrt(s));
  }
  for (std::size_t n = 1; n < errors.size(); ++n) {
    const double ratio = errors[n - 1] / errors[n];
    INFO("eps index " << n << " ratio " << ratio);
    CHECK(ratio == doctest::Approx(2.0).epsilon(0.1));
  }
}

TEST_CASE("adjoint with zero cost weights vanishes") {
  Fixture f;
  f.p.weights.outflow_profile = BoundaryFunction::constant(f.d(), Part::Gamma1, 1, 0.0);
  f.p.weights.heat_profile = BoundaryFunction::constant(f.d(), Part::Gamma2, 1, 0.0);
  const AdjointTrajectory adj = solve_adjoint(*f.p.solver, f.base(), f.p.weights);
  for (int m = 0; m <= f.nt(); ++m) {
    CHECK(adj.velocity[m].values.lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(adj.temperature[m].values.lpNorm<Eigen::Infinity>() == 0.0);
  }
  const CostGradient g = assemble_gradient(*f.p.solver, adj, f.p.weights);
  CHECK(g.pressure.values.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(g.heat_flux.values.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("adjoint terminal values are zero") {
  const Fixture f;
  const AdjointTrajectory adj = solve_adjoint(*f.p.solver, f.base(), f.p.weights);
  CHECK(adj.velocity[f.nt()].values.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(adj.temperature[f.nt()].values.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(adj.velocity[0].values.lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("duality between tangent and adjoint pairings") {
  const Fixture f;
  const StateTrajectory base = f.base();
  CHECK(duality_check(*f.p.solver, base, zero_direction(f.d(), f.nt()), f.p.weights) == 0.0);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    CHECK(duality_check(*f.p.solver, base, random_direction(f.d(), f.nt(), seed), f.p.weights) <= 1e-10);
  }
  ControlPair other = f.p.controls;
  other.pressure.values.setConstant(0.9);
  other.heat_flux.values.setConstant(0.2);
  const StateTrajectory stale = f.p.solver->solve_forward(f.p.initial_velocity, f.p.initial_temperature, other);
  CHECK(duality_check(*f.p.solver, base, stale, random_direction(f.d(), f.nt(), 1), f.p.weights) > 1e4 * 1e-10);
}

TEST_CASE("directional derivative is the gradient pairing") {
  const Fixture f;
  const StateTrajectory base = f.base();
  const AdjointTrajectory adj = solve_adjoint(*f.p.solver, base, f.p.weights);
  const CostGradient g = assemble_gradient(*f.p.solver, adj, f.p.weights);
  const ControlDirection dv = random_direction(f.d(), f.nt(), 9);
  const double dj = directional_derivative(*f.p.solver, base, dv, f.p.weights);
  CHECK(bfc::test::rel(dj, pair(f.d(), f.p.solver->dt(), g, dv)) <= 1e-10);
  CHECK(directional_derivative(*f.p.solver, base, zero_direction(f.d(), f.nt()), f.p.weights) == 0.0);
  const double dj3 = directional_derivative(*f.p.solver, base, scaled(dv, 3.0), f.p.weights);
  CHECK(bfc::test::rel(dj3, 3.0 * dj) <= 1e-12);
}

TEST_CASE("flux objective adds the direct heat-flux term") {
  const Problem p = make_problem([](RunConfig& c) { c.cost.form = ObjectiveForm::Flux; });
  const StateTrajectory base = p.solver->solve_forward(p.initial_velocity, p.initial_temperature, p.controls);
  const AdjointTrajectory adj = solve_adjoint(*p.solver, base, p.weights);
  const CostGradient with = assemble_gradient(*p.solver, adj, p.weights, true);
  const CostGradient without = assemble_gradient(*p.solver, adj, p.weights, false);
  const Domain& d = p.forms->domain();
  for (int m = 0; m < 20; ++m) {
    for (int k = 0; k < d.part_size(Part::Gamma2); ++k) {
      const double direct = -p.weights.heat_weight * p.weights.heat_profile.get(m, k) / p.solver->params().conductivity;
      CHECK(with.heat_flux.at(m, k) - without.heat_flux.at(m, k) == doctest::Approx(direct).epsilon(1e-12));
    }
  }
  CHECK((with.pressure.values - without.pressure.values).lpNorm<Eigen::Infinity>() == 0.0);

  const GradientCheckReport rep =
      gradient_check(*p.solver, p.initial_velocity, p.initial_temperature, p.controls, p.weights, random_direction(d, 20, 1));
  CHECK(rep.passed);
}

TEST_CASE("gradient check on the default configuration") {
  const Fixture f;
  const ControlDirection dv = random_direction(f.d(), f.nt(), 1);
  const GradientCheckReport rep = gradient_check(*f.p.solver, f.p.initial_velocity, f.p.initial_temperature, f.p.controls, f.p.weights, dv);
  CHECK(rep.rows.size() == kDefaultEpsilons.size());
  CHECK(rep.min_error <= 1e-4);
  CHECK(rep.order_ok);
  CHECK(rep.passed);
  int measured = 0;
  for (const auto& r : rep.rows) {
    if (r.observed_order == 0.0) continue;
    ++measured;
    CHECK(r.observed_order == doctest::Approx(2.0).epsilon(0.25));
  }
  CHECK(measured >= 1);

  const GradientCheckReport flipped =
      gradient_check(*f.p.solver, f.p.initial_velocity, f.p.initial_temperature, f.p.controls, f.p.weights, dv, kDefaultEpsilons, -1.0);
  CHECK_FALSE(flipped.passed);
  CHECK(flipped.min_error == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("random directions are reproducible") {
  const Fixture f;
  const ControlDirection a = random_direction(f.d(), f.nt(), 42), b = random_direction(f.d(), f.nt(), 42);
  CHECK(a.pressure.values == b.pressure.values);
  CHECK(a.heat_flux.values == b.heat_flux.values);
  CHECK(a.pressure.values != random_direction(f.d(), f.nt(), 43).pressure.values);
  CHECK(a.pressure.values.maxCoeff() <= 1.0);
  CHECK(a.pressure.values.minCoeff() >= -1.0);
}
