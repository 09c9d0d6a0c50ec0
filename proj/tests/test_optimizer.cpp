#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bfc/errors.hpp"
#include "bfc/optimizer.hpp"
#include "bfc/oracle.hpp"
#include "support.hpp"

#include <random>

using namespace bfc;
using bfc::test::make_problem;

namespace {

struct Setup {
  explicit Setup(const std::function<void(RunConfig&)>& edit = {}) {
    config = default_config();
    if (edit) edit(config);
    p = build_problem(config);
    problem = std::make_unique<ReducedProblem>(p.solver, p.initial_velocity, p.initial_temperature, p.weights);
  }
  const Domain& d() const { return p.forms->domain(); }
  double dt() const { return config.time.dt(); }
  int nt() const { return config.time.nt; }
  ControlSpace full() const { return ControlSpace::full(d(), p.controls, config.time); }
  ControlSpace coarse() const { return ControlSpace::coarse3(d(), p.controls, config.time); }

  RunConfig config;
  Problem p;
  std::unique_ptr<ReducedProblem> problem;
};

CostGradient constant_switching(const Domain& d, int nt, double s1, double s2) {
  return {BoundaryFunction::constant(d, Part::Gamma1, nt, s1), BoundaryFunction::constant(d, Part::Gamma2, nt, s2)};
}

}  // namespace

TEST_CASE("projection onto the admissible box") {
  const Setup s;
  ControlPair v = s.p.controls;
  CHECK(project_admissible(v).pressure.values == v.pressure.values);
  v.pressure.values.setZero();
  v.heat_flux.values.setConstant(3.0);
  const ControlPair pv = project_admissible(v);
  CHECK((pv.pressure.values.array() == 0.1).all());
  CHECK((pv.heat_flux.values.array() == 1.0).all());
  const ControlPair ppv = project_admissible(pv);
  CHECK(ppv.pressure.values == pv.pressure.values);
  CHECK(ppv.heat_flux.values == pv.heat_flux.values);
}

TEST_CASE("bang-bang control from switching signs") {
  const Setup s;
  const ControlPair v = bang_bang_control(constant_switching(s.d(), s.nt(), 1.0, -1.0), s.p.controls);
  CHECK((v.pressure.values.array() == 1.0).all());
  CHECK((v.heat_flux.values.array() == 0.1).all());
  const ControlPair mid = bang_bang_control(constant_switching(s.d(), s.nt(), 0.0, 0.0), s.p.controls);
  CHECK((mid.pressure.values.array() == 0.55).all());
  CHECK((mid.heat_flux.values.array() == 0.55).all());
}

TEST_CASE("optimality residual") {
  const Setup s;
  const CostWeights& w = s.p.weights;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CostGradient sw = constant_switching(s.d(), s.nt(), 0.0, 0.0);
  for (Eigen::Index i = 0; i < sw.pressure.values.size(); ++i) sw.pressure.values[i] = u(rng);
  for (Eigen::Index i = 0; i < sw.heat_flux.values.size(); ++i) sw.heat_flux.values[i] = u(rng);

  CHECK(optimality_residual(s.d(), s.dt(), bang_bang_control(sw, s.p.controls), sw, w) == 0.0);
  CHECK(optimality_residual(s.d(), s.dt(), s.p.controls, constant_switching(s.d(), s.nt(), 0.0, 0.0), w) == 0.0);

  // Anti-bang-bang: every point at the wrong bound.
  const CostGradient flipped{BoundaryFunction{sw.pressure.part, sw.pressure.num_faces, sw.pressure.num_times, -sw.pressure.values},
                             BoundaryFunction{sw.heat_flux.part, sw.heat_flux.num_faces, sw.heat_flux.num_times, -sw.heat_flux.values}};
  const ControlPair wrong = bang_bang_control(flipped, s.p.controls);
  double expected = 0.0;
  for (int m = 0; m < s.nt(); ++m) {
    for (int k = 0; k < sw.pressure.num_faces; ++k) {
      const double len = s.d().faces()[s.d().part_faces(Part::Gamma1)[k]].length;
      expected += w.outflow_weight * s.dt() * len * std::abs(sw.pressure.at(m, k)) * 0.9;
    }
    for (int k = 0; k < sw.heat_flux.num_faces; ++k) {
      const double len = s.d().faces()[s.d().part_faces(Part::Gamma2)[k]].length;
      expected += w.heat_weight * s.dt() * len * std::abs(sw.heat_flux.at(m, k)) * 0.9;
    }
  }
  CHECK(optimality_residual(s.d(), s.dt(), wrong, sw, w) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("control spaces round-trip") {
  const Setup s;
  for (const ControlSpace& space : {s.full(), s.coarse()}) {
    Eigen::VectorXd theta = 0.5 * (space.lower() + space.upper());
    theta[0] = space.lower()[0];
    const Eigen::VectorXd back = space.restrict(space.expand(theta));
    CHECK((back - theta).lpNorm<Eigen::Infinity>() < 1e-14);
  }
  const ControlSpace coarse = s.coarse();
  CHECK(coarse.size() == 3);
  CHECK(coarse.names().size() == 3u);
  CHECK(coarse.measure().sum() == doctest::Approx(0.2 * 4.0).epsilon(1e-12));

  ControlPair varying = s.p.controls;
  varying.pressure_min.values[5] = 0.2;
  CHECK_THROWS_AS(ControlSpace::coarse3(s.d(), varying, s.config.time), ValidationError);
}

TEST_CASE("parameter gradient is the pulled-back Riesz representative") {
  const Setup s;
  const auto eval = s.problem->evaluate(s.p.controls);
  for (const ControlSpace& space : {s.full(), s.coarse()}) {
    const Eigen::VectorXd g = space.pullback(eval.gradient);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd dtheta(space.size());
    for (int i = 0; i < space.size(); ++i) dtheta[i] = u(rng);
    const ControlPair a = space.expand(Eigen::VectorXd::Zero(space.size()));
    const ControlPair b = space.expand(dtheta);
    const ControlDirection dv{BoundaryFunction{a.pressure.part, a.pressure.num_faces, a.pressure.num_times, b.pressure.values - a.pressure.values},
                              BoundaryFunction{a.heat_flux.part, a.heat_flux.num_faces, a.heat_flux.num_times, b.heat_flux.values - a.heat_flux.values}};
    const double lhs = (space.measure().array() * g.array() * dtheta.array()).sum();
    CHECK(bfc::test::rel(lhs, pair(s.d(), s.dt(), eval.gradient, dv)) <= 1e-12);
  }
}

TEST_CASE("projected gradient on the default configuration") {
  const Setup s;
  const ControlSpace space = s.full();
  const OptimizationReport rep = projected_gradient_solve(*s.problem, space, space.restrict(s.p.controls));
  CHECK(rep.converged);
  CHECK(rep.termination == "residual");
  CHECK(rep.iterations <= 200);
  CHECK(rep.residual <= 1e-6 * rep.initial_residual);
  CHECK(rep.J < rep.history.front().J);
  for (std::size_t n = 1; n < rep.history.size(); ++n) CHECK(rep.history[n].J <= rep.history[n - 1].J);
  CHECK(rep.switching_stats.agreement == 1.0);
  CHECK(rep.switching_stats.bang_bang_verified);

  SUBCASE("restart at the optimum stops at iteration 0") {
    const OptimizationReport again = projected_gradient_solve(*s.problem, space, rep.theta);
    CHECK(again.iterations == 0);
    CHECK(again.converged);
  }
  SUBCASE("conditional gradient reaches the same control") {
    const OptimizationReport cg = conditional_gradient_solve(*s.problem, space, space.restrict(s.p.controls));
    CHECK(cg.converged);
    for (const auto& h : cg.history) CHECK(h.residual >= 0.0);
    const Eigen::VectorXd diff = (cg.theta - rep.theta).cwiseAbs();
    CHECK(space.measure().dot(diff) <= 1e-10 * space.measure().sum());
    CHECK(cg.J == doctest::Approx(rep.J).epsilon(1e-10));
  }
}

TEST_CASE("weak penalty needs many projected-gradient iterations but still converges") {
  const Setup s([](RunConfig& c) {
    c.cost.outflow_weight = 1.0;
    c.cost.heat_weight = 1.0;
  });
  const ControlSpace space = s.full();
  const OptimizationReport rep = projected_gradient_solve(*s.problem, space, space.restrict(s.p.controls));
  CHECK(rep.converged);
  CHECK(rep.iterations <= 200);
  // Near-tie points move by a step proportional to |s| and may still be
  // short of their bound when the relative residual test fires.
  MESSAGE("iterations " << rep.iterations << ", agreement " << rep.switching_stats.agreement);
  CHECK(rep.switching_stats.agreement >= 0.99);
}

TEST_CASE("linear objective is minimized at the sign-dictated corner") {
  const Setup s(bfc::test::linear_case);
  const ControlSpace space = s.full();
  const OptimizationReport pg = projected_gradient_solve(*s.problem, space, space.restrict(s.p.controls));
  CHECK(pg.converged);
  CHECK(pg.iterations <= 3);
  CHECK((pg.control.heat_flux.values.array() == 1.0).all());
  // J does not depend on v1 here: its switching function is zero and v1 stays put.
  CHECK((pg.control.pressure.values.array() == 0.55).all());

  const OptimizationReport cg = conditional_gradient_solve(*s.problem, space, space.restrict(s.p.controls));
  CHECK(cg.converged);
  CHECK(cg.iterations == 1);
  CHECK((cg.control.heat_flux.values.array() == 1.0).all());
}

TEST_CASE("switching report") {
  const Setup s;
  const CostGradient zero = constant_switching(s.d(), s.nt(), 0.0, 0.0);
  const SwitchingReport z = switching_report(s.d(), s.dt(), zero, s.p.controls, 1e-12);
  CHECK(z.pressure.tie == doctest::Approx(1.0));
  CHECK(z.heat_flux.tie == doctest::Approx(1.0));

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  ControlPair random = s.p.controls;
  for (Eigen::Index i = 0; i < random.pressure.values.size(); ++i) random.pressure.values[i] = u(rng);
  for (Eigen::Index i = 0; i < random.heat_flux.values.size(); ++i) random.heat_flux.values[i] = u(rng);
  const auto eval = s.problem->evaluate(random);
  const SwitchingReport r = switching_report(s.d(), s.dt(), eval.switching, random, 1e-12);
  CHECK(r.agreement < 1.0);
  CHECK_FALSE(r.bang_bang_verified);
}

TEST_CASE("brute-force oracle agrees with the restricted optimizer") {
  const Setup s;
  const ControlSpace space = s.coarse();
  const OracleResult oracle = brute_force_oracle(*s.problem, space, 5);
  CHECK(oracle.table.size() == 125u);
  const OptimizationReport rep = projected_gradient_solve(*s.problem, space, space.restrict(s.p.controls));
  CHECK(rep.J <= oracle.best_J + 1e-8 * std::abs(oracle.best_J));
  CHECK(std::abs(rep.J - oracle.best_J) <= 1e-8 * std::abs(oracle.best_J));
  const OptimizationReport unrestricted =
      projected_gradient_solve(*s.problem, s.full(), s.full().restrict(s.p.controls));
  CHECK(unrestricted.J <= oracle.best_J + 1e-8 * std::abs(oracle.best_J));
}

TEST_CASE("brute-force oracle in the linear case lands on the corner") {
  const Setup s(bfc::test::linear_case);
  const ControlSpace space = s.coarse();
  const OracleResult oracle = brute_force_oracle(*s.problem, space, 3);
  CHECK(oracle.best_theta[2] == 1.0);
  // v1 does not enter J, so the first enumerated v1 values win the tie.
  CHECK(oracle.best_theta[0] == doctest::Approx(0.1));
  CHECK(oracle.best_theta[1] == doctest::Approx(0.1));
  const OptimizationReport rep = projected_gradient_solve(*s.problem, space, space.restrict(s.p.controls));
  CHECK(rep.theta[2] == 1.0);
  CHECK(rep.J == doctest::Approx(oracle.best_J).epsilon(1e-12));
}

TEST_CASE("oracle size limits") {
  const Setup s;
  CHECK_THROWS_AS(brute_force_oracle(*s.problem, s.coarse(), 1), ValidationError);
  CHECK_THROWS_AS(brute_force_oracle(*s.problem, s.coarse(), 10), ValidationError);
  CHECK_THROWS_AS(brute_force_oracle(*s.problem, s.full(), 2), ValidationError);
}

TEST_CASE("single-parameter sweep of the outlet pressure") {
  const Setup s;
  const ControlSpace space = s.coarse();
  Eigen::VectorXd theta = space.restrict(s.p.controls);
  std::vector<double> sweep;
  for (int n = 0; n < 9; ++n) {
    theta[1] = 0.1 + 0.9 * n / 8.0;
    sweep.push_back(s.problem->cost(space.expand(theta)));
  }
  int sign_changes = 0;
  for (std::size_t n = 2; n < sweep.size(); ++n) {
    sign_changes += ((sweep[n] - sweep[n - 1]) * (sweep[n - 1] - sweep[n - 2]) < 0.0);
  }
  MESSAGE("outlet sweep: " << sweep.front() << " .. " << sweep.back() << ", slope sign changes " << sign_changes);
  CHECK(sign_changes <= 1);
}
