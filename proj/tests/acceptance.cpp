// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "bfc/cli.hpp"
#include "bfc/config.hpp"
#include "bfc/errors.hpp"
#include "bfc/oracle.hpp"
#include "bfc/verify.hpp"
#include "dense_oracle.hpp"
#include "support.hpp"

#include <fmt/format.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace bfc;
using bfc::test::make_problem;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

Outcome form_identities() {
  const Problem p = make_problem();
  const CoercivityConstants k = coercivity_constants(*p.forms);
  bool ok = k.velocity > 0.0 && k.temperature > 0.0;
  std::string worst;
  for (const auto& ch : verify_forms(*p.solver, k, 200, 1)) {
    if (!ch.passed) worst += fmt::format(" [{} = {:.2e}]", ch.name, ch.value);
    ok = ok && ch.passed;
  }
  return {ok, fmt::format("200 samples, c1 = {:.6g}, c1' = {:.6g}{}", k.velocity, k.temperature, worst)};
}

Outcome coercivity_oracle() {
  const Problem p = make_problem();
  const CoercivityConstants k = coercivity_constants(*p.forms);
  const CoercivityConstants o = bfc::test::dense_coercivity(*p.forms);
  const double e1 = std::abs(k.velocity - o.velocity) / o.velocity, e2 = std::abs(k.temperature - o.temperature) / o.temperature;
  return {e1 <= 1e-8 && e2 <= 1e-8, fmt::format("relative differences {:.2e}, {:.2e}", e1, e2)};
}

Outcome incompressibility() {
  const Problem p = make_problem([](RunConfig& c) {
    c.geometry.nx = 16;
    c.geometry.ny = 16;
    c.time = {0.1, 50};
  });
  const StateTrajectory t = p.solver->solve_forward(p.initial_velocity, p.initial_temperature, p.controls);
  const double worst = *std::max_element(t.max_divergence.begin(), t.max_divergence.end());
  return {t.num_steps() == 50 && worst <= 1e-10, fmt::format("16x16, 50 steps, max |div z| = {:.2e}", worst)};
}

Outcome energy_decay() {
  const Problem p = make_problem([](RunConfig& c) {
    c.physics.expansion = 0.0;
    c.time = {1.0, 100};
  });
  const ControlPair zero = make_controls(p.forms->domain(), 100, 0.0, 0.0, 0.1, 1.0, 0.1, 1.0);
  const StateTrajectory t = p.solver->solve_forward(p.initial_velocity, p.initial_temperature, zero, {false, false});
  int violations = 0;
  for (int m = 0; m < t.num_steps(); ++m) violations += t.kinetic_energy[m + 1] > t.kinetic_energy[m];
  return {violations == 0 && t.kinetic_energy.front() > 0.0,
          fmt::format("{} violations, kinetic energy {:.4g} -> {:.4g}", violations, t.kinetic_energy.front(),
                      t.kinetic_energy.back())};
}

Outcome gradient_exactness() {
  const Problem p = make_problem();
  const ControlDirection dv = random_direction(p.forms->domain(), 20, 1);
  const GradientCheckReport r = gradient_check(*p.solver, p.initial_velocity, p.initial_temperature, p.controls, p.weights, dv);
  std::string orders;
  for (const auto& row : r.rows) {
    if (row.observed_order != 0.0) orders += fmt::format(" {:.2f}", row.observed_order);
  }
  return {r.passed, fmt::format("min relative error {:.2e}, observed orders above roundoff:{}", r.min_error,
                                orders.empty() ? " none" : orders)};
}

Outcome exact_duality() {
  const Problem p = make_problem();
  const StateTrajectory base = p.solver->solve_forward(p.initial_velocity, p.initial_temperature, p.controls);
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    worst = std::max(worst, duality_check(*p.solver, base, random_direction(p.forms->domain(), 20, seed), p.weights));
  }
  return {worst <= 1e-10, fmt::format("20 directions, worst relative gap {:.2e}", worst)};
}

Outcome bang_bang() {
  const RunConfig c = default_config();
  const Problem p = build_problem(c);
  const ReducedProblem problem(p.solver, p.initial_velocity, p.initial_temperature, p.weights);
  const ControlSpace space = build_space(c, p);
  const OptimizationReport r = optimize(problem, space, space.restrict(p.controls), c.algorithm.optimizer);
  const bool ok = r.converged && r.iterations <= 200 && r.residual <= 1e-6 * r.initial_residual &&
                  r.switching_stats.agreement == 1.0;
  return {ok, fmt::format("{} iterations, R/R0 = {:.2e}, agreement = {}, J = {:.10g}", r.iterations,
                          r.initial_residual > 0 ? r.residual / r.initial_residual : 0.0, r.switching_stats.agreement,
                          r.J)};
}

Outcome brute_force() {
  const RunConfig c = default_config();
  const Problem p = build_problem(c);
  const ReducedProblem problem(p.solver, p.initial_velocity, p.initial_temperature, p.weights);
  const ControlSpace space = ControlSpace::coarse3(p.forms->domain(), p.controls, c.time);
  const OracleResult oracle = brute_force_oracle(problem, space, c.oracle_levels);
  const OptimizationReport r = optimize(problem, space, space.restrict(p.controls), c.algorithm.optimizer);
  const double gap = std::abs(r.J - oracle.best_J) / std::abs(oracle.best_J);

  RunConfig lc = default_config();
  bfc::test::linear_case(lc);
  const Problem lp = build_problem(lc);
  const ReducedProblem linear(lp.solver, lp.initial_velocity, lp.initial_temperature, lp.weights);
  const ControlSpace lspace = ControlSpace::coarse3(lp.forms->domain(), lp.controls, lc.time);
  const OracleResult loracle = brute_force_oracle(linear, lspace, lc.oracle_levels);
  const OptimizationReport lr = optimize(linear, lspace, lspace.restrict(lp.controls), lc.algorithm.optimizer);
  // Predicted corner: J decreases in the wall heat flux, so v2 sits at beta2.
  const double corner = lc.controls.heat_flux_max;
  const bool linear_ok = loracle.best_theta[2] == corner && lr.theta[2] == corner &&
                         std::abs(lr.J - loracle.best_J) <= 1e-8 * std::abs(loracle.best_J);
  return {gap <= 1e-8 && linear_ok,
          fmt::format("best J {:.12g} vs optimizer {:.12g} (rel {:.1e}); linear case v2 = {} / {}", oracle.best_J, r.J,
                      gap, loracle.best_theta[2], lr.theta[2])};
}

Outcome smallness() {
  const Problem p = make_problem();
  const CoercivityConstants k = coercivity_constants(*p.forms);
  PhysicalParams phys = p.solver->params();
  const double xi = std::max(std::abs(phys.buoyancy.x()), std::abs(phys.buoyancy.y()));

  phys.expansion = 0.0;
  const SmallnessReport zero = check_smallness(phys, k.velocity, k.temperature);

  // beta xi (beta xi + 1) = nu c1 k c1' / 2 solved for beta.
  const double target = phys.viscosity * k.velocity * phys.conductivity * k.temperature / 2.0;
  const double beta_eq = (-1.0 + std::sqrt(1.0 + 4.0 * target)) / (2.0 * xi);
  phys.expansion = 1e3 * beta_eq;
  const SmallnessReport big = check_smallness(phys, k.velocity, k.temperature);
  const double bx = phys.expansion * xi;
  const double lhs = bx * (bx + 1.0) / (phys.viscosity * k.velocity);
  const double rhs = phys.conductivity * k.temperature / 2.0;
  const bool match = std::abs(big.lhs - lhs) <= 1e-12 * lhs && std::abs(big.rhs - rhs) <= 1e-12 * rhs &&
                     zero.lhs == 0.0 && std::abs(zero.rhs - rhs) <= 1e-12 * rhs;
  return {zero.passes && !big.passes && match,
          fmt::format("beta = 0 passes; beta = {:.4g} (1e3 x equality point): lhs {:.6g} > rhs {:.6g}", phys.expansion,
                      big.lhs, big.rhs)};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "bfc_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ofstream(root / "config.json") << to_json(default_config()).dump(2);
  for (const std::string run : {"first", "second"}) {
    std::ostringstream out, err;
    const int code = run_command({"optimize", "--config", (root / "config.json").string(), "--seed", "7", "--out",
                                  (root / run).string()},
                                 out, err);
    if (code != 0) return {false, fmt::format("optimize exited with {}: {}", code, err.str())};
  }
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  int files = 0, differing = 0;
  for (const auto& e : fs::directory_iterator(root / "first")) {
    if (e.path().extension() != ".csv") continue;
    ++files;
    differing += slurp(e.path()) != slurp(root / "second" / e.path().filename());
  }
  return {files > 0 && differing == 0, fmt::format("{} CSV files compared, {} differ", files, differing)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"form identities", form_identities},
      {"coercivity constants vs dense oracle", coercivity_oracle},
      {"incompressibility", incompressibility},
      {"energy decay", energy_decay},
      {"gradient exactness", gradient_exactness},
      {"exact duality", exact_duality},
      {"optimality and bang-bang structure", bang_bang},
      {"brute-force agreement", brute_force},
      {"smallness check", smallness},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t n = 0; n < criteria.size(); ++n) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[n].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.passed;
    std::cout << fmt::format("{} criterion {:2d} {}: {} ({:.2f} s)\n", o.passed ? "PASS" : "FAIL", n + 1,
                             criteria[n].first, o.detail, secs);
  }
  std::cout << fmt::format("{}/{} criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
