#include "bfc/cli.hpp"

#include "bfc/config.hpp"
#include "bfc/errors.hpp"
#include "bfc/io.hpp"
#include "bfc/oracle.hpp"
#include "bfc/verify.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bfc {

namespace {

using nlohmann::json;

struct Invocation {
  std::string command;
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  bool flip_sign = false;
};

json run_metadata(const Invocation& inv, const RunConfig& c) {
  return {{"command", inv.command},
          {"steps", c.time.nt},
          {"dt", c.time.dt()},
          {"seed", c.seed},
          {"parameters",
           {{"nu", c.physics.viscosity},
            {"k", c.physics.conductivity},
            {"beta", c.physics.expansion},
            {"xi", {c.physics.buoyancy.x(), c.physics.buoyancy.y()}},
            {"N1", c.cost.outflow_weight},
            {"N2", c.cost.heat_weight}}}};
}

OutputWriter open_output(const RunConfig& c) {
  OutputWriter w(c.output_directory);
  w.write("config.json", to_json(c).dump(2) + "\n");
  return w;
}

void write_fields(OutputWriter& w, const Domain& d, const StateTrajectory& traj, int level) {
  const std::string tag = fmt::format("{:04d}", level);
  w.write("u_" + tag + ".csv", velocity_csv(d, traj.velocity[level], 0));
  w.write("v_" + tag + ".csv", velocity_csv(d, traj.velocity[level], 1));
  w.write("w_" + tag + ".csv", scalar_csv(d, traj.temperature[level]));
  w.write("P_" + tag + ".csv", scalar_csv(d, traj.total_pressure[level]));
  w.write("pi_" + tag + ".csv", scalar_csv(d, traj.static_pressure(level, d)));
}

void write_controls(OutputWriter& w, const Domain& d, const ControlPair& v, double dt) {
  w.write("control_v1.csv", boundary_csv(d, v.pressure, dt));
  w.write("control_v2.csv", boundary_csv(d, v.heat_flux, dt));
}

void write_gradient(OutputWriter& w, const Domain& d, const CostGradient& grad, const CostGradient& switching,
                    double dt) {
  w.write("gradient_v1.csv", face_time_csv(d, grad.pressure, dt));
  w.write("gradient_v2.csv", face_time_csv(d, grad.heat_flux, dt));
  w.write("switching_v1.csv", face_time_csv(d, switching.pressure, dt));
  w.write("switching_v2.csv", face_time_csv(d, switching.heat_flux, dt));
}

SolveOptions solve_options(const RunConfig& c, bool enforce_bounds) {
  SolveOptions o;
  o.enforce_bounds = enforce_bounds;
  o.allow_cfl_violation = c.allow_cfl_violation;
  return o;
}

int cmd_simulate(const Invocation& inv, const RunConfig& c, std::ostream& out) {
  const Problem p = build_problem(c);
  const Domain& d = p.forms->domain();
  const StateTrajectory traj = p.solver->solve_forward(p.initial_velocity, p.initial_temperature, p.controls, solve_options(c, false));
  const double J = evaluate_cost(traj, p.controls, p.weights, *p.solver);

  OutputWriter w = open_output(c);
  w.write("energy.csv", energy_csv(traj));
  const int nt = c.time.nt;
  const int stride = c.field_stride > 0 ? c.field_stride : std::max(1, nt / 10);
  for (int m = 0; m <= nt; m += stride) write_fields(w, d, traj, m);
  if (nt % stride != 0) write_fields(w, d, traj, nt);
  write_controls(w, d, p.controls, c.time.dt());

  BoundaryFunction flux = BoundaryFunction::constant(d, Part::Gamma1, nt + 1, 0.0);
  for (int m = 0; m <= nt; ++m) {
    const BoundaryFunction zn = normal_trace(traj.velocity[m], Part::Gamma1, d);
    for (int k = 0; k < flux.num_faces; ++k) flux.at(m, k) = zn.at(0, k);
  }
  w.write("normal_trace.csv", boundary_csv(d, flux, c.time.dt()));

  const double max_div = *std::max_element(traj.max_divergence.begin(), traj.max_divergence.end());
  json meta = run_metadata(inv, c);
  meta["J"] = J;
  meta["max_divergence"] = max_div;
  w.write_manifest(meta);

  fmt::print(out, "simulate: {} steps, dt = {}, J = {:.10g}\n", nt, c.time.dt(), J);
  fmt::print(out, "kinetic energy {:.6g} -> {:.6g}, thermal energy {:.6g} -> {:.6g}, max |div| = {:.3e}\n",
             traj.kinetic_energy.front(), traj.kinetic_energy.back(), traj.thermal_energy.front(),
             traj.thermal_energy.back(), max_div);
  fmt::print(out, "wrote {} files to {}\n", w.files().size(), w.directory().string());
  return kExitOk;
}

int cmd_optimize(const Invocation& inv, const RunConfig& c, std::ostream& out) {
  const Problem p = build_problem(c);
  const Domain& d = p.forms->domain();
  if (!is_admissible(p.controls)) throw ValidationError("controls: initial guess lies outside the admissible box");
  const ReducedProblem problem(p.solver, p.initial_velocity, p.initial_temperature, p.weights, solve_options(c, true));
  const ControlSpace space = build_space(c, p);
  const OptimizationReport rep = optimize(problem, space, space.restrict(p.controls), c.algorithm.optimizer);
  const auto final_eval = problem.evaluate(rep.control);

  OutputWriter w = open_output(c);
  w.write("convergence.csv", convergence_csv(rep.history));
  write_controls(w, d, rep.control, c.time.dt());
  write_gradient(w, d, final_eval.gradient, final_eval.switching, c.time.dt());
  w.write("energy.csv", energy_csv(final_eval.trajectory));
  write_fields(w, d, final_eval.trajectory, c.time.nt);

  json report = {{"J", rep.J},
                 {"residual", rep.residual},
                 {"initial_residual", rep.initial_residual},
                 {"iterations", rep.iterations},
                 {"converged", rep.converged},
                 {"termination", rep.termination},
                 {"switching", to_json(rep.switching_stats)}};
  w.write("report.json", report.dump(2) + "\n");
  json meta = run_metadata(inv, c);
  meta["J"] = rep.J;
  meta["residual"] = rep.residual;
  w.write_manifest(meta);

  for (const auto& h : rep.history) {
    fmt::print(out, "iter {:3d}  J = {:.10g}  R = {:.3e}  step = {:g}  lower/upper/interior = {:.3f}/{:.3f}/{:.3f}\n",
               h.iter, h.J, h.residual, h.step_size, h.frac_lower, h.frac_upper, h.frac_interior);
  }
  fmt::print(out, "termination: {} ({}), R/R0 = {:.3e}, bang-bang agreement = {:.6f}\n", rep.termination,
             rep.converged ? "converged" : "not converged",
             rep.initial_residual > 0.0 ? rep.residual / rep.initial_residual : 0.0, rep.switching_stats.agreement);
  return kExitOk;
}

int cmd_gradient_check(const Invocation& inv, const RunConfig& c, std::ostream& out) {
  const Problem p = build_problem(c);
  const Domain& d = p.forms->domain();
  const ControlDirection dv = random_direction(d, c.time.nt, c.seed);
  const GradientCheckReport rep = gradient_check(*p.solver, p.initial_velocity, p.initial_temperature, p.controls, p.weights, dv,
                                                 c.algorithm.epsilons, inv.flip_sign ? -1.0 : 1.0);

  OutputWriter w = open_output(c);
  w.write("gradient_check.json", to_json(rep).dump(2) + "\n");
  const StateTrajectory base = p.solver->solve_forward(p.initial_velocity, p.initial_temperature, p.controls, solve_options(c, false));
  const AdjointTrajectory adj = solve_adjoint(*p.solver, base, p.weights);
  const CostGradient grad = assemble_gradient(*p.solver, adj, p.weights);
  write_gradient(w, d, grad, switching_functions(grad, p.weights), c.time.dt());
  json meta = run_metadata(inv, c);
  meta["result"] = rep.passed ? "PASS" : "FAIL";
  w.write_manifest(meta);

  fmt::print(out, "{:>10} {:>24} {:>24} {:>12} {:>8}\n", "epsilon", "central difference", "adjoint", "rel. error",
             "order");
  for (const auto& r : rep.rows) {
    fmt::print(out, "{:>10.1e} {:>24.16e} {:>24.16e} {:>12.3e} {:>8}\n", r.epsilon, r.finite_difference, r.adjoint,
               r.error, r.observed_order != 0.0 ? fmt::format("{:.2f}", r.observed_order) : "-");
  }
  fmt::print(out, "adjoint residual diagnostic: velocity {:.3e}, temperature {:.3e}; sup |z| = {:.4g}\n",
             adj.residual_velocity, adj.residual_temperature, adj.base_sup_norm);
  fmt::print(out, "{} min relative error {:.3e}, second-order decay {}\n", rep.passed ? "PASS" : "FAIL", rep.min_error,
             rep.order_ok ? "observed" : "not observed");
  return rep.passed ? kExitOk : kExitNumerical;
}

int cmd_verify_forms(const Invocation& inv, const RunConfig& c, std::ostream& out) {
  const Problem p = build_problem(c);
  const CoercivityConstants k = coercivity_constants(*p.forms);
  const auto checks = verify_forms(*p.solver, k, c.algorithm.samples, c.seed);

  OutputWriter w = open_output(c);
  json table = json::array();
  bool all = true;
  fmt::print(out, "{:<32} {:>12} {:>10}  result\n", "identity", "worst", "tolerance");
  for (const auto& ch : checks) {
    fmt::print(out, "{:<32} {:>12.3e} {:>10.1e}  {}\n", ch.name, ch.value, ch.tolerance, ch.passed ? "PASS" : "FAIL");
    table.push_back({{"name", ch.name}, {"value", ch.value}, {"tolerance", ch.tolerance}, {"passed", ch.passed}});
    all = all && ch.passed;
  }
  w.write("forms_check.json", json{{"c1", k.velocity}, {"c1_prime", k.temperature}, {"checks", table}}.dump(2) + "\n");
  if (p.forms->domain().num_cells() <= 32 * 32) {
    auto coo = [](const SparseMatrix& m) {
      std::ostringstream os;
      write_coo(os, m);
      return os.str();
    };
    w.write("A1.coo", coo(p.forms->viscous_matrix()));
    w.write("A2.coo", coo(p.forms->diffusion_matrix()));
    w.write("div.coo", coo(p.forms->divergence_matrix()));
  }
  json meta = run_metadata(inv, c);
  meta["result"] = all ? "PASS" : "FAIL";
  w.write_manifest(meta);
  fmt::print(out, "c1 = {:.10g}, c1' = {:.10g}\n{}\n", k.velocity, k.temperature, all ? "all identities PASS" : "FAIL");
  return all ? kExitOk : kExitNumerical;
}

int cmd_check_smallness(const Invocation& inv, const RunConfig& c, std::ostream& out) {
  const Problem p = build_problem(c);
  const CoercivityConstants k = coercivity_constants(*p.forms);
  const SmallnessReport s = check_smallness(c.physics, k.velocity, k.temperature);

  OutputWriter w = open_output(c);
  w.write("smallness.json", json{{"c1", k.velocity},
                                 {"c1_prime", k.temperature},
                                 {"lhs", s.lhs},
                                 {"rhs", s.rhs},
                                 {"margin", s.margin},
                                 {"passes", s.passes}}
                                .dump(2) + "\n");
  w.write_manifest(run_metadata(inv, c));
  fmt::print(out, "c1 = {:.10g}, c1' = {:.10g}\n", k.velocity, k.temperature);
  fmt::print(out, "beta|xi|(beta|xi| + 1)/(nu c1) = {:.10g}\nk c1'/2 = {:.10g}\nmargin = {:.10g}: {}\n", s.lhs, s.rhs,
             s.margin, s.passes ? "smallness condition holds" : "smallness condition violated");
  return kExitOk;
}

int cmd_oracle(const Invocation& inv, const RunConfig& c, std::ostream& out) {
  const Problem p = build_problem(c);
  if (!is_admissible(p.controls)) throw ValidationError("controls: initial guess lies outside the admissible box");
  const ReducedProblem problem(p.solver, p.initial_velocity, p.initial_temperature, p.weights, solve_options(c, true));
  const ControlSpace space = ControlSpace::coarse3(p.forms->domain(), p.controls, c.time);
  const OracleResult oracle = brute_force_oracle(problem, space, c.oracle_levels);
  const OptimizationReport rep = optimize(problem, space, space.restrict(p.controls), c.algorithm.optimizer);

  std::string table = fmt::format("{},J\n", fmt::join(space.names(), ","));
  for (const auto& e : oracle.table) {
    table += fmt::format("{},{}\n", fmt::join(e.theta.data(), e.theta.data() + e.theta.size(), ","), e.J);
  }
  const double tol = 1e-8 * std::max(1.0, std::abs(oracle.best_J));
  const bool agrees = rep.J <= oracle.best_J + tol;

  OutputWriter w = open_output(c);
  w.write("oracle_table.csv", table);
  w.write("convergence.csv", convergence_csv(rep.history));
  w.write("oracle.json",
          json{{"levels", c.oracle_levels},
               {"parameters", space.names()},
               {"best_J", oracle.best_J},
               {"best_theta", std::vector<double>(oracle.best_theta.data(), oracle.best_theta.data() + oracle.best_theta.size())},
               {"optimizer_J", rep.J},
               {"optimizer_theta", std::vector<double>(rep.theta.data(), rep.theta.data() + rep.theta.size())},
               {"agrees", agrees}}
                  .dump(2) + "\n");
  w.write_manifest(run_metadata(inv, c));

  fmt::print(out, "oracle: {} forward solves, best J = {:.12g} at ({})\n", oracle.table.size(), oracle.best_J,
             fmt::join(oracle.best_theta.data(), oracle.best_theta.data() + oracle.best_theta.size(), ", "));
  fmt::print(out, "restricted optimizer: J = {:.12g} at ({}) after {} iterations\n", rep.J,
             fmt::join(rep.theta.data(), rep.theta.data() + rep.theta.size(), ", "), rep.iterations);
  fmt::print(out, "{}\n", agrees ? "AGREE" : "DISAGREE");
  return agrees ? kExitOk : kExitNumerical;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Boundary flux control of Boussinesq flow: simulation, adjoint gradients, optimization"};
  app.require_subcommand(1);
  Invocation inv;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", inv.config_path, "JSON configuration file")->required();
    sub->add_option("--out", inv.out_dir, "output directory (overrides output.directory)");
    sub->add_option("--seed", seed, "random seed (overrides seed)");
    sub->add_option("--override", inv.overrides, "dot-path override key=value (repeatable)");
  };
  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "forward solve with the initial controls"},
      {"optimize", "minimize the cost over the admissible controls"},
      {"gradient-check", "adjoint gradient against central differences"},
      {"verify-forms", "randomized identities of the discrete forms"},
      {"check-smallness", "coercivity constants and the buoyancy smallness condition"},
      {"oracle", "brute-force search over the 3-parameter control family"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub);
    if (name == "gradient-check") sub->add_flag("--flip-sign", inv.flip_sign, "negate the adjoint gradient");
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }
  inv.command = app.get_subcommands().front()->get_name();
  const CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed") > 0) inv.seed = seed;

  try {
    std::vector<std::string> overrides = inv.overrides;
    if (inv.seed) overrides.push_back(fmt::format("seed={}", *inv.seed));
    if (!inv.out_dir.empty()) overrides.push_back("output.directory=\"" + inv.out_dir + "\"");
    const RunConfig c = load_config(inv.config_path, overrides);
    if (inv.command == "simulate") return cmd_simulate(inv, c, out);
    if (inv.command == "optimize") return cmd_optimize(inv, c, out);
    if (inv.command == "gradient-check") return cmd_gradient_check(inv, c, out);
    if (inv.command == "verify-forms") return cmd_verify_forms(inv, c, out);
    if (inv.command == "check-smallness") return cmd_check_smallness(inv, c, out);
    return cmd_oracle(inv, c, out);
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace bfc
