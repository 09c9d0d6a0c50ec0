#pragma once

#include "bfc/forms.hpp"
#include "bfc/grid.hpp"
#include "bfc/optimizer.hpp"
#include "bfc/state.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace bfc {

/// Per-side constant boundary data (r1, r2); missing sides are zero.
using SideValues = std::map<Side, double>;

enum class ControlParametrization { Full, Coarse3 };

struct InitialConfig {
  std::string velocity = "zero";  ///< "zero" or "vortex"
  double velocity_amplitude = 0.5;
  std::string temperature = "zero";  ///< "zero" or "gaussian"
  double temperature_amplitude = 1.0;
  double temperature_width = 20.0;  ///< exponent factor of exp(-width |x - c|^2)
  std::array<double, 2> temperature_center{0.5, 0.5};  ///< relative to (Lx, Ly)
};

struct CostConfig {
  double outflow_weight = 100.0;
  double heat_weight = 100.0;
  SideValues outflow_profile{{Side::Right, 1.0}};
  SideValues heat_profile{{Side::Bottom, 1.0}, {Side::Top, 1.0}};
  ObjectiveForm form = ObjectiveForm::Trace;
};

struct ControlConfig {
  double pressure_min = 0.1, pressure_max = 1.0;
  double heat_flux_min = 0.1, heat_flux_max = 1.0;
  double pressure_initial = 0.55;
  double heat_flux_initial = 0.55;
  ControlParametrization parametrization = ControlParametrization::Full;
};

struct AlgorithmConfig {
  OptimizerOptions optimizer;
  std::vector<double> epsilons = kDefaultEpsilons;
  int samples = 200;  ///< random fields per identity in verify-forms
};

struct RunConfig {
  GeometryConfig geometry;
  std::array<Part, 4> sides{Part::Gamma1, Part::Gamma1, Part::Gamma2, Part::Gamma2};  ///< left, right, bottom, top
  PhysicalParams physics;
  TimeGrid time;
  bool allow_cfl_violation = false;
  InitialConfig initial;
  CostConfig cost;
  ControlConfig controls;
  AlgorithmConfig algorithm;
  int oracle_levels = 5;
  std::string output_directory = "out";
  int field_stride = 0;  ///< levels between field dumps; 0 picks about ten dumps
  std::uint64_t seed = 1;
};

/// Built-in configuration (8x8 grid, 20 steps, convection with bang-bang optimum).
RunConfig default_config();

/// Parses JSON text into a validated config; throws ValidationError with the
/// line/column of a syntax error or the dotted path of a bad field.
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {});
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});
/// Applies one `dot.path=value` override; the value is parsed as JSON when
/// possible and taken as a string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Checks every precondition the solvers would check, before any solve.
void validate(const RunConfig& c);

/// Fully resolved config (defaults filled in), the form echoed to output.
nlohmann::json to_json(const RunConfig& c);

/// Objects assembled from a config.
struct Problem {
  std::shared_ptr<const DiscreteForms> forms;
  std::shared_ptr<const StateSolver> solver;
  VelocityField initial_velocity;
  ScalarField initial_temperature;
  ControlPair controls;  ///< initial guess with bounds, one slot per step
  CostWeights weights;
};

Problem build_problem(const RunConfig& c);
ControlSpace build_space(const RunConfig& c, const Problem& p);

}  // namespace bfc
