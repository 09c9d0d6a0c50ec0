#include "bfc/config.hpp"

#include "bfc/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace bfc {

using nlohmann::json;

namespace {

constexpr std::array<Side, 4> kSides{Side::Left, Side::Right, Side::Bottom, Side::Top};

// Strict reader for one JSON object: typed optional fields, unknown keys rejected.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(fmt::format("{}: expected an object", where()));
  }
  ~Section() = default;

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ValidationError(fmt::format("{}: expected a number", field(key)));
    out = v.get<double>();
    if (!std::isfinite(out)) throw ValidationError(fmt::format("{}: must be finite", field(key)));
  }

  void integer(const std::string& key, int& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ValidationError(fmt::format("{}: expected an integer", field(key)));
    out = v.get<int>();
  }

  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ValidationError(fmt::format("{}: expected true or false", field(key)));
    out = v.get<bool>();
  }

  void string(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ValidationError(fmt::format("{}: expected a string", field(key)));
    out = v.get<std::string>();
  }

  void pair(const std::string& key, std::array<double, 2>& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ValidationError(fmt::format("{}: expected [number, number]", field(key)));
    }
    out = {v[0].get<double>(), v[1].get<double>()};
  }

  Section child(const std::string& key) { return Section(has(key) ? j_.at(key) : empty(), field(key)); }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ValidationError(fmt::format("{}: unknown key", field(key)));
    }
  }

 private:
  static const json& empty() {
    static const json e = json::object();
    return e;
  }
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

SideValues read_side_values(Section sec, const SideValues& defaults, bool present) {
  if (!present) return defaults;
  SideValues out;
  for (Side s : kSides) {
    double v = 0.0;
    const std::string key(to_string(s));
    if (sec.has(key)) {
      sec.number(key, v);
      out[s] = v;
    }
  }
  sec.finish();
  return out;
}

std::string line_context(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return fmt::format("line {}, column {}", line, col);
}

RunConfig from_json(const json& root) {
  RunConfig c = default_config();
  Section top(root, "");

  {
    Section g = top.child("geometry");
    g.number("Lx", c.geometry.Lx);
    g.number("Ly", c.geometry.Ly);
    g.integer("nx", c.geometry.nx);
    g.integer("ny", c.geometry.ny);
    if (g.has("partition")) {
      Section p = g.child("partition");
      for (int i = 0; i < 4; ++i) {
        std::string label(to_string(c.sides[i]));
        const std::string key(to_string(kSides[i]));
        p.string(key, label);
        auto part = part_from_string(label);
        if (!part) throw ValidationError(fmt::format("{}: expected gamma1 or gamma2", p.field(key)));
        c.sides[i] = *part;
      }
      p.finish();
    }
    g.finish();
  }
  {
    Section p = top.child("physics");
    p.number("nu", c.physics.viscosity);
    p.number("k", c.physics.conductivity);
    p.number("beta", c.physics.expansion);
    std::array<double, 2> xi{c.physics.buoyancy.x(), c.physics.buoyancy.y()};
    p.pair("xi", xi);
    c.physics.buoyancy = {xi[0], xi[1]};
    p.finish();
  }
  {
    Section t = top.child("time");
    t.number("T", c.time.T);
    t.integer("nt", c.time.nt);
    t.boolean("allow_cfl_violation", c.allow_cfl_violation);
    t.finish();
  }
  {
    Section i = top.child("initial");
    Section v = i.child("velocity");
    v.string("kind", c.initial.velocity);
    v.number("amplitude", c.initial.velocity_amplitude);
    v.finish();
    Section w = i.child("temperature");
    w.string("kind", c.initial.temperature);
    w.number("amplitude", c.initial.temperature_amplitude);
    w.number("width", c.initial.temperature_width);
    w.pair("center", c.initial.temperature_center);
    w.finish();
    i.finish();
  }
  {
    Section s = top.child("cost");
    s.number("N1", c.cost.outflow_weight);
    s.number("N2", c.cost.heat_weight);
    const bool has_r1 = s.has("r1");
    c.cost.outflow_profile = read_side_values(s.child("r1"), c.cost.outflow_profile, has_r1);
    const bool has_r2 = s.has("r2");
    c.cost.heat_profile = read_side_values(s.child("r2"), c.cost.heat_profile, has_r2);
    std::string form = c.cost.form == ObjectiveForm::Trace ? "trace" : "flux";
    s.string("objective_form", form);
    if (form == "trace") {
      c.cost.form = ObjectiveForm::Trace;
    } else if (form == "flux") {
      c.cost.form = ObjectiveForm::Flux;
    } else {
      throw ValidationError(fmt::format("cost.objective_form: expected trace or flux, got '{}'", form));
    }
    s.finish();
  }
  {
    Section k = top.child("controls");
    k.number("alpha1", c.controls.pressure_min);
    k.number("beta1", c.controls.pressure_max);
    k.number("alpha2", c.controls.heat_flux_min);
    k.number("beta2", c.controls.heat_flux_max);
    k.number("v1_initial", c.controls.pressure_initial);
    k.number("v2_initial", c.controls.heat_flux_initial);
    std::string param = c.controls.parametrization == ControlParametrization::Full ? "full" : "coarse3";
    k.string("parametrization", param);
    if (param == "full") {
      c.controls.parametrization = ControlParametrization::Full;
    } else if (param == "coarse3") {
      c.controls.parametrization = ControlParametrization::Coarse3;
    } else {
      throw ValidationError(fmt::format("controls.parametrization: expected full or coarse3, got '{}'", param));
    }
    k.finish();
  }
  {
    Section a = top.child("algorithm");
    auto& o = c.algorithm.optimizer;
    std::string method = o.method == Method::ProjectedGradient ? "projected_gradient" : "conditional_gradient";
    a.string("method", method);
    if (method == "projected_gradient") {
      o.method = Method::ProjectedGradient;
    } else if (method == "conditional_gradient") {
      o.method = Method::ConditionalGradient;
    } else {
      throw ValidationError(
          fmt::format("algorithm.method: expected projected_gradient or conditional_gradient, got '{}'", method));
    }
    a.number("tol_rel", o.tol_rel);
    a.integer("max_iter", o.max_iter);
    a.number("armijo_c", o.armijo_c);
    a.number("tie_rel", o.tie_rel);
    a.integer("samples", c.algorithm.samples);
    if (a.has("epsilons")) {
      const json& e = root.at("algorithm").at("epsilons");
      if (!e.is_array()) throw ValidationError("algorithm.epsilons: expected an array of numbers");
      c.algorithm.epsilons.clear();
      for (const auto& x : e) {
        if (!x.is_number()) throw ValidationError("algorithm.epsilons: expected an array of numbers");
        c.algorithm.epsilons.push_back(x.get<double>());
      }
    }
    a.finish();
  }
  {
    Section o = top.child("oracle");
    o.integer("levels", c.oracle_levels);
    o.finish();
  }
  {
    Section o = top.child("output");
    o.string("directory", c.output_directory);
    o.integer("field_stride", c.field_stride);
    o.finish();
  }
  if (top.has("seed")) {
    const json& s = root.at("seed");
    if (!s.is_number_unsigned()) throw ValidationError("seed: expected a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  top.finish();
  return c;
}

std::vector<Part> partition_of(const RunConfig& c) {
  return partition_by_side(c.geometry.nx, c.geometry.ny, c.sides[0], c.sides[1], c.sides[2], c.sides[3]);
}

}  // namespace

RunConfig default_config() {
  RunConfig c;
  c.physics.viscosity = 0.05;
  c.physics.conductivity = 0.05;
  c.physics.expansion = 1.0;
  c.time = {0.2, 20};
  c.initial.velocity = "vortex";
  c.initial.temperature = "gaussian";
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError(fmt::format("override '{}': expected key=value", assignment));
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &j;
  std::stringstream ss(path);
  std::string key;
  std::vector<std::string> keys;
  while (std::getline(ss, key, '.')) {
    if (key.empty()) throw ValidationError(fmt::format("override '{}': empty path component", assignment));
    keys.push_back(key);
  }
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    if (!node->is_object()) throw ValidationError(fmt::format("override '{}': {} is not an object", assignment, keys[i]));
    node = &(*node)[keys[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) throw ValidationError(fmt::format("override '{}': parent is not an object", assignment));
  (*node)[keys.back()] = value;
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("config parse error at {}: {}", line_context(text, e.byte == 0 ? 0 : e.byte - 1), e.what()));
  }
  if (!root.is_object()) throw ValidationError("config: top level must be an object");
  for (const auto& o : overrides) apply_override(root, o);
  RunConfig c = from_json(root);
  validate(c);
  return c;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open config file '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), overrides);
}

void validate(const RunConfig& c) {
  GeometryConfig g = c.geometry;
  g.partition = partition_of(c);
  const Domain d = build_domain(g);
  c.physics.validate();
  c.time.validate();

  const double h = std::min(d.hx(), d.hy());
  const double diffusive = 0.5 * std::min(h * h / (4.0 * c.physics.viscosity), h * h / (4.0 * c.physics.conductivity));
  if (c.time.dt() > diffusive && !c.allow_cfl_violation) {
    throw ValidationError(fmt::format("time: dt = {:.4g} exceeds the diffusive CFL bound {:.4g}; use nt >= {}",
                                      c.time.dt(), diffusive, static_cast<long>(std::ceil(c.time.T / diffusive))));
  }

  if (!(c.cost.outflow_weight > 0.0) || !(c.cost.heat_weight > 0.0)) throw ValidationError("cost: N1 > 0 and N2 > 0 required");
  const auto& k = c.controls;
  if (!(k.pressure_min > 0.0) || !(k.heat_flux_min > 0.0)) {
    throw ValidationError("controls: admissible box needs 0 < alpha1 and 0 < alpha2");
  }
  if (!(k.pressure_min <= k.pressure_max)) {
    throw ValidationError(fmt::format("controls: admissible box for v1 needs alpha1 <= beta1 (got {} > {})", k.pressure_min, k.pressure_max));
  }
  if (!(k.heat_flux_min <= k.heat_flux_max)) {
    throw ValidationError(fmt::format("controls: admissible box for v2 needs alpha2 <= beta2 (got {} > {})", k.heat_flux_min, k.heat_flux_max));
  }

  if (c.initial.velocity != "zero" && c.initial.velocity != "vortex") {
    throw ValidationError(fmt::format("initial.velocity.kind: expected zero or vortex, got '{}'", c.initial.velocity));
  }
  if (c.initial.temperature != "zero" && c.initial.temperature != "gaussian") {
    throw ValidationError(
        fmt::format("initial.temperature.kind: expected zero or gaussian, got '{}'", c.initial.temperature));
  }
  if (!(c.initial.temperature_width > 0.0)) throw ValidationError("initial.temperature.width > 0 required");

  const auto& o = c.algorithm.optimizer;
  if (!(o.tol_rel >= 0.0)) throw ValidationError("algorithm.tol_rel >= 0 required");
  if (o.max_iter < 0) throw ValidationError("algorithm.max_iter >= 0 required");
  if (!(o.armijo_c > 0.0 && o.armijo_c < 1.0)) throw ValidationError("algorithm.armijo_c in (0, 1) required");
  if (!(o.tie_rel >= 0.0)) throw ValidationError("algorithm.tie_rel >= 0 required");
  if (c.algorithm.epsilons.empty()) throw ValidationError("algorithm.epsilons must not be empty");
  for (double e : c.algorithm.epsilons) {
    if (!(e > 0.0)) throw ValidationError("algorithm.epsilons must be positive");
  }
  if (c.algorithm.samples < 1) throw ValidationError("algorithm.samples >= 1 required");
  if (c.oracle_levels < 2 || c.oracle_levels > 9) throw ValidationError("oracle.levels must lie in [2, 9]");
  if (c.output_directory.empty()) throw ValidationError("output.directory must not be empty");
  if (c.field_stride < 0) throw ValidationError("output.field_stride >= 0 required");
}

json to_json(const RunConfig& c) {
  auto sides = [](const SideValues& v) {
    json j = json::object();
    for (const auto& [side, value] : v) j[std::string(to_string(side))] = value;
    return j;
  };
  json part = json::object();
  for (int i = 0; i < 4; ++i) part[std::string(to_string(kSides[i]))] = std::string(to_string(c.sides[i]));
  const auto& o = c.algorithm.optimizer;
  return json{
      {"geometry", {{"Lx", c.geometry.Lx}, {"Ly", c.geometry.Ly}, {"nx", c.geometry.nx}, {"ny", c.geometry.ny}, {"partition", part}}},
      {"physics", {{"nu", c.physics.viscosity}, {"k", c.physics.conductivity}, {"beta", c.physics.expansion}, {"xi", {c.physics.buoyancy.x(), c.physics.buoyancy.y()}}}},
      {"time", {{"T", c.time.T}, {"nt", c.time.nt}, {"allow_cfl_violation", c.allow_cfl_violation}}},
      {"initial",
       {{"velocity", {{"kind", c.initial.velocity}, {"amplitude", c.initial.velocity_amplitude}}},
        {"temperature",
         {{"kind", c.initial.temperature},
          {"amplitude", c.initial.temperature_amplitude},
          {"width", c.initial.temperature_width},
          {"center", c.initial.temperature_center}}}}},
      {"cost",
       {{"N1", c.cost.outflow_weight},
        {"N2", c.cost.heat_weight},
        {"r1", sides(c.cost.outflow_profile)},
        {"r2", sides(c.cost.heat_profile)},
        {"objective_form", c.cost.form == ObjectiveForm::Trace ? "trace" : "flux"}}},
      {"controls",
       {{"alpha1", c.controls.pressure_min},
        {"beta1", c.controls.pressure_max},
        {"alpha2", c.controls.heat_flux_min},
        {"beta2", c.controls.heat_flux_max},
        {"v1_initial", c.controls.pressure_initial},
        {"v2_initial", c.controls.heat_flux_initial},
        {"parametrization", c.controls.parametrization == ControlParametrization::Full ? "full" : "coarse3"}}},
      {"algorithm",
       {{"method", o.method == Method::ProjectedGradient ? "projected_gradient" : "conditional_gradient"},
        {"tol_rel", o.tol_rel},
        {"max_iter", o.max_iter},
        {"armijo_c", o.armijo_c},
        {"tie_rel", o.tie_rel},
        {"epsilons", c.algorithm.epsilons},
        {"samples", c.algorithm.samples}}},
      {"oracle", {{"levels", c.oracle_levels}}},
      {"output", {{"directory", c.output_directory}, {"field_stride", c.field_stride}}},
      {"seed", c.seed},
  };
}

Problem build_problem(const RunConfig& c) {
  validate(c);
  GeometryConfig g = c.geometry;
  g.partition = partition_of(c);
  const Domain d = build_domain(g);

  Problem p;
  p.forms = std::make_shared<DiscreteForms>(d, c.physics);
  p.solver = std::make_shared<StateSolver>(p.forms, c.physics, c.time);
  const Domain& dom = p.forms->domain();

  if (c.initial.velocity == "vortex") {
    const double a = c.initial.velocity_amplitude, lx = dom.Lx(), ly = dom.Ly();
    p.initial_velocity = from_streamfunction(dom, [=](double x, double y) {
      const double s = std::sin(M_PI * x / lx) * std::sin(M_PI * y / ly);
      return a * s * s;
    });
  } else {
    p.initial_velocity = zero_velocity(dom);
  }
  if (c.initial.temperature == "gaussian") {
    const double a = c.initial.temperature_amplitude, wdt = c.initial.temperature_width;
    const double cx = c.initial.temperature_center[0] * dom.Lx(), cy = c.initial.temperature_center[1] * dom.Ly();
    p.initial_temperature = sample_scalar(dom, [=](double x, double y) {
      return a * std::exp(-wdt * ((x - cx) * (x - cx) + (y - cy) * (y - cy)));
    });
  } else {
    p.initial_temperature = zero_scalar(dom);
  }

  const auto& k = c.controls;
  p.controls = make_controls(dom, c.time.nt, k.pressure_initial, k.heat_flux_initial, k.pressure_min, k.pressure_max, k.heat_flux_min, k.heat_flux_max);

  auto side_weight = [](const SideValues& v) {
    return [&v](const BoundaryFace& f) {
      auto it = v.find(f.side);
      return it == v.end() ? 0.0 : it->second;
    };
  };
  p.weights.outflow_weight = c.cost.outflow_weight;
  p.weights.heat_weight = c.cost.heat_weight;
  p.weights.outflow_profile = BoundaryFunction::from_faces(dom, Part::Gamma1, 1, side_weight(c.cost.outflow_profile));
  p.weights.heat_profile = BoundaryFunction::from_faces(dom, Part::Gamma2, 1, side_weight(c.cost.heat_profile));
  p.weights.form = c.cost.form;
  return p;
}

ControlSpace build_space(const RunConfig& c, const Problem& p) {
  return c.controls.parametrization == ControlParametrization::Full
             ? ControlSpace::full(p.forms->domain(), p.controls, c.time)
             : ControlSpace::coarse3(p.forms->domain(), p.controls, c.time);
}

}  // namespace bfc
