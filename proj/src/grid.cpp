#include "bfc/grid.hpp"

#include "bfc/errors.hpp"

#include <fmt/format.h>

#include <cmath>

namespace bfc {

std::string_view to_string(Part p) { return p == Part::Gamma1 ? "Gamma1" : "Gamma2"; }

std::string_view to_string(Side s) {
  switch (s) {
    case Side::Left: return "left";
    case Side::Right: return "right";
    case Side::Bottom: return "bottom";
    case Side::Top: return "top";
  }
  return "?";
}

std::optional<Part> part_from_string(std::string_view s) {
  if (s == "Gamma1" || s == "gamma1" || s == "1") return Part::Gamma1;
  if (s == "Gamma2" || s == "gamma2" || s == "2") return Part::Gamma2;
  return std::nullopt;
}

std::optional<Side> side_from_string(std::string_view s) {
  if (s == "left") return Side::Left;
  if (s == "right") return Side::Right;
  if (s == "bottom") return Side::Bottom;
  if (s == "top") return Side::Top;
  return std::nullopt;
}

std::vector<Part> partition_by_side(int nx, int ny, Part left, Part right, Part bottom, Part top) {
  std::vector<Part> out;
  out.reserve(2 * (nx + ny));
  out.insert(out.end(), ny, left);
  out.insert(out.end(), ny, right);
  out.insert(out.end(), nx, bottom);
  out.insert(out.end(), nx, top);
  return out;
}

Domain::Domain(const GeometryConfig& c) : Lx_(c.Lx), Ly_(c.Ly), nx_(c.nx), ny_(c.ny) {
  if (!(c.Lx > 0.0) || !(c.Ly > 0.0)) throw ValidationError("domain lengths Lx, Ly must be positive");
  if (c.nx < 4 || c.ny < 4) throw ValidationError(fmt::format("nx, ny >= 4 required (got {} x {})", c.nx, c.ny));
  hx_ = Lx_ / nx_;
  hy_ = Ly_ / ny_;

  const int nfaces = 2 * (nx_ + ny_);
  std::vector<Part> labels = c.partition;
  if (labels.empty()) {
    labels = partition_by_side(nx_, ny_, Part::Gamma1, Part::Gamma1, Part::Gamma2, Part::Gamma2);
  }
  if (static_cast<int>(labels.size()) != nfaces) {
    throw ValidationError(fmt::format("partition must label {} boundary faces, got {}", nfaces, labels.size()));
  }

  faces_.reserve(nfaces);
  auto add = [&](Side side, int along, int ci, int cj, int ii, int ij, Eigen::Vector2d n, double len,
                 Eigen::Vector2d center, double s, int dof) {
    BoundaryFace f;
    f.id = static_cast<int>(faces_.size());
    f.side = side;
    f.along = along;
    f.cell = cell_index(ci, cj);
    f.inner_cell = cell_index(ii, ij);
    f.normal = n;
    f.length = len;
    f.center = center;
    f.arclength = s;
    f.part = labels[f.id];
    f.normal_dof = dof;
    faces_.push_back(f);
  };
  for (int j = 0; j < ny_; ++j) {
    const double y = (j + 0.5) * hy_;
    add(Side::Left, j, 0, j, 1, j, {-1.0, 0.0}, hy_, {0.0, y}, 2.0 * Lx_ + Ly_ + (Ly_ - y), u_index(0, j + 1));
  }
  for (int j = 0; j < ny_; ++j) {
    const double y = (j + 0.5) * hy_;
    add(Side::Right, j, nx_ - 1, j, nx_ - 2, j, {1.0, 0.0}, hy_, {Lx_, y}, Lx_ + y, u_index(nx_, j + 1));
  }
  for (int i = 0; i < nx_; ++i) {
    const double x = (i + 0.5) * hx_;
    add(Side::Bottom, i, i, 0, i, 1, {0.0, -1.0}, hx_, {x, 0.0}, x, v_index(i + 1, 0));
  }
  for (int i = 0; i < nx_; ++i) {
    const double x = (i + 0.5) * hx_;
    add(Side::Top, i, i, ny_ - 1, i, ny_ - 2, {0.0, 1.0}, hx_, {x, Ly_}, Lx_ + Ly_ + (Lx_ - x),
        v_index(i + 1, ny_));
  }
  for (const auto& f : faces_) (f.part == Part::Gamma1 ? gamma1_ : gamma2_).push_back(f.id);
  if (gamma2_.empty()) throw ValidationError("Γ₂ empty: the partition must leave at least one Gamma2 face");

  const int nv = num_velocity();
  free_.assign(nv, 1);
  velocity_weight_ = Eigen::VectorXd::Zero(nv);
  for (int i = 0; i <= nx_; ++i) {
    free_[u_index(i, 0)] = 0;
    free_[u_index(i, ny_ + 1)] = 0;
    for (int r = 1; r <= ny_; ++r) velocity_weight_[u_index(i, r)] = dual_wx(i) * hy_;
  }
  for (int j = 0; j <= ny_; ++j) {
    free_[v_index(0, j)] = 0;
    free_[v_index(nx_ + 1, j)] = 0;
    for (int a = 1; a <= nx_; ++a) velocity_weight_[v_index(a, j)] = hx_ * dual_wy(j);
  }
  for (int id : gamma2_) free_[faces_[id].normal_dof] = 0;
  for (int idx = 0; idx < nv; ++idx) {
    if (free_[idx]) free_dofs_.push_back(idx);
  }
}

Domain build_domain(const GeometryConfig& config) { return Domain(config); }

double Domain::u_row_y(int r) const {
  if (r <= 0) return 0.0;
  if (r >= ny_ + 1) return Ly_;
  return (r - 0.5) * hy_;
}

double Domain::v_col_x(int a) const {
  if (a <= 0) return 0.0;
  if (a >= nx_ + 1) return Lx_;
  return (a - 0.5) * hx_;
}

Eigen::Vector2d Domain::velocity_position(int idx) const {
  if (is_u(idx)) {
    const int i = idx / (ny_ + 2);
    const int r = idx % (ny_ + 2);
    return {node_x(i), u_row_y(r)};
  }
  const int k = idx - num_u();
  const int a = k / (ny_ + 1);
  const int j = k % (ny_ + 1);
  return {v_col_x(a), node_y(j)};
}

double Domain::part_length(Part p) const {
  double s = 0.0;
  for (int id : part_faces(p)) s += faces_[id].length;
  return s;
}

BoundaryFunction BoundaryFunction::constant(const Domain& d, Part part, int num_times, double value) {
  BoundaryFunction f;
  f.part = part;
  f.num_faces = d.part_size(part);
  f.num_times = num_times;
  f.values = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(num_times) * f.num_faces, value);
  return f;
}

BoundaryFunction BoundaryFunction::from_faces(const Domain& d, Part part, int num_times,
                                              const std::function<double(const BoundaryFace&)>& fn) {
  BoundaryFunction f = constant(d, part, num_times, 0.0);
  const auto& ids = d.part_faces(part);
  for (int k = 0; k < f.num_faces; ++k) {
    const double val = fn(d.faces()[ids[k]]);
    for (int t = 0; t < num_times; ++t) f.at(t, k) = val;
  }
  return f;
}

VelocityField zero_velocity(const Domain& d) { return {Eigen::VectorXd::Zero(d.num_velocity())}; }
ScalarField zero_scalar(const Domain& d) { return {Eigen::VectorXd::Zero(d.num_cells())}; }

VelocityField sample_velocity(const Domain& d, const VectorFunction& fu, const VectorFunction& fv) {
  VelocityField z = zero_velocity(d);
  for (int idx = 0; idx < d.num_velocity(); ++idx) {
    const auto p = d.velocity_position(idx);
    z.values[idx] = d.is_u(idx) ? fu(p.x(), p.y()) : fv(p.x(), p.y());
  }
  return z;
}

ScalarField sample_scalar(const Domain& d, const VectorFunction& f) {
  ScalarField w = zero_scalar(d);
  for (int i = 0; i < d.nx(); ++i) {
    for (int j = 0; j < d.ny(); ++j) {
      const auto c = d.cell_center(i, j);
      w.values[d.cell_index(i, j)] = f(c.x(), c.y());
    }
  }
  return w;
}

void apply_velocity_constraints(const Domain& d, VelocityField& z) {
  check_shape(z, d);
  const auto& mask = d.velocity_free_mask();
  for (int idx = 0; idx < d.num_velocity(); ++idx) {
    if (!mask[idx]) z.values[idx] = 0.0;
  }
}

VelocityField from_streamfunction(const Domain& d, const VectorFunction& psi) {
  VelocityField z = zero_velocity(d);
  auto node_psi = [&](int i, int j) { return psi(d.node_x(i), d.node_y(j)); };
  for (int i = 0; i <= d.nx(); ++i) {
    for (int r = 1; r <= d.ny(); ++r) z.values[d.u_index(i, r)] = (node_psi(i, r) - node_psi(i, r - 1)) / d.hy();
  }
  for (int a = 1; a <= d.nx(); ++a) {
    for (int j = 0; j <= d.ny(); ++j) z.values[d.v_index(a, j)] = -(node_psi(a, j) - node_psi(a - 1, j)) / d.hx();
  }
  apply_velocity_constraints(d, z);
  return z;
}

ScalarField divergence(const VelocityField& z, const Domain& d) {
  check_shape(z, d);
  ScalarField out = zero_scalar(d);
  const auto& u = z.values;
  for (int i = 0; i < d.nx(); ++i) {
    for (int j = 0; j < d.ny(); ++j) {
      out.values[d.cell_index(i, j)] = (u[d.u_index(i + 1, j + 1)] - u[d.u_index(i, j + 1)]) / d.hx() +
                                       (u[d.v_index(i + 1, j + 1)] - u[d.v_index(i + 1, j)]) / d.hy();
    }
  }
  return out;
}

NodeField curl2d(const VelocityField& z, const Domain& d) {
  check_shape(z, d);
  NodeField out{Eigen::VectorXd::Zero(d.num_nodes())};
  const auto& x = z.values;
  for (int i = 0; i <= d.nx(); ++i) {
    for (int j = 0; j <= d.ny(); ++j) {
      const double dvdx = (x[d.v_index(i + 1, j)] - x[d.v_index(i, j)]) / (d.v_col_x(i + 1) - d.v_col_x(i));
      const double dudy = (x[d.u_index(i, j + 1)] - x[d.u_index(i, j)]) / (d.u_row_y(j + 1) - d.u_row_y(j));
      out.values[d.node_index(i, j)] = dvdx - dudy;
    }
  }
  return out;
}

BoundaryFunction normal_trace(const VelocityField& z, Part part, const Domain& d) {
  check_shape(z, d);
  return BoundaryFunction::from_faces(d, part, 1, [&](const BoundaryFace& f) {
    const double sign = (f.side == Side::Left || f.side == Side::Bottom) ? -1.0 : 1.0;
    return sign * z.values[f.normal_dof];
  });
}

VelocityField gradient(const ScalarField& phi, const Domain& d, const Eigen::VectorXd& boundary_values) {
  check_shape(phi, d);
  const bool have_bc = boundary_values.size() > 0;
  if (have_bc && boundary_values.size() != static_cast<Eigen::Index>(d.faces().size())) {
    throw ValidationError("gradient: boundary values must cover every boundary face");
  }
  VelocityField g = zero_velocity(d);
  const auto& p = phi.values;
  for (int i = 1; i < d.nx(); ++i) {
    for (int j = 0; j < d.ny(); ++j) {
      g.values[d.u_index(i, j + 1)] = (p[d.cell_index(i, j)] - p[d.cell_index(i - 1, j)]) / d.hx();
    }
  }
  for (int i = 0; i < d.nx(); ++i) {
    for (int j = 1; j < d.ny(); ++j) {
      g.values[d.v_index(i + 1, j)] = (p[d.cell_index(i, j)] - p[d.cell_index(i, j - 1)]) / d.hy();
    }
  }
  for (const auto& f : d.faces()) {
    const double pb = have_bc ? boundary_values[f.id] : 0.0;
    const double half = (f.side == Side::Left || f.side == Side::Right) ? 0.5 * d.hx() : 0.5 * d.hy();
    // Derivative along +x or +y, from the boundary value to the adjacent cell.
    const double outward = (pb - p[f.cell]) / half;
    const double sign = (f.side == Side::Left || f.side == Side::Bottom) ? -1.0 : 1.0;
    g.values[f.normal_dof] = sign * outward;
  }
  return g;
}

double inner_product(const VelocityField& a, const VelocityField& b, const Domain& d) {
  check_shape(a, d);
  check_shape(b, d);
  return (a.values.array() * b.values.array() * d.velocity_weights().array()).sum();
}

double inner_product(const ScalarField& a, const ScalarField& b, const Domain& d) {
  check_shape(a, d);
  check_shape(b, d);
  return d.cell_weight() * a.values.dot(b.values);
}

double boundary_integral(const BoundaryFunction& f, const BoundaryFunction& g, const Domain& d, int t) {
  check_shape(f, d);
  check_shape(g, d);
  if (f.part != g.part) throw ValidationError("boundary_integral: functions live on different parts");
  const auto& ids = d.part_faces(f.part);
  const int tf = f.num_times == 1 ? 0 : t;
  const int tg = g.num_times == 1 ? 0 : t;
  double s = 0.0;
  for (int k = 0; k < f.num_faces; ++k) s += d.faces()[ids[k]].length * f.at(tf, k) * g.at(tg, k);
  return s;
}

void check_shape(const VelocityField& z, const Domain& d) {
  if (z.values.size() != d.num_velocity()) {
    throw ValidationError(
        fmt::format("velocity field has {} entries, domain expects {}", z.values.size(), d.num_velocity()));
  }
}

void check_shape(const ScalarField& w, const Domain& d) {
  if (w.values.size() != d.num_cells()) {
    throw ValidationError(fmt::format("scalar field has {} entries, domain expects {}", w.values.size(), d.num_cells()));
  }
}

void check_shape(const BoundaryFunction& f, const Domain& d) {
  if (f.num_faces != d.part_size(f.part) || f.num_times < 1 ||
      f.values.size() != static_cast<Eigen::Index>(f.num_faces) * f.num_times) {
    throw ValidationError(fmt::format("boundary function on {} has inconsistent shape", to_string(f.part)));
  }
}

}  // namespace bfc
