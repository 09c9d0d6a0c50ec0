#include "bfc/forms.hpp"

#include "bfc/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <fmt/format.h>

#include <cmath>
#include <ostream>

namespace bfc {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

SparseMatrix from_triplets(int rows, int cols, const Triplets& t) {
  SparseMatrix m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

bool on_vertical_side(const BoundaryFace& f) { return f.side == Side::Left || f.side == Side::Right; }

}  // namespace

void PhysicalParams::validate() const {
  if (!(viscosity > 0.0)) throw ValidationError("ν > 0 required (nu, kinematic viscosity)");
  if (!(conductivity > 0.0)) throw ValidationError("k > 0 required (thermal conductivity)");
  if (!(expansion >= 0.0)) throw ValidationError("β >= 0 required (beta, expansion coefficient)");
  if (!std::isfinite(buoyancy_sup_norm())) throw ValidationError("buoyancy direction xi must be finite");
}

double PhysicalParams::buoyancy_sup_norm() const {
  if (buoyancy_field.empty()) return buoyancy.norm();
  double s = 0.0;
  for (const auto& v : buoyancy_field) s = std::max(s, v.norm());
  return s;
}

DiscreteForms::DiscreteForms(const Domain& d, const PhysicalParams& params) : domain_(d) {
  const int nx = d.nx(), ny = d.ny();
  const int nv = d.num_velocity(), nc = d.num_cells(), nn = d.num_nodes();
  if (!params.buoyancy_field.empty() && static_cast<int>(params.buoyancy_field.size()) != nc) {
    throw ValidationError("xi_field must have one vector per cell");
  }

  node_weight_.resize(nn);
  Triplets curl, iu, iv;
  for (int i = 0; i <= nx; ++i) {
    for (int j = 0; j <= ny; ++j) {
      const int n = d.node_index(i, j);
      node_weight_[n] = d.node_weight(i, j);
      const double dx = d.v_col_x(i + 1) - d.v_col_x(i);
      const double dy = d.u_row_y(j + 1) - d.u_row_y(j);
      curl.emplace_back(n, d.v_index(i + 1, j), 1.0 / dx);
      curl.emplace_back(n, d.v_index(i, j), -1.0 / dx);
      curl.emplace_back(n, d.u_index(i, j + 1), -1.0 / dy);
      curl.emplace_back(n, d.u_index(i, j), 1.0 / dy);
      if (j == 0) {
        iu.emplace_back(n, d.u_index(i, 0), 1.0);
      } else if (j == ny) {
        iu.emplace_back(n, d.u_index(i, ny + 1), 1.0);
      } else {
        iu.emplace_back(n, d.u_index(i, j), 0.5);
        iu.emplace_back(n, d.u_index(i, j + 1), 0.5);
      }
      if (i == 0) {
        iv.emplace_back(n, d.v_index(0, j), 1.0);
      } else if (i == nx) {
        iv.emplace_back(n, d.v_index(nx + 1, j), 1.0);
      } else {
        iv.emplace_back(n, d.v_index(i, j), 0.5);
        iv.emplace_back(n, d.v_index(i + 1, j), 0.5);
      }
    }
  }
  curl_ = from_triplets(nn, nv, curl);
  interp_u_ = from_triplets(nn, nv, iu);
  interp_v_ = from_triplets(nn, nv, iv);
  A1_ = SparseMatrix(curl_.transpose() * node_weight_.asDiagonal() * curl_);

  // Divergence, interior faces and the scalar Laplacian.
  Triplets dv, a2, buoy;
  const double hx = d.hx(), hy = d.hy();
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const int c = d.cell_index(i, j);
      dv.emplace_back(c, d.u_index(i + 1, j + 1), 1.0 / hx);
      dv.emplace_back(c, d.u_index(i, j + 1), -1.0 / hx);
      dv.emplace_back(c, d.v_index(i + 1, j + 1), 1.0 / hy);
      dv.emplace_back(c, d.v_index(i + 1, j), -1.0 / hy);
    }
  }
  div_ = from_triplets(nc, nv, dv);

  auto add_interior = [&](int dof, int l, int r, double len, double spacing, int component) {
    interior_faces_.push_back({dof, l, r, len});
    const double coef = len / spacing;
    a2.emplace_back(l, l, coef);
    a2.emplace_back(r, r, coef);
    a2.emplace_back(l, r, -coef);
    a2.emplace_back(r, l, -coef);
    const double m = d.velocity_weight(dof);
    buoy.emplace_back(dof, l, 0.5 * m * params.buoyancy_at(l)[component]);
    buoy.emplace_back(dof, r, 0.5 * m * params.buoyancy_at(r)[component]);
  };
  for (int i = 1; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) add_interior(d.u_index(i, j + 1), d.cell_index(i - 1, j), d.cell_index(i, j), hy, hx, 0);
  }
  for (int i = 0; i < nx; ++i) {
    for (int j = 1; j < ny; ++j) add_interior(d.v_index(i + 1, j), d.cell_index(i, j - 1), d.cell_index(i, j), hx, hy, 1);
  }
  for (const auto& f : d.faces()) {
    if (f.part != Part::Gamma1) continue;
    gamma1_faces_.emplace_back(f.cell, f.id);
    const double half = on_vertical_side(f) ? 0.5 * hx : 0.5 * hy;
    a2.emplace_back(f.cell, f.cell, f.length / half);
  }
  A2_ = from_triplets(nc, nc, a2);
  buoyancy_ = from_triplets(nv, nc, buoy);

  Triplets tn, tw;
  const auto& g1 = d.part_faces(Part::Gamma1);
  for (int k = 0; k < static_cast<int>(g1.size()); ++k) {
    const auto& f = d.faces()[g1[k]];
    const double sign = (f.side == Side::Left || f.side == Side::Bottom) ? -1.0 : 1.0;
    tn.emplace_back(k, f.normal_dof, sign * f.length);
  }
  Tn_ = from_triplets(static_cast<int>(g1.size()), nv, tn);
  const auto& g2 = d.part_faces(Part::Gamma2);
  for (int k = 0; k < static_cast<int>(g2.size()); ++k) {
    const auto& f = d.faces()[g2[k]];
    tw.emplace_back(k, f.cell, 1.5 * f.length);
    tw.emplace_back(k, f.inner_cell, -0.5 * f.length);
  }
  Tw_ = from_triplets(static_cast<int>(g2.size()), nc, tw);

  // H1 norm of velocity: mass plus squared gradients of both components.
  Triplets grad;
  std::vector<double> gw;
  auto add_diff = [&](int plus, int minus, double spacing, double weight) {
    const int row = static_cast<int>(gw.size());
    grad.emplace_back(row, plus, 1.0 / spacing);
    grad.emplace_back(row, minus, -1.0 / spacing);
    gw.push_back(weight);
  };
  for (int i = 0; i < nx; ++i) {  // du/dx at cell centers
    for (int r = 1; r <= ny; ++r) add_diff(d.u_index(i + 1, r), d.u_index(i, r), hx, hx * hy);
  }
  for (int i = 0; i <= nx; ++i) {  // du/dy at nodes
    for (int j = 0; j <= ny; ++j) {
      add_diff(d.u_index(i, j + 1), d.u_index(i, j), d.u_row_y(j + 1) - d.u_row_y(j), d.node_weight(i, j));
    }
  }
  for (int j = 0; j < ny; ++j) {  // dv/dy at cell centers
    for (int a = 1; a <= nx; ++a) add_diff(d.v_index(a, j + 1), d.v_index(a, j), hy, hx * hy);
  }
  for (int i = 0; i <= nx; ++i) {  // dv/dx at nodes
    for (int j = 0; j <= ny; ++j) {
      add_diff(d.v_index(i + 1, j), d.v_index(i, j), d.v_col_x(i + 1) - d.v_col_x(i), d.node_weight(i, j));
    }
  }
  const SparseMatrix G = from_triplets(static_cast<int>(gw.size()), nv, grad);
  const Eigen::VectorXd gwv = Eigen::Map<const Eigen::VectorXd>(gw.data(), static_cast<Eigen::Index>(gw.size()));
  SparseMatrix mass(nv, nv);
  mass.setIdentity();
  mass = d.velocity_weights().asDiagonal() * mass;
  N1_ = SparseMatrix(mass + SparseMatrix(G.transpose() * gwv.asDiagonal() * G));

  SparseMatrix cmass(nc, nc);
  cmass.setIdentity();
  N2_ = SparseMatrix(d.cell_weight() * cmass + A2_);

  Triplets sel;
  const auto& free = d.free_dofs();
  for (int r = 0; r < static_cast<int>(free.size()); ++r) sel.emplace_back(r, free[r], 1.0);
  select_ = from_triplets(static_cast<int>(free.size()), nv, sel);
}

double DiscreteForms::viscous_form(const VelocityField& u, const VelocityField& v) const {
  check_shape(u, domain_);
  check_shape(v, domain_);
  const Eigen::VectorXd wu = curl_ * u.values;
  const Eigen::VectorXd wv = curl_ * v.values;
  return (node_weight_.array() * wu.array() * wv.array()).sum();
}

double DiscreteForms::diffusion_form(const ScalarField& w, const ScalarField& phi) const {
  check_shape(w, domain_);
  check_shape(phi, domain_);
  return w.values.dot(A2_ * phi.values);
}

double DiscreteForms::diffusion_form(const ScalarField& w, const ScalarField& phi, const BoundaryFunction& w_trace,
                                     const BoundaryFunction& phi_trace) const {
  check_shape(w, domain_);
  check_shape(phi, domain_);
  if (w_trace.part != Part::Gamma1 || phi_trace.part != Part::Gamma1) {
    throw ValidationError("diffusion form: boundary traces must live on Gamma1");
  }
  check_shape(w_trace, domain_);
  check_shape(phi_trace, domain_);
  double s = 0.0;
  for (const auto& f : interior_faces_) {
    const double spacing = domain_.is_u(f.dof) ? domain_.hx() : domain_.hy();
    s += f.length / spacing * (w.values[f.right] - w.values[f.left]) * (phi.values[f.right] - phi.values[f.left]);
  }
  const auto& g1 = domain_.part_faces(Part::Gamma1);
  for (int k = 0; k < static_cast<int>(g1.size()); ++k) {
    const auto& f = domain_.faces()[g1[k]];
    const double half = on_vertical_side(f) ? 0.5 * domain_.hx() : 0.5 * domain_.hy();
    s += f.length / half * (w_trace.at(0, k) - w.values[f.cell]) * (phi_trace.at(0, k) - phi.values[f.cell]);
  }
  return s;
}

double DiscreteForms::convection_form(const VelocityField& u, const VelocityField& v, const VelocityField& w) const {
  check_shape(u, domain_);
  check_shape(v, domain_);
  check_shape(w, domain_);
  const Eigen::ArrayXd rot = (curl_ * u.values).array();
  const Eigen::ArrayXd vu = (interp_u_ * v.values).array(), vv = (interp_v_ * v.values).array();
  const Eigen::ArrayXd wu = (interp_u_ * w.values).array(), wv = (interp_v_ * w.values).array();
  return (node_weight_.array() * rot * (vu * wv - vv * wu)).sum();
}

Eigen::VectorXd DiscreteForms::convection_force(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
  const Eigen::ArrayXd wrot = node_weight_.array() * (curl_ * u).array();
  const Eigen::VectorXd fu = -(wrot * (interp_v_ * v).array()).matrix();
  const Eigen::VectorXd fv = (wrot * (interp_u_ * v).array()).matrix();
  return interp_u_.transpose() * fu + interp_v_.transpose() * fv;
}

Eigen::VectorXd DiscreteForms::convection_force_first(const Eigen::VectorXd& v, const Eigen::VectorXd& w) const {
  const Eigen::ArrayXd vu = (interp_u_ * v).array(), vv = (interp_v_ * v).array();
  const Eigen::ArrayXd wu = (interp_u_ * w).array(), wv = (interp_v_ * w).array();
  const Eigen::VectorXd cross = (node_weight_.array() * (vu * wv - vv * wu)).matrix();
  return curl_.transpose() * cross;
}

double DiscreteForms::transport_form(const VelocityField& z, const ScalarField& w, const ScalarField& phi) const {
  check_shape(z, domain_);
  check_shape(w, domain_);
  check_shape(phi, domain_);
  double s = 0.0;
  for (const auto& f : interior_faces_) {
    const double flux = f.length * z.values[f.dof];
    s += 0.5 * flux * (phi.values[f.left] * w.values[f.right] - phi.values[f.right] * w.values[f.left]);
  }
  return s;
}

Eigen::VectorXd DiscreteForms::transport_force(const Eigen::VectorXd& z, const Eigen::VectorXd& w) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(domain_.num_cells());
  for (const auto& f : interior_faces_) {
    const double half_flux = 0.5 * f.length * z[f.dof];
    out[f.left] += half_flux * w[f.right];
    out[f.right] -= half_flux * w[f.left];
  }
  return out;
}

Eigen::VectorXd DiscreteForms::transport_force_velocity(const Eigen::VectorXd& w, const Eigen::VectorXd& phi) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(domain_.num_velocity());
  for (const auto& f : interior_faces_) {
    out[f.dof] = 0.5 * f.length * (phi[f.left] * w[f.right] - phi[f.right] * w[f.left]);
  }
  return out;
}

VelocityFunctional DiscreteForms::pressure_lift(const BoundaryFunction& pressure, int t) const {
  check_shape(pressure, domain_);
  if (pressure.part != Part::Gamma1) throw ValidationError("pressure lift expects data on Gamma1");
  const Eigen::VectorXd data = pressure.slot(t);
  return {Tn_.transpose() * data};
}

ScalarFunctional DiscreteForms::heat_flux_lift(const BoundaryFunction& heat_flux, int t) const {
  check_shape(heat_flux, domain_);
  if (heat_flux.part != Part::Gamma2) throw ValidationError("heat flux lift expects data on Gamma2");
  const Eigen::VectorXd data = heat_flux.slot(t);
  return {Tw_.transpose() * data};
}

BoundaryFunction DiscreteForms::scalar_trace(const ScalarField& w, Part part) const {
  check_shape(w, domain_);
  return BoundaryFunction::from_faces(domain_, part, 1, [&](const BoundaryFace& f) {
    return 1.5 * w.values[f.cell] - 0.5 * w.values[f.inner_cell];
  });
}

namespace {

constexpr int kDenseLimit = 32;

double min_generalized_dense(const Eigen::MatrixXd& A, const Eigen::MatrixXd& N) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, N, Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
  if (es.info() != Eigen::Success) throw NumericalError("coercivity: generalized eigensolve failed");
  return es.eigenvalues().minCoeff();
}

double rayleigh(const Eigen::VectorXd& x, const SparseMatrix& A, const SparseMatrix& N) {
  return x.dot(A * x) / x.dot(N * x);
}

/// Inverse iteration x <- solve(x) with N-normalization.
template <typename Solve>
double min_generalized_iterative(const SparseMatrix& A, const SparseMatrix& N, Solve&& solve, Eigen::VectorXd x) {
  double lambda = rayleigh(x, A, N);
  for (int it = 0; it < 2000; ++it) {
    x = solve(Eigen::VectorXd(N * x));
    x /= std::sqrt(x.dot(N * x));
    const double next = rayleigh(x, A, N);
    if (std::abs(next - lambda) <= 1e-13 * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

}  // namespace

CoercivityConstants coercivity_constants(const DiscreteForms& forms) {
  const Domain& d = forms.domain();
  const SparseMatrix& S = forms.free_selection();
  const SparseMatrix A = S * forms.viscous_matrix() * S.transpose();
  const SparseMatrix N = S * forms.H1_velocity() * S.transpose();
  const SparseMatrix Dv = forms.divergence_matrix() * S.transpose();
  CoercivityConstants out;

  if (d.nx() <= kDenseLimit && d.ny() <= kDenseLimit) {
    const Eigen::MatrixXd Dt = Eigen::MatrixXd(Dv).transpose();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Dt);
    const Eigen::Index n = Dt.rows();
    const Eigen::Index rank = qr.rank();
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd Z = Q.rightCols(n - rank);
    const Eigen::MatrixXd Ad = Eigen::MatrixXd(A), Nd = Eigen::MatrixXd(N);
    out.velocity = min_generalized_dense(Z.transpose() * Ad * Z, Z.transpose() * Nd * Z);
    out.temperature = min_generalized_dense(Eigen::MatrixXd(forms.diffusion_matrix()), Eigen::MatrixXd(forms.H1_scalar()));
  } else {
    // Saddle-point inverse iteration keeps iterates discretely divergence-free.
    const Eigen::Index nf = A.rows(), nc = Dv.rows();
    std::vector<Eigen::Triplet<double>> t;
    for (int c = 0; c < A.outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(A, c); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    }
    for (int c = 0; c < Dv.outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(Dv, c); it; ++it) {
        t.emplace_back(nf + it.row(), it.col(), it.value());
        t.emplace_back(it.col(), nf + it.row(), it.value());
      }
    }
    SparseMatrix K(nf + nc, nf + nc);
    K.setFromTriplets(t.begin(), t.end());
    Eigen::SparseLU<SparseMatrix> lu(K);
    if (lu.info() != Eigen::Success) throw NumericalError("coercivity: saddle-point factorization failed");
    auto solve_v = [&](const Eigen::VectorXd& rhs) {
      Eigen::VectorXd full = Eigen::VectorXd::Zero(nf + nc);
      full.head(nf) = rhs;
      return Eigen::VectorXd(lu.solve(full).head(nf));
    };
    Eigen::VectorXd x0 = solve_v(Eigen::VectorXd::Ones(nf));
    out.velocity = min_generalized_iterative(A, N, solve_v, x0);

    Eigen::SimplicialLDLT<SparseMatrix> ldlt(forms.diffusion_matrix());
    if (ldlt.info() != Eigen::Success) throw NumericalError("coercivity: a2 factorization failed");
    auto solve_w = [&](const Eigen::VectorXd& rhs) { return Eigen::VectorXd(ldlt.solve(rhs)); };
    out.temperature = min_generalized_iterative(forms.diffusion_matrix(), forms.H1_scalar(), solve_w,
                                             Eigen::VectorXd::Ones(d.num_cells()));
  }
  if (!(out.velocity > 1e-12) || !(out.temperature > 1e-12)) {
    throw NumericalError(fmt::format("coercivity constants not positive (c1 = {:.3e}, c1' = {:.3e}); "
                                     "a2 needs a nonempty Gamma1",
                                     out.velocity, out.temperature));
  }
  return out;
}

SmallnessReport check_smallness(const PhysicalParams& params, double c1, double c1_prime) {
  const double bx = params.expansion * params.buoyancy_sup_norm();
  SmallnessReport r;
  r.lhs = bx * (bx + 1.0) / (params.viscosity * c1);
  r.rhs = params.conductivity * c1_prime / 2.0;
  r.margin = r.rhs - r.lhs;
  r.passes = r.lhs <= r.rhs;
  return r;
}

void write_coo(std::ostream& os, const SparseMatrix& m) {
  for (int c = 0; c < m.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(m, c); it; ++it) {
      os << fmt::format("{} {} {:.17g}\n", it.row(), it.col(), it.value());
    }
  }
}

}  // namespace bfc
