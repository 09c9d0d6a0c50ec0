#pragma once

#include "bfc/grid.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <iosfwd>
#include <vector>

namespace bfc {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct PhysicalParams {
  double viscosity = 1.0;     ///< kinematic viscosity, > 0
  double conductivity = 1.0;  ///< thermal conductivity, > 0
  double expansion = 0.0;     ///< thermal expansion coefficient, >= 0
  Eigen::Vector2d buoyancy{0.0, -1.0};  ///< buoyancy direction
  /// Optional per-cell buoyancy direction; overrides buoyancy when non-empty.
  std::vector<Eigen::Vector2d> buoyancy_field;

  void validate() const;
  /// sup over the domain of the buoyancy direction's max-norm.
  double buoyancy_sup_norm() const;
  Eigen::Vector2d buoyancy_at(int cell) const { return buoyancy_field.empty() ? buoyancy : buoyancy_field[cell]; }
};

/// Linear functional x -> coefficients . x on velocity entries.
struct VelocityFunctional {
  Eigen::VectorXd coefficients;
  double operator()(const VelocityField& z) const { return coefficients.dot(z.values); }
};

/// Linear functional on cell fields.
struct ScalarFunctional {
  Eigen::VectorXd coefficients;
  double operator()(const ScalarField& w) const { return coefficients.dot(w.values); }
};

/// Discrete bilinear/trilinear forms and boundary lifts on one domain.
///
/// a1(u, v) = sum_nodes W (rot u)(rot v)
/// a2(w, phi) = face-gradient quadrature, Dirichlet zero on Gamma1 faces,
///              natural (excluded) on Gamma2 faces
/// b(u, v, w) = sum_nodes W rot(u) (v1 w2 - v2 w1), components averaged to nodes
/// c(z, w, phi) = 1/2 sum_interior_faces F(z) (phi_L w_R - phi_R w_L)
///
/// The node form of b is pointwise antisymmetric in (v, w), and c is
/// antisymmetric in (w, phi) face by face, so b(u, v, v) = c(z, w, w) = 0
/// hold to roundoff for any arguments.
class DiscreteForms {
 public:
  DiscreteForms(const Domain& domain, const PhysicalParams& params);

  const Domain& domain() const { return domain_; }

  double viscous_form(const VelocityField& u, const VelocityField& v) const;
  double diffusion_form(const ScalarField& w, const ScalarField& phi) const;
  /// diffusion_form with explicit boundary traces on Gamma1 faces (admissible fields use zero).
  double diffusion_form(const ScalarField& w, const ScalarField& phi, const BoundaryFunction& w_trace,
                        const BoundaryFunction& phi_trace) const;

  double convection_form(const VelocityField& u, const VelocityField& v, const VelocityField& w) const;
  /// Force vector of w -> b(u, v, w).
  Eigen::VectorXd convection_force(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;
  /// Force vector of u -> b(u, v, w), i.e. the transpose pathway through rot.
  Eigen::VectorXd convection_force_first(const Eigen::VectorXd& v, const Eigen::VectorXd& w) const;

  double transport_form(const VelocityField& z, const ScalarField& w, const ScalarField& phi) const;
  /// Force vector of phi -> c(z, w, phi).
  Eigen::VectorXd transport_force(const Eigen::VectorXd& z, const Eigen::VectorXd& w) const;
  /// Force vector of z -> c(z, w, phi).
  Eigen::VectorXd transport_force_velocity(const Eigen::VectorXd& w, const Eigen::VectorXd& phi) const;

  /// psi -> sum_{Gamma1} v1 (psi.n) |face| at time slot t.
  VelocityFunctional pressure_lift(const BoundaryFunction& pressure, int t = 0) const;
  /// phi -> sum_{Gamma2} v2 trace(phi) |face| at time slot t; the trace is the
  /// linear extrapolation 1.5 phi_cell - 0.5 phi_inner.
  ScalarFunctional heat_flux_lift(const BoundaryFunction& heat_flux, int t = 0) const;
  /// Extrapolated trace of a cell field on the faces of a part.
  BoundaryFunction scalar_trace(const ScalarField& w, Part part) const;

  /// Velocity force (xi w, psi) without the factor beta.
  Eigen::VectorXd buoyancy(const Eigen::VectorXd& w) const { return buoyancy_ * w; }
  const SparseMatrix& buoyancy_matrix() const { return buoyancy_; }

  // Assembled operators (full velocity layout; restrict with free_selection()).
  const SparseMatrix& curl() const { return curl_; }
  const SparseMatrix& viscous_matrix() const { return A1_; }
  const SparseMatrix& diffusion_matrix() const { return A2_; }
  const SparseMatrix& divergence_matrix() const { return div_; }
  /// Rows: Gamma1 faces; row . z = |face| z.n.
  const SparseMatrix& normal_trace_matrix() const { return Tn_; }
  /// Rows: Gamma2 faces; row . w = |face| trace(w).
  const SparseMatrix& heat_trace_matrix() const { return Tw_; }
  /// Discrete H1 norms: z^T N1 z = ||z||^2 + ||grad z||^2, same for N2 on cells.
  const SparseMatrix& H1_velocity() const { return N1_; }
  const SparseMatrix& H1_scalar() const { return N2_; }
  const Eigen::VectorXd& velocity_mass() const { return domain_.velocity_weights(); }
  /// Rows pick the free velocity entries.
  const SparseMatrix& free_selection() const { return select_; }

 private:
  struct InteriorFace {
    int dof;
    int left;
    int right;
    double length;
  };

  Domain domain_;
  Eigen::VectorXd node_weight_;
  SparseMatrix curl_, interp_u_, interp_v_;
  SparseMatrix A1_, A2_, div_, Tn_, Tw_, N1_, N2_, buoyancy_, select_;
  std::vector<InteriorFace> interior_faces_;
  std::vector<std::pair<int, int>> gamma1_faces_;  // (cell, face id), Dirichlet faces for a2
};

struct CoercivityConstants {
  double velocity = 0.0;     ///< inf a1(z,z)/||z||_1^2 over discrete divergence-free admissible z
  double temperature = 0.0;  ///< inf a2(w,w)/||w||_1^2 over cell fields vanishing on Gamma1
};

/// Dense generalized eigensolve up to 32x32 cells, inverse iteration beyond.
CoercivityConstants coercivity_constants(const DiscreteForms& forms);

struct SmallnessReport {
  bool passes = false;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  ///< rhs - lhs
};

/// lhs = beta|xi|(beta|xi| + 1)/(nu c1), rhs = k c1'/2, passes iff lhs <= rhs.
SmallnessReport check_smallness(const PhysicalParams& params, double velocity_constant, double temperature_constant);

/// Coordinate-format dump, one `row col value` triple per line.
void write_coo(std::ostream& os, const SparseMatrix& m);

}  // namespace bfc
