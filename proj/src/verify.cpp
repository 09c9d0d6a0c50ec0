#include "bfc/verify.hpp"

#include <algorithm>
#include <cmath>

namespace bfc {

namespace {

// sum_nodes W |rot u|: with |v|_inf |w|_inf it bounds |b(u, v, w)| term by term.
double rot_mass(const VelocityField& u, const Domain& d) {
  const NodeField rot = curl2d(u, d);
  double s = 0.0;
  for (int i = 0; i <= d.nx(); ++i) {
    for (int j = 0; j <= d.ny(); ++j) s += d.node_weight(i, j) * std::abs(rot.values[d.node_index(i, j)]);
  }
  return s;
}

// Bound on the face fluxes entering c: sum |z| times the longest face.
double flux_mass(const VelocityField& z, const Domain& d) {
  return z.values.lpNorm<1>() * std::max(d.hx(), d.hy());
}

double inf(const Eigen::VectorXd& x) { return x.lpNorm<Eigen::Infinity>(); }

PropertyCheck make(std::string name, double value, double tol) {
  return {std::move(name), value, tol, value <= tol};
}

}  // namespace

VelocityField random_admissible_velocity(const Domain& d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  VelocityField z = zero_velocity(d);
  for (Eigen::Index i = 0; i < z.values.size(); ++i) z.values[i] = dist(rng);
  apply_velocity_constraints(d, z);
  return z;
}

VelocityField random_solenoidal_velocity(const StateSolver& solver, std::mt19937_64& rng) {
  VelocityField z = random_admissible_velocity(solver.domain(), rng);
  z.values = solver.project(z.values);
  return z;
}

ScalarField random_scalar(const Domain& d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  ScalarField w = zero_scalar(d);
  for (Eigen::Index i = 0; i < w.values.size(); ++i) w.values[i] = dist(rng);
  return w;
}

std::vector<PropertyCheck> verify_forms(const StateSolver& solver, const CoercivityConstants& constants, int samples,
                                        std::uint64_t seed) {
  const DiscreteForms& f = solver.forms();
  const Domain& d = solver.domain();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);

  double skew_b = 0.0, anti_b = 0.0, skew_c = 0.0, anti_c = 0.0, tri_b = 0.0, tri_c = 0.0;
  double coer1 = 0.0, coer2 = 0.0, div = 0.0;
  for (int n = 0; n < samples; ++n) {
    const VelocityField u = random_solenoidal_velocity(solver, rng);
    const VelocityField u2 = random_solenoidal_velocity(solver, rng);
    const VelocityField v = random_admissible_velocity(d, rng);
    const VelocityField w = random_admissible_velocity(d, rng);
    const ScalarField t = random_scalar(d, rng);
    const ScalarField phi = random_scalar(d, rng);
    const double a = coef(rng);

    const double sb = rot_mass(u, d) * inf(v.values) * inf(w.values);
    skew_b = std::max(skew_b, std::abs(f.convection_form(u, v, v)) / (rot_mass(u, d) * inf(v.values) * inf(v.values)));
    anti_b = std::max(anti_b, std::abs(f.convection_form(u, v, w) + f.convection_form(u, w, v)) / sb);
    const VelocityField mix{a * u.values + u2.values};
    const double sb_mix = (std::abs(a) * rot_mass(u, d) + rot_mass(u2, d)) * inf(v.values) * inf(w.values);
    tri_b = std::max(tri_b, std::abs(f.convection_form(mix, v, w) - a * f.convection_form(u, v, w) - f.convection_form(u2, v, w)) / sb_mix);

    const double sc = flux_mass(u, d) * inf(t.values) * inf(phi.values);
    skew_c = std::max(skew_c, std::abs(f.transport_form(u, t, t)) / (flux_mass(u, d) * inf(t.values) * inf(t.values)));
    anti_c = std::max(anti_c, std::abs(f.transport_form(u, t, phi) + f.transport_form(u, phi, t)) / sc);
    const double sc_mix = (std::abs(a) * flux_mass(u, d) + flux_mass(u2, d)) * inf(t.values) * inf(phi.values);
    tri_c = std::max(tri_c, std::abs(f.transport_form(mix, t, phi) - a * f.transport_form(u, t, phi) - f.transport_form(u2, t, phi)) / sc_mix);

    const double n1 = u.values.dot(f.H1_velocity() * u.values);
    coer1 = std::max(coer1, (constants.velocity - f.viscous_form(u, u) / n1) / constants.velocity);
    const double n2 = t.values.dot(f.H1_scalar() * t.values);
    coer2 = std::max(coer2, (constants.temperature - f.diffusion_form(t, t) / n2) / constants.temperature);
    div = std::max(div, inf(divergence(u, d).values));
  }

  std::vector<PropertyCheck> out;
  out.push_back(make("b(u,v,v) = 0", skew_b, 1e-12));
  out.push_back(make("b(u,v,w) + b(u,w,v) = 0", anti_b, 1e-12));
  out.push_back(make("b trilinear in u", tri_b, 1e-12));
  out.push_back(make("c(z,w,w) = 0", skew_c, 1e-12));
  out.push_back(make("c(z,w,phi) + c(z,phi,w) = 0", anti_c, 1e-12));
  out.push_back(make("c trilinear in z", tri_c, 1e-12));
  out.push_back(make("a1(u,u) >= c1 |u|_1^2", std::max(0.0, coer1), 1e-9));
  out.push_back(make("a2(w,w) >= c1' |w|_1^2", std::max(0.0, coer2), 1e-9));
  out.push_back(make("constants positive", constants.velocity > 0.0 && constants.temperature > 0.0 ? 0.0 : 1.0, 0.0));
  out.push_back(make("A1 symmetric", SparseMatrix(f.viscous_matrix() - SparseMatrix(f.viscous_matrix().transpose())).norm(), 0.0));
  out.push_back(make("A2 symmetric", SparseMatrix(f.diffusion_matrix() - SparseMatrix(f.diffusion_matrix().transpose())).norm(), 0.0));
  out.push_back(make("projected |div|_inf", div, 1e-10));

  const double area = d.area();
  const VelocityField rot = sample_velocity(d, [](double, double y) { return -y; }, [](double x, double) { return x; });
  out.push_back(make("a1((-y,x),(-y,x)) = 4 area", std::abs(f.viscous_form(rot, rot) - 4.0 * area) / (4.0 * area), 1e-12));
  // w = x has exact face gradients; the value is the area when both vertical
  // sides carry the Dirichlet part.
  const bool sides_dirichlet = std::all_of(d.faces().begin(), d.faces().end(), [](const BoundaryFace& b) {
    return (b.side != Side::Left && b.side != Side::Right) || b.part == Part::Gamma1;
  });
  if (!sides_dirichlet) return out;
  const ScalarField lin = sample_scalar(d, [](double x, double) { return x; });
  const BoundaryFunction trace = BoundaryFunction::from_faces(d, Part::Gamma1, 1, [](const BoundaryFace& b) { return b.center.x(); });
  out.push_back(make("a2(x,x) = area", std::abs(f.diffusion_form(lin, lin, trace, trace) - area) / area, 1e-12));
  return out;
}

}  // namespace bfc
