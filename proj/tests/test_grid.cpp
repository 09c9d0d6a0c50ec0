#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bfc/errors.hpp"
#include "bfc/verify.hpp"
#include "support.hpp"

#include <map>
#include <random>

using namespace bfc;
using bfc::test::unit_square;

TEST_CASE("face counts of the default partition") {
  const Domain d = unit_square(8);
  CHECK(d.part_size(Part::Gamma1) == 16);
  CHECK(d.part_size(Part::Gamma2) == 16);
  const Domain small = unit_square(4);
  CHECK(small.part_size(Part::Gamma1) == 8);
  CHECK(small.part_size(Part::Gamma2) == 8);
  CHECK(small.faces().size() == 16u);
  for (const auto& f : small.faces()) CHECK(f.normal.norm() == doctest::Approx(1.0));
}

TEST_CASE("invalid geometry is rejected") {
  GeometryConfig g;
  g.partition = partition_by_side(8, 8, Part::Gamma1, Part::Gamma1, Part::Gamma1, Part::Gamma1);
  try {
    build_domain(g);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("Γ₂ empty") != std::string::npos);
  }
  GeometryConfig tiny;
  tiny.nx = 3;
  CHECK_THROWS_AS(build_domain(tiny), ValidationError);
  GeometryConfig flat;
  flat.Ly = 0.0;
  CHECK_THROWS_AS(build_domain(flat), ValidationError);
  GeometryConfig short_partition;
  short_partition.partition = {Part::Gamma2};
  CHECK_THROWS_AS(build_domain(short_partition), ValidationError);
}

TEST_CASE("divergence of analytic fields") {
  const Domain d = unit_square(8);
  const auto uniform = sample_velocity(d, [](double, double) { return 1.0; }, [](double, double) { return 0.0; });
  CHECK(divergence(uniform, d).values.lpNorm<Eigen::Infinity>() < 1e-14);
  const auto stretch = sample_velocity(d, [](double x, double) { return x; }, [](double, double) { return 0.0; });
  CHECK((divergence(stretch, d).values.array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("curl of analytic fields") {
  const Domain d = unit_square(8);
  const auto uniform = sample_velocity(d, [](double, double) { return 1.0; }, [](double, double) { return 0.0; });
  CHECK(curl2d(uniform, d).values.lpNorm<Eigen::Infinity>() < 1e-14);
  const auto rot = sample_velocity(d, [](double, double y) { return -y; }, [](double x, double) { return x; });
  const NodeField c = curl2d(rot, d);
  for (int i = 1; i < d.nx(); ++i) {
    for (int j = 1; j < d.ny(); ++j) CHECK(c.values[d.node_index(i, j)] == doctest::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("curl matches a coordinate-lookup stencil on divergence-free fields") {
  // The oracle finds the neighbouring samples of each node by position, not by index arithmetic.
  const Domain d = unit_square(8);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  const double a = coef(rng), b = coef(rng), c = coef(rng);
  const VelocityField z = from_streamfunction(d, [=](double x, double y) {
    const double bump = std::sin(M_PI * x) * std::sin(M_PI * y);
    return bump * bump * (a + b * x * x * y + c * std::cos(y + 2 * x));
  });
  REQUIRE(divergence(z, d).values.lpNorm<Eigen::Infinity>() < 1e-12);

  auto key = [](const Eigen::Vector2d& p) { return std::make_pair(std::llround(p.x() * 1e9), std::llround(p.y() * 1e9)); };
  std::map<std::pair<long long, long long>, int> u_at, v_at;
  for (int idx = 0; idx < d.num_velocity(); ++idx) (d.is_u(idx) ? u_at : v_at)[key(d.velocity_position(idx))] = idx;

  const NodeField curl = curl2d(z, d);
  double worst = 0.0;
  for (int i = 0; i <= d.nx(); ++i) {
    for (int j = 0; j <= d.ny(); ++j) {
      const double x = i * d.hx(), y = j * d.hy();
      const double xl = std::max(0.0, x - 0.5 * d.hx()), xr = std::min(d.Lx(), x + 0.5 * d.hx());
      const double yb = std::max(0.0, y - 0.5 * d.hy()), yt = std::min(d.Ly(), y + 0.5 * d.hy());
      const double vr = z.values[v_at.at(key({xr, y}))], vl = z.values[v_at.at(key({xl, y}))];
      const double ut = z.values[u_at.at(key({x, yt}))], ub = z.values[u_at.at(key({x, yb}))];
      const double expected = (vr - vl) / (xr - xl) - (ut - ub) / (yt - yb);
      worst = std::max(worst, std::abs(curl.values[d.node_index(i, j)] - expected));
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("normal traces") {
  const Domain d = unit_square(8);
  const auto uniform = sample_velocity(d, [](double, double) { return 1.0; }, [](double, double) { return 0.0; });
  const BoundaryFunction t = normal_trace(uniform, Part::Gamma1, d);
  for (int k = 0; k < t.num_faces; ++k) {
    const Side s = d.faces()[d.part_faces(Part::Gamma1)[k]].side;
    CHECK(t.at(0, k) == (s == Side::Left ? -1.0 : 1.0));
  }
  CHECK(normal_trace(zero_velocity(d), Part::Gamma1, d).values.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(normal_trace(zero_velocity(d), Part::Gamma2, d).values.lpNorm<Eigen::Infinity>() == 0.0);

  const auto poiseuille = sample_velocity(d, [](double, double y) { return y * (1 - y); }, [](double, double) { return 0.0; });
  const BoundaryFunction p = normal_trace(poiseuille, Part::Gamma1, d);
  for (int k = 0; k < p.num_faces; ++k) {
    const BoundaryFace& f = d.faces()[d.part_faces(Part::Gamma1)[k]];
    if (f.side != Side::Right) continue;
    const double y = f.center.y();
    CHECK(p.at(0, k) == doctest::Approx(y * (1 - y)).epsilon(1e-14));
  }
}

TEST_CASE("inner products and boundary integrals") {
  const Domain d = unit_square(8);
  const ScalarField one = sample_scalar(d, [](double, double) { return 1.0; });
  CHECK(inner_product(one, one, d) == doctest::Approx(1.0).epsilon(1e-14));
  const BoundaryFunction unit = BoundaryFunction::constant(d, Part::Gamma1, 1, 1.0);
  CHECK(boundary_integral(unit, unit, d) == doctest::Approx(2.0).epsilon(1e-14));

  std::mt19937_64 rng(3);
  for (int n = 0; n < 10; ++n) {
    const ScalarField a = random_scalar(d, rng), b = random_scalar(d, rng);
    CHECK(bfc::test::rel(inner_product(a, b, d), inner_product(b, a, d)) <= 1e-14);
    const VelocityField u = random_admissible_velocity(d, rng), v = random_admissible_velocity(d, rng);
    CHECK(bfc::test::rel(inner_product(u, v, d), inner_product(v, u, d)) <= 1e-14);
  }
}

TEST_CASE("shape mismatches throw") {
  const Domain d = unit_square(8);
  const Domain other = unit_square(4);
  CHECK_THROWS_AS(divergence(zero_velocity(other), d), ValidationError);
  CHECK_THROWS_AS(inner_product(zero_scalar(other), zero_scalar(d), d), ValidationError);
}
