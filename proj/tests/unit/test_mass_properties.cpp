#include <doctest.h>

#include <numbers>
#include <random>

#include "../support/oracles.hpp"
#include "upright/fixtures.hpp"
#include "upright/mass_properties.hpp"
#include "upright/primitives.hpp"

using namespace upright;

TEST_CASE("unit cube matches the analytic inertia") {
  TriMesh m = box(Vec3(0, 0, 0), Vec3(1, 1, 1));
  MassProperties p = compute_mass_properties(m, 1000.0);
  CHECK(std::abs(p.mass - 1000.0) < 1e-10);
  CHECK((p.com - Vec3(0.5, 0.5, 0.5)).norm() < 1e-12);
  CHECK((p.inertia - Mat3::Identity() * 1000.0 / 6.0).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("icosphere approaches the analytic sphere") {
  const double r = 0.5;
  MassProperties p = compute_mass_properties(icosphere(Vec3::Zero(), r, 4), 1000.0);
  const double m = 4.0 / 3.0 * std::numbers::pi * r * r * r * 1000.0;
  CHECK(oracle::relative(p.mass, m) < 0.01);
  for (int i = 0; i < 3; ++i) CHECK(oracle::relative(p.inertia(i, i), 0.4 * m * r * r) < 0.02);
  CHECK(p.com.norm() < 1e-12);
}

TEST_CASE("translation moves only the center of mass") {
  TriMesh m = make_fixture("short-leg-biped");
  MassProperties a = compute_mass_properties(m, 500.0);
  const Vec3 t(0.3, -1.2, 2.5);
  MassProperties b = compute_mass_properties(translated(m, t), 500.0);
  CHECK(oracle::relative(b.mass, a.mass) < 1e-12);
  CHECK((b.com - a.com - t).norm() < 1e-12);
  CHECK((b.inertia - a.inertia).norm() < 1e-9 * a.inertia.norm());
}

TEST_CASE("column integration oracle agrees") {
  TriMesh m = make_fixture("offset-capsule");
  MassProperties p = compute_mass_properties(m, 1000.0);
  oracle::Moments o = oracle::column_moments(m, 1000.0, 120);
  CHECK(oracle::relative(o.mass, p.mass) < 0.01);
  CHECK((o.com - p.com).norm() < 0.01 * bounding_box(m).diagonal());
  CHECK((o.inertia - p.inertia).norm() < 0.01 * p.inertia.norm());
}

TEST_CASE("bad meshes are rejected") {
  TriMesh flipped = box(Vec3(0, 0, 0), Vec3(1, 1, 1));
  for (auto& f : flipped.faces) std::swap(f[1], f[2]);
  CHECK_THROWS_AS(compute_mass_properties(flipped, 1000.0), MassPropertiesError);
  try {
    compute_mass_properties(flipped, 1000.0);
  } catch (const MassPropertiesError& e) {
    CHECK(std::string(e.what()).find("inward") != std::string::npos);
  }
  TriMesh flat;
  flat.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  flat.faces = {{0, 1, 2}, {0, 2, 1}};
  CHECK_THROWS_AS(compute_mass_properties(flat, 1000.0), MassPropertiesError);
}

TEST_CASE("mass property gradient matches finite differences") {
  TriMesh m = make_fixture("inverted-cone");
  MassPropertiesAdjoint seed;
  seed.mass = 0.3;
  seed.com = Vec3(0.2, -0.7, 1.1);
  seed.inertia << 0.1, 0.2, -0.3, 0.0, 0.5, 0.1, 0.4, -0.2, 0.9;
  auto scalar = [&](const TriMesh& x) {
    MassProperties p = compute_mass_properties(x, 800.0);
    return seed.mass * p.mass + seed.com.dot(p.com) + (seed.inertia.array() * p.inertia.array()).sum();
  };
  auto g = mass_properties_gradient(m, 800.0, seed);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 12; ++k) {
    const std::size_t v = rng() % m.vertex_count();
    const int c = static_cast<int>(rng() % 3);
    const double h = 1e-6;
    TriMesh a = m, b = m;
    a.vertices[v][c] += h;
    b.vertices[v][c] -= h;
    const double fd = (scalar(a) - scalar(b)) / (2 * h);
    CHECK(std::abs(fd - g[v][c]) <= 1e-5 * std::max(1.0, std::abs(fd)));
  }

  auto zero = mass_properties_gradient(m, 800.0, MassPropertiesAdjoint{});
  for (const auto& z : zero) CHECK(z.norm() == 0.0);
}
