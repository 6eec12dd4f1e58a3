#include <doctest.h>

#include "upright/cut_plane.hpp"
#include "upright/evaluate.hpp"
#include "upright/fixtures.hpp"
#include "upright/mass_properties.hpp"
#include "upright/primitives.hpp"

using namespace upright;

TEST_CASE("cube cut keeps a shorter closed cube") {
  for (const TriMesh& m : {box(Vec3(0, 0, 0), Vec3(1, 1, 1)), box_grid(Vec3(0, 0, 0), Vec3(1, 1, 1), {10, 10, 10})}) {
    CutResult r = cut_plane(m, 0.1);
    CHECK(r.cut);
    CHECK(validate_mesh(r.mesh).watertight());
    Aabb b = bounding_box(r.mesh);
    CHECK(b.lo.z() == 0.0);
    CHECK(b.extent().z() == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(compute_mass_properties(r.mesh, 1.0).volume == doctest::Approx(0.9).epsilon(1e-6));
  }
}

TEST_CASE("sphere cut gets a flat base and stands") {
  TriMesh s = icosphere(Vec3(0, 0, 0.5), 0.5, 4);
  CutResult r = cut_plane(s, 0.05);
  REQUIRE(validate_mesh(r.mesh).watertight());
  int flat = 0;
  for (const auto& v : r.mesh.vertices) flat += v.z() == 0.0;
  CHECK(flat >= 8);
  CHECK(ground_trd(r.mesh, SimParams{}) < 0.05);
}

TEST_CASE("non-positive height is a no-op, too high is an error") {
  TriMesh m = box(Vec3(0, 0, 0), Vec3(1, 1, 1));
  CutResult r = cut_plane(m, -0.2);
  CHECK_FALSE(r.cut);
  CHECK(r.mesh.faces == m.faces);
  CHECK_THROWS_AS(cut_plane(m, 1.0), MeshError);
}

TEST_CASE("cut through two arms keeps the larger shell") {
  VoxelGrid g({5, 1, 4}, Vec3::Constant(0.1), Vec3::Zero());
  g.fill_box(Vec3(0, 0, 0), Vec3(0.5, 0.1, 0.1));
  g.fill_box(Vec3(0, 0, 0.1), Vec3(0.1, 0.1, 0.4));
  g.fill_box(Vec3(0.3, 0, 0.1), Vec3(0.5, 0.1, 0.4));
  TriMesh u = voxel_surface(g);
  REQUIRE(validate_mesh(u).watertight());
  CHECK(cut_plane(u, 0.05).shells_dropped == 0);
  CutResult two = cut_plane(u, 0.15);
  CHECK(two.shells_dropped == 1);
  CHECK(validate_mesh(two.mesh).watertight());
  // the wide arm survives: 2 cells across, 0.25 tall
  CHECK(compute_mass_properties(two.mesh, 1.0).volume == doctest::Approx(0.2 * 0.1 * 0.25));
}

TEST_CASE("all fixtures cut cleanly") {
  for (const auto& name : fixture_names()) {
    CAPTURE(name);
    TriMesh m = make_fixture(name);
    CutResult r = cut_plane(m, 0.05 * bounding_box(m).extent().z());
    CHECK(validate_mesh(r.mesh).watertight());
  }
}
