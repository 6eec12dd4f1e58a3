#include <doctest.h>

#include "upright/evaluate.hpp"
#include "upright/fixtures.hpp"
#include "upright/losses.hpp"
#include "upright/mass_properties.hpp"
#include "upright/mesh.hpp"
#include "upright/primitives.hpp"

using namespace upright;

TEST_CASE("primitives are closed and oriented") {
  CHECK(validate_mesh(box(Vec3(0, 0, 0), Vec3(1, 2, 3))).watertight());
  CHECK(validate_mesh(box_grid(Vec3(0, 0, 0), Vec3(1, 2, 3), {3, 4, 5})).watertight());
  CHECK(validate_mesh(icosphere(Vec3::Zero(), 1.0, 3)).watertight());
  CHECK(validate_mesh(lathe(capsule_profile(0.2, 0.5, 6, 4), 24)).watertight());
  CHECK(validate_mesh(lathe(frustum_profile(0.3, 0.1, 1.0, 3, 5), 20)).watertight());

  VoxelGrid g({3, 3, 3}, Vec3::Constant(0.1), Vec3::Zero());
  g.fill_box(Vec3(0, 0, 0), Vec3(0.3, 0.3, 0.1));
  g.set(1, 1, 1);
  g.set(1, 1, 2);
  TriMesh v = voxel_surface(g);
  CHECK(validate_mesh(v).watertight());
  CHECK(compute_mass_properties(v, 1.0).volume == doctest::Approx(11 * 1e-3));
}

TEST_CASE("box grid counts") {
  TriMesh m = box_grid(Vec3(0, 0, 0), Vec3(1, 1, 1), {2, 3, 4});
  // surface lattice points of a 3 x 4 x 5 lattice
  CHECK(m.vertex_count() == 3 * 4 * 5 - 1 * 2 * 3);
  CHECK(m.face_count() == 4 * (2 * 3 + 3 * 4 + 2 * 4));
}

TEST_CASE("fixtures are valid, grounded and deterministic") {
  for (const auto& name : fixture_names()) {
    CAPTURE(name);
    TriMesh a = make_fixture(name);
    TriMesh b = make_fixture(name);
    CHECK(validate_mesh(a).watertight());
    CHECK(bounding_box(a).lo.z() == 0.0);
    CHECK(format_obj(a) == format_obj(b));
  }
  CHECK_THROWS_AS(make_fixture("teapot"), UnknownFixtureError);
  try {
    make_fixture("teapot");
  } catch (const UnknownFixtureError& e) {
    for (const auto& name : fixture_names()) CHECK(std::string(e.what()).find(name) != std::string::npos);
  }
}

TEST_CASE("leaning block has its center of mass past the footprint and topples") {
  TriMesh m = make_fixture("leaning-block");
  MassProperties p = compute_mass_properties(m, 1000.0);
  double max_bottom_x = -1e9;
  for (const auto& v : m.vertices) {
    if (v.z() == 0.0) max_bottom_x = std::max(max_bottom_x, v.x());
  }
  CHECK(p.com.x() > max_bottom_x);
  CHECK(ground_trd(m, SimParams{}) > 0.3);
}

TEST_CASE("inverted cone is unstable under every probe tilt") {
  TriMesh m = make_fixture("inverted-cone");
  MassProperties p = compute_mass_properties(m, 1000.0);
  CHECK(stable_equilibrium_loss(m, p.com, TiltProbe{}) > 0.0);
}
