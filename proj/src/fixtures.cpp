#include "upright/fixtures.hpp"

#include <cmath>

#include "upright/primitives.hpp"

namespace upright {

namespace {

TriMesh leaning_block() {
  TriMesh m = box_grid(Vec3(-0.4, -0.4, 0.0), Vec3(0.4, 0.4, 1.2), {18, 18, 14});
  return deformed(m, [](const Vec3& p) { return Vec3(p.x() + 0.75 * p.z(), p.y(), p.z()); });
}

TriMesh inverted_cone() {
  TriMesh m = lathe(frustum_profile(0.07, 0.5, 1.4, 2, 20), 24);
  return deformed(m, [](const Vec3& p) { return Vec3(p.x() + 0.2 * p.z() / 1.4, p.y(), p.z()); });
}

TriMesh offset_capsule() {
  TriMesh m = lathe(capsule_profile(0.22, 1.06, 8, 16), 32);
  return deformed(m, [](const Vec3& p) {
    const double t = p.z() / 1.5;
    return Vec3(p.x() + 0.6 * t * t, p.y(), p.z());
  });
}

TriMesh short_leg_biped() {
  const double cell = 0.06;
  VoxelGrid g({16, 7, 26}, Vec3::Constant(cell), Vec3::Zero());
  auto fill = [&](int i0, int i1, int j0, int j1, int k0, int k1) {
    for (int i = i0; i < i1; ++i)
      for (int j = j0; j < j1; ++j)
        for (int k = k0; k < k1; ++k) g.set(i, j, k);
  };
  fill(1, 6, 1, 6, 0, 12);     // left leg
  fill(10, 15, 1, 6, 2, 12);   // right leg, two cells short
  fill(0, 16, 0, 7, 12, 19);   // torso
  fill(5, 11, 2, 7, 19, 26);   // head, set forward
  TriMesh m = voxel_surface(g);
  return deformed(m, [](const Vec3& p) { return Vec3(p.x(), p.y() + 0.3 * std::max(0.0, p.z() - 0.6), p.z()); });
}

}  // namespace

UnknownFixtureError::UnknownFixtureError(const std::string& name)
    : std::invalid_argument("unknown fixture '" + name +
                            "'; valid names: leaning-block, inverted-cone, offset-capsule, short-leg-biped") {}

std::vector<std::string> fixture_names() {
  return {"leaning-block", "inverted-cone", "offset-capsule", "short-leg-biped"};
}

TriMesh make_fixture(const std::string& name) {
  TriMesh m;
  if (name == "leaning-block") m = leaning_block();
  else if (name == "inverted-cone") m = inverted_cone();
  else if (name == "offset-capsule") m = offset_capsule();
  else if (name == "short-leg-biped") m = short_leg_biped();
  else throw UnknownFixtureError(name);
  const Aabb box = bounding_box(m);
  return translated(m, Vec3(0.0, 0.0, -box.lo.z()));
}

}  // namespace upright
