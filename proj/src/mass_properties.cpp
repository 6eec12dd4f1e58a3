#include "upright/mass_properties.hpp"

#include <cmath>
#include <string>

namespace upright {

namespace {

struct Moments {
  double volume = 0.0;
  Vec3 first = Vec3::Zero();    // integral of x
  Mat3 second = Mat3::Zero();   // integral of x x^T
};

// Per tetrahedron (0, a, b, c) with D = a . (b x c):
//   volume  = D / 6
//   first   = D / 24 * (a + b + c)
//   second  = D / 120 * (a a^T + b b^T + c c^T + s s^T),  s = a + b + c
Moments integrate(const TriMesh& mesh) {
  Moments m;
  for (const Face& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    const double d = a.dot(b.cross(c));
    const Vec3 s = a + b + c;
    m.volume += d / 6.0;
    m.first += (d / 24.0) * s;
    m.second.noalias() += (d / 120.0) * (a * a.transpose() + b * b.transpose() + c * c.transpose() + s * s.transpose());
  }
  return m;
}

void check_volume(double volume) {
  if (std::abs(volume) < 1e-12) {
    throw MassPropertiesError("degenerate or open mesh: |volume| < 1e-12 m^3");
  }
  if (volume < 0.0) {
    throw MassPropertiesError("inward orientation: signed volume " + std::to_string(volume) +
                              " m^3 is negative; flip the face winding");
  }
}

}  // namespace

MassProperties compute_mass_properties(const TriMesh& mesh, double density) {
  if (!(density > 0.0)) throw MassPropertiesError("density must be positive");
  Moments m = integrate(mesh);
  check_volume(m.volume);

  MassProperties p;
  p.volume = m.volume;
  p.mass = density * m.volume;
  p.com = m.first / m.volume;
  // Central second moment, then I = tr(C) 1 - C.
  Mat3 central = density * (m.second - m.volume * p.com * p.com.transpose());
  p.inertia = central.trace() * Mat3::Identity() - central;
  p.inertia = 0.5 * (p.inertia + p.inertia.transpose());
  return p;
}

std::vector<Vec3> mass_properties_gradient(const TriMesh& mesh, double density,
                                           const MassPropertiesAdjoint& seed) {
  Moments m = integrate(mesh);
  check_volume(m.volume);
  const Vec3 com = m.first / m.volume;

  // I = tr(C) 1 - C  =>  C_bar = tr(I_bar) 1 - I_bar.
  Mat3 inertia_bar = 0.5 * (seed.inertia + seed.inertia.transpose());
  Mat3 central_bar = inertia_bar.trace() * Mat3::Identity() - inertia_bar;

  // C = rho (S - V c c^T).
  Mat3 second_bar = density * central_bar;
  double volume_bar = -density * com.dot(central_bar * com);
  Vec3 com_bar = seed.com - density * m.volume * (central_bar + central_bar.transpose()) * com;

  volume_bar += density * seed.mass;

  // c = first / V.
  Vec3 first_bar = com_bar / m.volume;
  volume_bar -= com_bar.dot(m.first) / (m.volume * m.volume);

  const Mat3 sym2 = second_bar + second_bar.transpose();
  std::vector<Vec3> grad(mesh.vertices.size(), Vec3::Zero());
  for (const Face& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    const double d = a.dot(b.cross(c));
    const Vec3 s = a + b + c;

    const Mat3 q = a * a.transpose() + b * b.transpose() + c * c.transpose() + s * s.transpose();
    const double d_bar = volume_bar / 6.0 + first_bar.dot(s) / 24.0 + (second_bar.cwiseProduct(q)).sum() / 120.0;

    const Vec3 s_bar = (d / 24.0) * first_bar + (d / 120.0) * (sym2 * s);
    grad[f[0]] += (d / 120.0) * (sym2 * a) + s_bar + d_bar * b.cross(c);
    grad[f[1]] += (d / 120.0) * (sym2 * b) + s_bar + d_bar * c.cross(a);
    grad[f[2]] += (d / 120.0) * (sym2 * c) + s_bar + d_bar * a.cross(b);
  }
  return grad;
}

}  // namespace upright
