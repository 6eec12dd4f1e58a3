#pragma once

// Test-side oracles. Nothing here calls into the library's own mass or
// gradient code, so agreement is meaningful.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "upright/mesh.hpp"

namespace oracle {

using upright::Mat3;
using upright::TriMesh;
using upright::Vec3;

struct Moments {
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  Mat3 inertia = Mat3::Zero();  // about com
};

// Mass properties by jittered sampling of vertical columns. Each column is cut
// against every triangle; the sorted crossings give the solid's z intervals,
// which are integrated exactly for the polynomial moments.
inline Moments column_moments(const TriMesh& mesh, double density, int n = 200, std::uint64_t seed = 7) {
  Vec3 lo = mesh.vertices[0], hi = lo;
  for (const auto& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const double cx = (hi.x() - lo.x()) / n, cy = (hi.y() - lo.y()) / n;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  // raw moments: 1, x, y, z, xx, yy, zz, xy, xz, yz
  double m[10] = {0};
  std::vector<double> hits;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double x = lo.x() + (i + u(rng)) * cx;
      const double y = lo.y() + (j + u(rng)) * cy;
      hits.clear();
      for (const auto& f : mesh.faces) {
        const Vec3& a = mesh.vertices[f[0]];
        const Vec3& b = mesh.vertices[f[1]];
        const Vec3& c = mesh.vertices[f[2]];
        if (std::max({a.x(), b.x(), c.x()}) < x || std::min({a.x(), b.x(), c.x()}) > x) continue;
        if (std::max({a.y(), b.y(), c.y()}) < y || std::min({a.y(), b.y(), c.y()}) > y) continue;
        // barycentric coordinates of (x, y) in the projected triangle
        const double d = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
        if (std::abs(d) < 1e-300) continue;
        const double l1 = ((x - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (y - a.y())) / d;
        const double l2 = ((b.x() - a.x()) * (y - a.y()) - (x - a.x()) * (b.y() - a.y())) / d;
        const double l0 = 1.0 - l1 - l2;
        if (l0 < 0.0 || l1 < 0.0 || l2 < 0.0) continue;
        hits.push_back(l0 * a.z() + l1 * b.z() + l2 * c.z());
      }
      if (hits.size() % 2 != 0) continue;  // grazing column; drop it
      std::sort(hits.begin(), hits.end());
      const double area = cx * cy;
      for (std::size_t k = 0; k + 1 < hits.size(); k += 2) {
        const double z0 = hits[k], z1 = hits[k + 1];
        const double l = z1 - z0;
        const double iz = (z1 * z1 - z0 * z0) / 2.0;
        const double izz = (z1 * z1 * z1 - z0 * z0 * z0) / 3.0;
        m[0] += area * l;
        m[1] += area * x * l;
        m[2] += area * y * l;
        m[3] += area * iz;
        m[4] += area * x * x * l;
        m[5] += area * y * y * l;
        m[6] += area * izz;
        m[7] += area * x * y * l;
        m[8] += area * x * iz;
        m[9] += area * y * iz;
      }
    }
  }
  Moments out;
  out.mass = density * m[0];
  out.com = Vec3(m[1], m[2], m[3]) / m[0];
  // second moments about the origin, then shift to the com
  Mat3 s;
  s << m[4], m[7], m[8], m[7], m[5], m[9], m[8], m[9], m[6];
  s *= density;
  s -= out.mass * out.com * out.com.transpose();
  out.inertia = s.trace() * Mat3::Identity() - s;
  return out;
}

inline double relative(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace oracle
