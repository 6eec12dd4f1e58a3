#include "upright/losses.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Geometry>

#include "upright/mass_properties.hpp"

namespace upright {

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

// Index of the vertex minimizing dot(axis, x); first one on ties.
std::uint32_t lowest_along(const TriMesh& mesh, const Vec3& axis) {
  std::uint32_t best = 0;
  double best_h = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    double h = axis.dot(mesh.vertices[i]);
    if (h < best_h) {
      best_h = h;
      best = static_cast<std::uint32_t>(i);
    }
  }
  return best;
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {fidelity, stand, stable, normal, bottom_laplacian}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("loss weights must be finite and >= 0");
  }
}

void TiltProbe::validate() const {
  if (directions < 1) throw std::invalid_argument("tilt probe needs at least one direction");
  if (!std::isfinite(angle)) throw std::invalid_argument("tilt angle must be finite");
}

Vec2 TiltProbe::direction(int k) const {
  const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(directions);
  return Vec2(std::cos(a), std::sin(a));
}

double stand_loss(const Mat3& final_rotation, const Mat3& initial_rotation) {
  return (final_rotation - initial_rotation).squaredNorm();
}

Mat3 tilt_rotation(double angle, const Vec2& v) {
  return Eigen::AngleAxisd(angle, Vec3(v.x(), v.y(), 0.0).normalized()).toRotationMatrix();
}

double com_height_after_tilt(const TriMesh& mesh, const Vec3& com, double angle, const Vec2& v) {
  if (mesh.vertices.empty()) throw MeshError("empty mesh");
  const Vec3 up = tilt_rotation(angle, v).transpose() * Vec3::UnitZ();
  const std::uint32_t m = lowest_along(mesh, up);
  return up.dot(com - mesh.vertices[m]);
}

StableEquilibriumDetail stable_equilibrium_detail(const TriMesh& mesh, const Vec3& com, const TiltProbe& probe) {
  probe.validate();
  StableEquilibriumDetail d;
  d.rest_height = com_height_after_tilt(mesh, com, 0.0, Vec2::UnitX());
  d.tilted_heights.resize(probe.directions);
  double sum = 0.0;
  for (int k = 0; k < probe.directions; ++k) {
    d.tilted_heights[k] = com_height_after_tilt(mesh, com, probe.angle, probe.direction(k));
    sum += std::max(d.rest_height - d.tilted_heights[k], 0.0);
  }
  d.value = sum / probe.directions;
  return d;
}

double stable_equilibrium_loss(const TriMesh& mesh, const Vec3& com, const TiltProbe& probe) {
  return stable_equilibrium_detail(mesh, com, probe).value;
}

LossGrad stable_equilibrium_grad(const TriMesh& mesh, double density, const TiltProbe& probe) {
  probe.validate();
  const MassProperties props = compute_mass_properties(mesh, density);
  const Vec3& c = props.com;
  const double inv_n = 1.0 / probe.directions;

  LossGrad out;
  out.gradient.assign(mesh.vertices.size(), Vec3::Zero());
  const Vec3 ez = Vec3::UnitZ();
  const std::uint32_t rest_low = lowest_along(mesh, ez);
  const double rest = c.z() - mesh.vertices[rest_low].z();
  out.branch = mix(0, rest_low);

  MassPropertiesAdjoint seed;
  for (int k = 0; k < probe.directions; ++k) {
    const Vec3 up = tilt_rotation(probe.angle, probe.direction(k)).transpose() * ez;
    const std::uint32_t low = lowest_along(mesh, up);
    const double hinge = rest - up.dot(c - mesh.vertices[low]);
    const bool active = hinge > 0.0;
    out.branch = mix(out.branch, (static_cast<std::uint64_t>(low) << 1) | (active ? 1u : 0u));
    if (!active) continue;
    out.value += hinge * inv_n;
    seed.com += (ez - up) * inv_n;
    out.gradient[rest_low] -= ez * inv_n;
    out.gradient[low] += up * inv_n;
  }
  if (seed.com.squaredNorm() > 0.0) {
    std::vector<Vec3> g = mass_properties_gradient(mesh, density, seed);
    for (std::size_t i = 0; i < g.size(); ++i) out.gradient[i] += g[i];
  }
  return out;
}

double normal_consistency_loss(const TriMesh& mesh, const TrianglePairSet& pairs) {
  if (pairs.empty()) throw MeshError("normal consistency needs at least one adjacent face pair");
  const std::vector<Vec3> n = face_normals(mesh);
  double sum = 0.0;
  for (auto [i, j] : pairs.pairs) sum += 1.0 - n[i].dot(n[j]);
  return sum / static_cast<double>(pairs.size());
}

LossGrad normal_consistency_grad(const TriMesh& mesh, const TrianglePairSet& pairs) {
  if (pairs.empty()) throw MeshError("normal consistency needs at least one adjacent face pair");
  const std::size_t nf = mesh.faces.size();
  std::vector<Vec3> cross(nf), n(nf);
  std::vector<double> len(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    const auto& t = mesh.faces[f];
    cross[f] = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    len[f] = cross[f].norm();
    if (!(len[f] > 0.0)) throw MeshError("degenerate face " + std::to_string(f));
    n[f] = cross[f] / len[f];
  }
  const double inv = 1.0 / static_cast<double>(pairs.size());
  LossGrad out;
  std::vector<Vec3> n_bar(nf, Vec3::Zero());
  double sum = 0.0;
  for (auto [i, j] : pairs.pairs) {
    sum += 1.0 - n[i].dot(n[j]);
    n_bar[i] -= n[j] * inv;
    n_bar[j] -= n[i] * inv;
  }
  out.value = sum * inv;
  out.gradient.assign(mesh.vertices.size(), Vec3::Zero());
  for (std::size_t f = 0; f < nf; ++f) {
    const auto& t = mesh.faces[f];
    const Vec3 e_bar = (n_bar[f] - n[f] * n[f].dot(n_bar[f])) / len[f];
    const Vec3 u = mesh.vertices[t[1]] - mesh.vertices[t[0]];
    const Vec3 w = mesh.vertices[t[2]] - mesh.vertices[t[0]];
    const Vec3 u_bar = w.cross(e_bar);
    const Vec3 w_bar = e_bar.cross(u);
    out.gradient[t[0]] -= u_bar + w_bar;
    out.gradient[t[1]] += u_bar;
    out.gradient[t[2]] += w_bar;
  }
  return out;
}

double bottom_laplacian_loss(const TriMesh& mesh, const BottomVertexSet& bottom,
                             const std::vector<std::vector<std::uint32_t>>& neighbors) {
  if (bottom.empty()) return 0.0;
  double sum = 0.0;
  for (auto i : bottom.indices) {
    const auto& ring = neighbors.at(i);
    if (ring.empty()) throw MeshError("isolated vertex " + std::to_string(i) + " has no neighbors");
    Vec3 mean = Vec3::Zero();
    for (auto j : ring) mean += mesh.vertices[j];
    mean /= static_cast<double>(ring.size());
    sum += (mesh.vertices[i] - mean).norm();
  }
  return sum / static_cast<double>(bottom.indices.size());
}

double bottom_laplacian_loss(const TriMesh& mesh, const BottomVertexSet& bottom) {
  return bottom_laplacian_loss(mesh, bottom, vertex_neighbors(mesh));
}

LossGrad bottom_laplacian_grad(const TriMesh& mesh, const BottomVertexSet& bottom,
                               const std::vector<std::vector<std::uint32_t>>& neighbors) {
  LossGrad out;
  out.gradient.assign(mesh.vertices.size(), Vec3::Zero());
  if (bottom.empty()) return out;
  const double inv = 1.0 / static_cast<double>(bottom.indices.size());
  for (auto i : bottom.indices) {
    out.branch = mix(out.branch, i);
    const auto& ring = neighbors.at(i);
    if (ring.empty()) throw MeshError("isolated vertex " + std::to_string(i) + " has no neighbors");
    Vec3 mean = Vec3::Zero();
    for (auto j : ring) mean += mesh.vertices[j];
    mean /= static_cast<double>(ring.size());
    const Vec3 delta = mesh.vertices[i] - mean;
    const double norm = delta.norm();
    out.value += norm * inv;
    // A flat patch sits on the kink of the norm, where roundoff would pick a
    // random direction; take the zero subgradient and flag the branch.
    double ring_scale = 0.0;
    for (auto j : ring) ring_scale += (mesh.vertices[j] - mesh.vertices[i]).norm();
    const bool kink = norm <= 1e-9 * ring_scale / static_cast<double>(ring.size());
    out.branch = mix(out.branch, kink ? 1u : 2u);
    if (kink) continue;
    const Vec3 d_bar = delta * (inv / norm);
    out.gradient[i] += d_bar;
    const Vec3 share = d_bar / static_cast<double>(ring.size());
    for (auto j : ring) out.gradient[j] -= share;
  }
  return out;
}

namespace {

void require_same_topology(const TriMesh& mesh, const TriMesh& reference) {
  if (mesh.vertices.size() != reference.vertices.size() || mesh.faces != reference.faces) {
    throw MeshError("fidelity: mesh and reference differ in topology");
  }
}

}  // namespace

double fidelity_loss(const TriMesh& mesh, const TriMesh& reference) {
  require_same_topology(mesh, reference);
  if (mesh.vertices.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    sum += (mesh.vertices[i] - reference.vertices[i]).squaredNorm();
  }
  return sum / static_cast<double>(mesh.vertices.size());
}

LossGrad fidelity_grad(const TriMesh& mesh, const TriMesh& reference) {
  LossGrad out;
  out.value = fidelity_loss(mesh, reference);
  out.gradient.resize(mesh.vertices.size());
  const double scale = 2.0 / static_cast<double>(std::max<std::size_t>(mesh.vertices.size(), 1));
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    out.gradient[i] = scale * (mesh.vertices[i] - reference.vertices[i]);
  }
  return out;
}

ActiveTerms active_terms(std::size_t iteration, std::size_t stand_stride) {
  if (stand_stride == 0) throw std::invalid_argument("stand stride must be >= 1");
  ActiveTerms a;
  a.stand = iteration % stand_stride == 0;
  return a;
}

WeightedLoss total_loss(const LossComponents& c, const LossWeights& w, std::size_t iteration,
                        std::size_t stand_stride) {
  WeightedLoss out;
  out.active = active_terms(iteration, stand_stride);
  if (out.active.stand) out.total += w.stand * c.stand;
  out.total += w.stable * c.stable;
  out.total += w.normal * c.normal;
  out.total += w.bottom_laplacian * c.bottom_laplacian;
  out.total += w.fidelity * c.fidelity;
  return out;
}

}  // namespace upright
