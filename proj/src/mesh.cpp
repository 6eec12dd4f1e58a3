#include "upright/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include <Eigen/Geometry>

namespace upright {

namespace {

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

struct EdgeUse {
  std::uint32_t first_face = 0;
  std::uint32_t second_face = 0;
  int count = 0;
  // +1 for each traversal a->b with a<b, -1 for b->a.
  int direction_sum = 0;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_double(std::string_view tok, std::size_t line) {
  // from_chars for double is available in libstdc++ 11.
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(value)) {
    throw ObjParseError(line, "invalid coordinate '" + std::string(tok) + "'");
  }
  return value;
}

long parse_index(std::string_view tok, std::size_t line) {
  auto slash = tok.find('/');
  std::string_view head = tok.substr(0, slash);
  long value = 0;
  auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), value);
  if (ec != std::errc() || ptr != head.data() + head.size() || value == 0) {
    throw ObjParseError(line, "invalid face index '" + std::string(tok) + "'");
  }
  return value;
}

}  // namespace

ObjParseError::ObjParseError(std::size_t line, const std::string& what)
    : MeshError("OBJ line " + std::to_string(line) + ": " + what), line_(line) {}

std::string MeshReport::summary() const {
  std::ostringstream os;
  os << vertex_count << " vertices, " << face_count << " faces, " << interior_edges
     << " interior edges, " << boundary_edges << " boundary edges, " << nonmanifold_edges
     << " non-manifold edges, " << misoriented_edges << " misoriented edges, "
     << degenerate_faces << " degenerate faces, " << bad_indices << " bad indices";
  return os.str();
}

MeshReport validate_mesh(const TriMesh& mesh) {
  MeshReport r;
  r.vertex_count = mesh.vertices.size();
  r.face_count = mesh.faces.size();
  const auto n = static_cast<std::uint32_t>(mesh.vertices.size());

  std::unordered_map<std::uint64_t, EdgeUse> edges;
  edges.reserve(mesh.faces.size() * 2);
  std::vector<char> used(mesh.vertices.size(), 0);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& face = mesh.faces[f];
    if (face[0] >= n || face[1] >= n || face[2] >= n) {
      ++r.bad_indices;
      continue;
    }
    if (face_area(mesh, f) <= kMinFaceArea) ++r.degenerate_faces;
    for (int k = 0; k < 3; ++k) {
      std::uint32_t a = face[k];
      std::uint32_t b = face[(k + 1) % 3];
      used[a] = 1;
      EdgeUse& e = edges[edge_key(a, b)];
      if (e.count == 0) e.first_face = static_cast<std::uint32_t>(f);
      else if (e.count == 1) e.second_face = static_cast<std::uint32_t>(f);
      ++e.count;
      e.direction_sum += (a < b) ? 1 : -1;
    }
  }
  for (const auto& [key, e] : edges) {
    if (e.count == 1) ++r.boundary_edges;
    else if (e.count == 2) {
      ++r.interior_edges;
      if (e.direction_sum != 0) ++r.misoriented_edges;
    } else {
      ++r.nonmanifold_edges;
    }
  }
  r.isolated_vertices = static_cast<std::size_t>(std::count(used.begin(), used.end(), 0));
  return r;
}

void require_watertight(const TriMesh& mesh) {
  MeshReport r = validate_mesh(mesh);
  if (!r.watertight()) throw MeshError("mesh is not a closed oriented surface: " + r.summary());
}

TriMesh parse_obj(const std::string& text) {
  TriMesh mesh;
  struct PendingFace {
    std::vector<long> idx;
    std::size_t line;
  };
  std::vector<PendingFace> pending;

  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    auto tok = split_ws(line);
    if (tok[0] == "v") {
      if (tok.size() < 4) throw ObjParseError(line_no, "vertex record needs 3 coordinates");
      mesh.vertices.emplace_back(parse_double(tok[1], line_no), parse_double(tok[2], line_no),
                                 parse_double(tok[3], line_no));
    } else if (tok[0] == "f") {
      if (tok.size() < 4) throw ObjParseError(line_no, "face record needs at least 3 indices");
      PendingFace pf{{}, line_no};
      for (std::size_t i = 1; i < tok.size(); ++i) {
        long v = parse_index(tok[i], line_no);
        // Relative indices refer to vertices seen so far.
        if (v < 0) v = static_cast<long>(mesh.vertices.size()) + v + 1;
        pf.idx.push_back(v);
      }
      pending.push_back(std::move(pf));
    }
    // vt, vn, o, g, s, usemtl, mtllib: ignored.
  }

  const long nv = static_cast<long>(mesh.vertices.size());
  for (const auto& pf : pending) {
    for (long v : pf.idx) {
      if (v < 1 || v > nv) {
        throw ObjParseError(pf.line, "face references vertex " + std::to_string(v) + " of " +
                                         std::to_string(nv));
      }
    }
    for (std::size_t i = 1; i + 1 < pf.idx.size(); ++i) {
      mesh.faces.push_back({static_cast<std::uint32_t>(pf.idx[0] - 1),
                            static_cast<std::uint32_t>(pf.idx[i] - 1),
                            static_cast<std::uint32_t>(pf.idx[i + 1] - 1)});
    }
  }

  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    if (face_area(mesh, f) <= kMinFaceArea) {
      throw MeshError("degenerate face " + std::to_string(f) + " (area <= 1e-12 m^2)");
    }
  }
  return mesh;
}

TriMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MeshError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_obj(ss.str());
}

std::string format_obj(const TriMesh& mesh) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (const Vec3& v : mesh.vertices) os << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const Face& f : mesh.faces) os << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  return os.str();
}

void save_obj(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MeshError("cannot write " + path.string());
  out << format_obj(mesh);
  if (!out) throw MeshError("write failed: " + path.string());
}

double face_area(const TriMesh& mesh, std::size_t face) {
  const Face& f = mesh.faces[face];
  const Vec3& a = mesh.vertices[f[0]];
  return 0.5 * (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a).norm();
}

Vec3 face_normal(const TriMesh& mesh, std::size_t face) {
  const Face& f = mesh.faces[face];
  const Vec3& a = mesh.vertices[f[0]];
  Vec3 e = (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a);
  double len = e.norm();
  if (!(0.5 * len > kMinFaceArea)) throw MeshError("degenerate face " + std::to_string(face));
  return e / len;
}

std::vector<Vec3> face_normals(const TriMesh& mesh) {
  std::vector<Vec3> out(mesh.faces.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) out[f] = face_normal(mesh, f);
  return out;
}

TrianglePairSet triangle_pairs(const TriMesh& mesh) {
  std::unordered_map<std::uint64_t, std::pair<std::uint32_t, int>> first;  // edge -> (face, count)
  first.reserve(mesh.faces.size() * 2);
  TrianglePairSet out;
  out.pairs.reserve(mesh.faces.size() * 3 / 2);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& face = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      auto key = edge_key(face[k], face[(k + 1) % 3]);
      auto [it, inserted] = first.try_emplace(key, static_cast<std::uint32_t>(f), 1);
      if (!inserted) {
        // Non-manifold fans contribute only their first pair.
        if (++it->second.second == 2) out.pairs.emplace_back(it->second.first, static_cast<std::uint32_t>(f));
      }
    }
  }
  return out;
}

std::vector<std::vector<std::uint32_t>> vertex_neighbors(const TriMesh& mesh) {
  std::vector<std::vector<std::uint32_t>> nb(mesh.vertices.size());
  for (const Face& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      nb[f[k]].push_back(f[(k + 1) % 3]);
      nb[f[k]].push_back(f[(k + 2) % 3]);
    }
  }
  for (auto& list : nb) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return nb;
}

std::vector<Vec3> graph_laplacian_coords(const TriMesh& mesh,
                                         const std::vector<std::vector<std::uint32_t>>& neighbors) {
  std::vector<Vec3> delta(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& ring = neighbors[i];
    if (ring.empty()) throw MeshError("isolated vertex " + std::to_string(i) + " has no neighbors");
    Vec3 mean = Vec3::Zero();
    for (auto j : ring) mean += mesh.vertices[j];
    mean /= static_cast<double>(ring.size());
    delta[i] = mesh.vertices[i] - mean;
  }
  return delta;
}

std::vector<Vec3> graph_laplacian_coords(const TriMesh& mesh) {
  return graph_laplacian_coords(mesh, vertex_neighbors(mesh));
}

BottomVertexSet bottom_vertices(const TriMesh& mesh, double threshold) {
  BottomVertexSet out;
  out.threshold = threshold;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    if (mesh.vertices[i].z() < threshold) out.indices.push_back(static_cast<std::uint32_t>(i));
  }
  return out;
}

Aabb bounding_box(const TriMesh& mesh) {
  Aabb box{Vec3::Constant(std::numeric_limits<double>::infinity()),
           Vec3::Constant(-std::numeric_limits<double>::infinity())};
  for (const Vec3& v : mesh.vertices) {
    box.lo = box.lo.cwiseMin(v);
    box.hi = box.hi.cwiseMax(v);
  }
  return box;
}

double default_bottom_threshold(const TriMesh& mesh) {
  Aabb box = bounding_box(mesh);
  return 0.02 * (box.hi.z() - box.lo.z());
}

TriMesh translated(const TriMesh& mesh, const Vec3& t) {
  TriMesh out = mesh;
  for (Vec3& v : out.vertices) v += t;
  return out;
}

TriMesh transformed(const TriMesh& mesh, const Mat3& rotation, const Vec3& t) {
  TriMesh out = mesh;
  for (Vec3& v : out.vertices) v = rotation * v + t;
  return out;
}

std::pair<TriMesh, Vec3> ground_and_center(const TriMesh& mesh, const Vec3& com) {
  double min_z = std::numeric_limits<double>::infinity();
  for (const Vec3& v : mesh.vertices) min_z = std::min(min_z, v.z());
  Vec3 t(-com.x(), -com.y(), -min_z);
  TriMesh out = mesh;
  for (Vec3& v : out.vertices) {
    v.x() -= com.x();
    v.y() -= com.y();
    v.z() -= min_z;
  }
  return {std::move(out), t};
}

}  // namespace upright
