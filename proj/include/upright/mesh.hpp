#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace upright {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Face = std::array<std::uint32_t, 3>;

/// Closed triangle surface. Vertices are world-frame positions in meters with
/// z pointing up; faces are counter-clockwise seen from outside.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }
};

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by the OBJ reader; carries the 1-based line number of the bad record.
class ObjParseError : public MeshError {
 public:
  ObjParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

inline constexpr double kMinFaceArea = 1e-12;

/// Topology and geometry diagnostics. Only out-of-range indices and degenerate
/// faces make a mesh unusable; the rest is reported.
struct MeshReport {
  std::size_t vertex_count = 0;
  std::size_t face_count = 0;
  std::size_t interior_edges = 0;
  std::size_t boundary_edges = 0;
  std::size_t nonmanifold_edges = 0;
  std::size_t misoriented_edges = 0;
  std::size_t degenerate_faces = 0;
  std::size_t bad_indices = 0;
  std::size_t isolated_vertices = 0;

  bool usable() const { return bad_indices == 0 && degenerate_faces == 0; }
  bool watertight() const {
    return usable() && boundary_edges == 0 && nonmanifold_edges == 0 && misoriented_edges == 0;
  }
  std::string summary() const;
};

MeshReport validate_mesh(const TriMesh& mesh);

/// Throws MeshError with the report summary unless the mesh is closed and
/// consistently oriented.
void require_watertight(const TriMesh& mesh);

/// Reads `v` and `f` records; polygons are fan-triangulated, `vt`/`vn` and
/// the texture/normal parts of face indices are ignored. Negative (relative)
/// indices are accepted. Throws ObjParseError on malformed records and
/// MeshError on degenerate faces.
TriMesh load_obj(const std::filesystem::path& path);
TriMesh parse_obj(const std::string& text);

void save_obj(const TriMesh& mesh, const std::filesystem::path& path);
std::string format_obj(const TriMesh& mesh);

Vec3 face_normal(const TriMesh& mesh, std::size_t face);
std::vector<Vec3> face_normals(const TriMesh& mesh);
double face_area(const TriMesh& mesh, std::size_t face);

/// Pairs of faces sharing an edge, each unordered pair once, in order of
/// first appearance of the shared edge.
struct TrianglePairSet {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

TrianglePairSet triangle_pairs(const TriMesh& mesh);

/// One-ring vertex neighbors, sorted ascending.
std::vector<std::vector<std::uint32_t>> vertex_neighbors(const TriMesh& mesh);

/// Uniform graph Laplacian coordinates: v_i minus the mean of its one ring.
/// Throws MeshError if a vertex has no neighbor.
std::vector<Vec3> graph_laplacian_coords(const TriMesh& mesh);
std::vector<Vec3> graph_laplacian_coords(const TriMesh& mesh,
                                         const std::vector<std::vector<std::uint32_t>>& neighbors);

struct BottomVertexSet {
  std::vector<std::uint32_t> indices;
  double threshold = 0.0;
  bool empty() const { return indices.empty(); }
};

/// Vertices with z strictly below `threshold`. Heights are taken as stored;
/// callers ground the mesh first.
BottomVertexSet bottom_vertices(const TriMesh& mesh, double threshold);

/// Default bottom threshold: 2% of the bounding-box height.
double default_bottom_threshold(const TriMesh& mesh);

struct Aabb {
  Vec3 lo;
  Vec3 hi;
  Vec3 extent() const { return hi - lo; }
  double diagonal() const { return extent().norm(); }
};

Aabb bounding_box(const TriMesh& mesh);

TriMesh translated(const TriMesh& mesh, const Vec3& t);
TriMesh transformed(const TriMesh& mesh, const Mat3& rotation, const Vec3& t);

/// Translates the mesh so min z is 0 and the horizontal projection of `com`
/// lands on the origin. Returns the moved mesh and the translation applied.
std::pair<TriMesh, Vec3> ground_and_center(const TriMesh& mesh, const Vec3& com);

}  // namespace upright
