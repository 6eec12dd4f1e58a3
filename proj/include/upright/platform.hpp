#pragma once

#include <string>

#include "upright/mesh.hpp"

namespace upright {

/// Static rigid support the body rests on.
///   ground:  half-space z <= 0
///   incline: half-space below a plane through the origin, tilted about the
///            y axis so the surface rises toward +x
///   sphere:  solid ball
struct Platform {
  enum class Kind { Ground, Incline, Sphere };

  Kind kind = Kind::Ground;
  double incline_angle = 0.0;  // radians, [0, pi/2)
  Vec3 center = Vec3::Zero();
  double radius = 1.0;

  static Platform ground();
  static Platform incline(double angle_rad);
  static Platform sphere(const Vec3& center, double radius);

  /// Throws std::invalid_argument on out-of-range parameters.
  void validate() const;

  /// CLI spelling: "ground", "incline:<deg>deg", "sphere:cx,cy,cz,r".
  std::string describe() const;
  static Platform parse(const std::string& spec);
};

struct SdfSample {
  double distance;  // negative inside the platform
  Vec3 normal;      // unit gradient of distance
};

SdfSample platform_sdf(const Platform& platform, const Vec3& x);

/// Jacobian of the sdf normal with respect to x (zero for planes).
Mat3 platform_normal_jacobian(const Platform& platform, const Vec3& x);

/// Surface frame under the horizontal origin where bodies are placed: the
/// surface point `foot`, the outward normal `up`, and the rotation taking
/// +z onto `up`.
struct SupportFrame {
  Vec3 foot;
  Vec3 up;
  Mat3 alignment;
};

SupportFrame support_frame(const Platform& platform);

/// Distance a point may travel along -up before touching the surface, with
/// its gradient. Points whose downward ray misses the platform report
/// `hits = false`.
struct Clearance {
  bool hits = false;
  double value = 0.0;
  Vec3 gradient = Vec3::Zero();
};

Clearance clearance_along(const Platform& platform, const Vec3& x, const Vec3& up);

}  // namespace upright
