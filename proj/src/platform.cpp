#include "upright/platform.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <Eigen/Geometry>

namespace upright {

namespace {

Vec3 incline_normal(double angle) { return Vec3(-std::sin(angle), 0.0, std::cos(angle)); }

double parse_number(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid " + what + " '" + s + "'");
  }
}

}  // namespace

Platform Platform::ground() { return Platform{}; }

Platform Platform::incline(double angle_rad) {
  Platform p;
  p.kind = Kind::Incline;
  p.incline_angle = angle_rad;
  return p;
}

Platform Platform::sphere(const Vec3& center, double radius) {
  Platform p;
  p.kind = Kind::Sphere;
  p.center = center;
  p.radius = radius;
  return p;
}

void Platform::validate() const {
  switch (kind) {
    case Kind::Ground:
      return;
    case Kind::Incline:
      if (!(incline_angle >= 0.0 && incline_angle < std::numbers::pi / 2.0)) {
        throw std::invalid_argument("incline angle must lie in [0, 90) degrees");
      }
      return;
    case Kind::Sphere:
      if (!(radius > 0.0)) throw std::invalid_argument("sphere radius must be positive");
      if (center.head<2>().norm() >= radius) {
        throw std::invalid_argument("sphere must lie under the horizontal origin");
      }
      return;
  }
}

std::string Platform::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case Kind::Ground:
      os << "ground";
      break;
    case Kind::Incline:
      os << "incline:" << incline_angle * 180.0 / std::numbers::pi << "deg";
      break;
    case Kind::Sphere:
      os << "sphere:" << center.x() << ',' << center.y() << ',' << center.z() << ',' << radius;
      break;
  }
  return os.str();
}

Platform Platform::parse(const std::string& spec) {
  Platform p;
  if (spec == "ground") {
    p = ground();
  } else if (spec.rfind("incline:", 0) == 0) {
    std::string arg = spec.substr(8);
    double scale = std::numbers::pi / 180.0;
    if (arg.size() > 3 && arg.compare(arg.size() - 3, 3, "deg") == 0) {
      arg.resize(arg.size() - 3);
    } else if (arg.size() > 3 && arg.compare(arg.size() - 3, 3, "rad") == 0) {
      arg.resize(arg.size() - 3);
      scale = 1.0;
    }
    p = incline(parse_number(arg, "incline angle") * scale);
  } else if (spec.rfind("sphere:", 0) == 0) {
    std::string arg = spec.substr(7);
    double v[4];
    std::size_t start = 0;
    for (int i = 0; i < 4; ++i) {
      std::size_t comma = arg.find(',', start);
      if ((i < 3) != (comma != std::string::npos)) throw std::invalid_argument("sphere needs cx,cy,cz,r");
      v[i] = parse_number(arg.substr(start, comma == std::string::npos ? std::string::npos : comma - start),
                          "sphere parameter");
      start = comma + 1;
    }
    p = sphere(Vec3(v[0], v[1], v[2]), v[3]);
  } else {
    throw std::invalid_argument("unknown platform '" + spec + "' (ground | incline:<deg>deg | sphere:cx,cy,cz,r)");
  }
  p.validate();
  return p;
}

SdfSample platform_sdf(const Platform& platform, const Vec3& x) {
  switch (platform.kind) {
    case Platform::Kind::Ground:
      return {x.z(), Vec3::UnitZ()};
    case Platform::Kind::Incline: {
      Vec3 n = incline_normal(platform.incline_angle);
      return {n.dot(x), n};
    }
    case Platform::Kind::Sphere: {
      Vec3 d = x - platform.center;
      double len = d.norm();
      if (len == 0.0) return {-platform.radius, Vec3::UnitZ()};
      return {len - platform.radius, d / len};
    }
  }
  return {x.z(), Vec3::UnitZ()};
}

Mat3 platform_normal_jacobian(const Platform& platform, const Vec3& x) {
  if (platform.kind != Platform::Kind::Sphere) return Mat3::Zero();
  Vec3 d = x - platform.center;
  double len = d.norm();
  if (len == 0.0) return Mat3::Zero();
  Vec3 n = d / len;
  return (Mat3::Identity() - n * n.transpose()) / len;
}

SupportFrame support_frame(const Platform& platform) {
  SupportFrame f{Vec3::Zero(), Vec3::UnitZ(), Mat3::Identity()};
  switch (platform.kind) {
    case Platform::Kind::Ground:
      break;
    case Platform::Kind::Incline:
      f.up = incline_normal(platform.incline_angle);
      break;
    case Platform::Kind::Sphere: {
      const Vec3& c = platform.center;
      double h = std::sqrt(platform.radius * platform.radius - c.head<2>().squaredNorm());
      f.foot = Vec3(0.0, 0.0, c.z() + h);
      f.up = (f.foot - c) / platform.radius;
      break;
    }
  }
  f.alignment = Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), f.up).toRotationMatrix();
  return f;
}

Clearance clearance_along(const Platform& platform, const Vec3& x, const Vec3& up) {
  Clearance c;
  switch (platform.kind) {
    case Platform::Kind::Ground:
    case Platform::Kind::Incline: {
      SdfSample s = platform_sdf(platform, x);
      double denom = s.normal.dot(up);
      if (denom <= 0.0) return c;
      c.hits = true;
      c.value = s.distance / denom;
      c.gradient = s.normal / denom;
      return c;
    }
    case Platform::Kind::Sphere: {
      Vec3 w = x - platform.center;
      double b = up.dot(w);
      double disc = b * b - w.squaredNorm() + platform.radius * platform.radius;
      if (disc <= 0.0) return c;
      double root = std::sqrt(disc);
      c.hits = true;
      c.value = b - root;
      c.gradient = up - (b * up - w) / root;
      return c;
    }
  }
  return c;
}

}  // namespace upright
