#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace tracespatial {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Path = std::vector<Vec3>;

/// Base class for all library errors. `kind()` is a stable machine-readable tag.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define TRACESPATIAL_ERROR(Name)                                               \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& what) : Error(#Name, what) {}         \
    }

TRACESPATIAL_ERROR(InvalidGeometry);
TRACESPATIAL_ERROR(BehindCamera);
TRACESPATIAL_ERROR(InvalidInput);


/// World "up". Scenes are gravity aligned so that gravity points along -y.
inline Vec3 up_vector() { return Vec3::UnitY(); }

inline bool is_finite(const Vec3& v) { return v.allFinite(); }

inline bool is_rotation(const Mat3& r, double tol = 1e-6)
{
    if (!r.allFinite()) return false;
    if (((r.transpose() * r) - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(r.determinant() - 1.0) <= tol;
}

inline Mat3 rot_x(double rad) { return Eigen::AngleAxisd(rad, Vec3::UnitX()).toRotationMatrix(); }
inline Mat3 rot_y(double rad) { return Eigen::AngleAxisd(rad, Vec3::UnitY()).toRotationMatrix(); }
inline Mat3 rot_z(double rad) { return Eigen::AngleAxisd(rad, Vec3::UnitZ()).toRotationMatrix(); }

inline constexpr double kPi = 3.14159265358979323846;

/// Row-major 9-vector <-> 3x3 matrix, the layout used by every JSON file.
inline Mat3 mat3_from_row_major(const std::vector<double>& v)
{
    if (v.size() != 9) throw InvalidInput("expected 9 rotation entries, got " + std::to_string(v.size()));
    Mat3 m;
    m << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
    return m;
}

inline std::vector<double> mat3_to_row_major(const Mat3& m)
{
    return {m(0, 0), m(0, 1), m(0, 2), m(1, 0), m(1, 1), m(1, 2), m(2, 0), m(2, 1), m(2, 2)};
}

inline Vec3 vec3_from(const std::vector<double>& v)
{
    if (v.size() != 3) throw InvalidInput("expected 3 coordinates, got " + std::to_string(v.size()));
    return {v[0], v[1], v[2]};
}

struct Aabb3 {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Zero();

    bool overlaps(const Aabb3& o) const
    {
        return (min.array() <= o.max.array()).all() && (o.min.array() <= max.array()).all();
    }
    bool contains(const Vec3& p) const
    {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
    Aabb3 expanded(double pad) const { return {min.array() - pad, max.array() + pad}; }
    void extend(const Vec3& p)
    {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }
    Aabb3 translated(const Vec3& d) const { return {min + d, max + d}; }
    static Aabb3 empty()
    {
        const double inf = std::numeric_limits<double>::infinity();
        return {Vec3::Constant(inf), Vec3::Constant(-inf)};
    }
};

/// Oriented box. Columns of `rotation` are the box's local axes in world frame.
struct OrientedBox3 {
    Vec3 center = Vec3::Zero();
    Vec3 half_extents = Vec3::Constant(0.5);
    Mat3 rotation = Mat3::Identity();

    Vec3 axis(int i) const { return rotation.col(i); }

    std::array<Vec3, 8> corners() const
    {
        std::array<Vec3, 8> out;
        for (int i = 0; i < 8; ++i) {
            const Vec3 s((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
            out[i] = center + rotation * s.cwiseProduct(half_extents);
        }
        return out;
    }

    Aabb3 aabb() const
    {
        const Vec3 r = rotation.cwiseAbs() * half_extents;
        return {center - r, center + r};
    }

    OrientedBox3 at(const Vec3& c) const { return {c, half_extents, rotation}; }

    double volume() const { return 8.0 * half_extents.prod(); }

    /// Bounding-sphere radius (half the box diagonal).
    double bounding_radius() const { return half_extents.norm(); }

    bool contains(const Vec3& p, double eps = 0.0) const
    {
        const Vec3 local = rotation.transpose() * (p - center);
        return (local.cwiseAbs().array() <= (half_extents.array() + eps)).all();
    }

    /// Euclidean distance from p to the solid box (0 inside).
    double distance_to(const Vec3& p) const
    {
        const Vec3 local = rotation.transpose() * (p - center);
        const Vec3 excess = (local.cwiseAbs() - half_extents).cwiseMax(0.0);
        return excess.norm();
    }

    void validate() const
    {
        if (!center.allFinite() || !half_extents.allFinite())
            throw InvalidGeometry("non-finite box parameters");
        if ((half_extents.array() <= 0.0).any())
            throw InvalidGeometry("box half extents must be strictly positive");
        if (!is_rotation(rotation))
            throw InvalidGeometry("box rotation is not a proper rotation");
    }
};

inline double polyline_length(const Path& p)
{
    double len = 0.0;
    for (std::size_t i = 1; i < p.size(); ++i) len += (p[i] - p[i - 1]).norm();
    return len;
}

inline double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b)
{
    const Vec3 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 <= 0.0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

inline double point_polyline_distance(const Vec3& p, const Path& path)
{
    if (path.empty()) return std::numeric_limits<double>::infinity();
    if (path.size() == 1) return (p - path.front()).norm();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < path.size(); ++i)
        best = std::min(best, point_segment_distance(p, path[i - 1], path[i]));
    return best;
}

/// Resample a polyline so consecutive points are at most `spacing` apart.
/// Original vertices are kept.
inline Path densify(const Path& path, double spacing)
{
    if (path.size() < 2 || spacing <= 0.0) return path;
    Path out;
    out.push_back(path.front());
    for (std::size_t i = 1; i < path.size(); ++i) {
        const Vec3 a = path[i - 1];
        const Vec3 b = path[i];
        const int n = std::max(1, static_cast<int>(std::ceil((b - a).norm() / spacing - 1e-12)));
        for (int k = 1; k <= n; ++k) out.push_back(k == n ? b : Vec3(a + (b - a) * (double(k) / n)));
    }
    return out;
}

/// Printf-style formatting into std::string.
template <typename... Args>
std::string strformat(const char* fmt, Args... args)
{
    const int n = std::snprintf(nullptr, 0, fmt, args...);
    std::string s(static_cast<std::size_t>(n), '\0');
    std::snprintf(s.data(), s.size() + 1, fmt, args...);
    return s;
}

}  // namespace tracespatial
