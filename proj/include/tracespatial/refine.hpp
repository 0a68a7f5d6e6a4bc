#pragma once

#include "tracespatial/geometry.hpp"
#include "tracespatial/mask.hpp"
#include "tracespatial/scene.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace tracespatial {

TRACESPATIAL_ERROR(FinalPointOutOfFrame);

enum class TraceFrame { ObjectCentric, EndEffectorCentric };

inline const char* trace_frame_name(TraceFrame f)
{
    return f == TraceFrame::ObjectCentric ? "object-centric" : "end-effector-centric";
}

struct ImagePoint {
    double u = 0.0;  // pixels
    double v = 0.0;  // pixels
    double d = 0.0;  // camera depth, meters
};

/// Ordered 3D trace kept in two parallel forms: world meters and (u, v, d).
struct Trace {
    Path world_points;
    std::vector<ImagePoint> image_points;
    TraceFrame frame = TraceFrame::ObjectCentric;
    std::optional<Vec3> via_point;

    std::size_t size() const { return world_points.size(); }

    static Trace from_world(const Path& world, const CameraModel& camera, TraceFrame frame = TraceFrame::ObjectCentric)
    {
        Trace t;
        t.frame = frame;
        t.world_points = world;
        for (const auto& p : world) {
            const auto pr = camera.project(p);
            t.image_points.push_back({pr.u, pr.v, pr.z});
        }
        return t;
    }

    /// Image-space points back-projected to world.
    static Trace from_image(const std::vector<ImagePoint>& image, const CameraModel& camera,
                            TraceFrame frame = TraceFrame::ObjectCentric)
    {
        Trace t;
        t.frame = frame;
        t.image_points = image;
        for (const auto& ip : image) t.world_points.push_back(camera.backproject(ip.u, ip.v, ip.d));
        return t;
    }

    void validate() const
    {
        if (world_points.size() != image_points.size()) throw InvalidInput("trace world/image lengths differ");
        for (const auto& ip : image_points)
            if (!(ip.d > 0.0)) throw InvalidInput("trace depth must be positive");
    }
};

// ---------------------------------------------------------------------------
// Smoothing

namespace detail {

inline Path dedupe(const Path& path)
{
    Path out;
    for (const auto& p : path)
        if (out.empty() || (p - out.back()).norm() > 1e-12) out.push_back(p);
    return out;
}

// Barry-Goldman evaluation of a centripetal Catmull-Rom segment P1 -> P2.
inline Vec3 catmull_rom_point(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3, double s, double alpha)
{
    const auto knot = [alpha](const Vec3& a, const Vec3& b) { return std::pow((b - a).norm(), alpha); };
    const double t0 = 0.0;
    const double t1 = t0 + knot(p0, p1);
    const double t2 = t1 + knot(p1, p2);
    const double t3 = t2 + knot(p2, p3);
    const double t = t1 + s * (t2 - t1);
    const auto lerp = [](const Vec3& a, const Vec3& b, double ta, double tb, double tt) -> Vec3 {
        if (tb - ta <= 0.0) return a;
        return a * ((tb - tt) / (tb - ta)) + b * ((tt - ta) / (tb - ta));
    };
    const Vec3 a1 = lerp(p0, p1, t0, t1, t);
    const Vec3 a2 = lerp(p1, p2, t1, t2, t);
    const Vec3 a3 = lerp(p2, p3, t2, t3, t);
    const Vec3 b1 = lerp(a1, a2, t0, t2, t);
    const Vec3 b2 = lerp(a2, a3, t1, t3, t);
    return lerp(b1, b2, t1, t2, t);
}

inline Path assemble_segments(const Path& ctrl, const std::vector<Path>& interior)
{
    Path out;
    for (std::size_t i = 0; i + 1 < ctrl.size(); ++i) {
        out.push_back(ctrl[i]);
        out.insert(out.end(), interior[i].begin(), interior[i].end());
    }
    out.push_back(ctrl.back());
    return out;
}

}  // namespace detail

struct SmoothParams {
    int samples_per_segment = 10;
    double alpha = 0.5;
    double via_max_distance = 0.12;
};

/// Centripetal spline through every control point.
/// With a via point, segments whose smoothing would leave the via farther than
/// `via_max_distance` fall back to the original polyline locally.
inline Path smooth_catmull_rom(const Path& path, const std::optional<Vec3>& via_point = std::nullopt,
                               const SmoothParams& params = {})
{
    const Path ctrl = detail::dedupe(path);
    if (ctrl.size() < 2) return ctrl;
    const int n = std::max(1, params.samples_per_segment);
    const std::size_t segs = ctrl.size() - 1;

    std::vector<Path> spline(segs), linear(segs);
    for (std::size_t i = 0; i < segs; ++i) {
        const Vec3& p1 = ctrl[i];
        const Vec3& p2 = ctrl[i + 1];
        const Vec3 p0 = i > 0 ? ctrl[i - 1] : Vec3(2.0 * p1 - p2);
        const Vec3 p3 = i + 2 < ctrl.size() ? ctrl[i + 2] : Vec3(2.0 * p2 - p1);
        for (int k = 1; k < n; ++k) {
            const double s = static_cast<double>(k) / n;
            spline[i].push_back(detail::catmull_rom_point(p0, p1, p2, p3, s, params.alpha));
            linear[i].push_back(p1 + (p2 - p1) * s);
        }
    }
    Path smoothed = detail::assemble_segments(ctrl, spline);
    if (!via_point) return smoothed;
    if (point_polyline_distance(*via_point, smoothed) <= params.via_max_distance) return smoothed;

    // Revert the segment nearest the via point and its neighbours.
    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < segs; ++i) {
        const double d = point_segment_distance(*via_point, ctrl[i], ctrl[i + 1]);
        if (d < best) {
            best = d;
            nearest = i;
        }
    }
    std::vector<Path> mixed = spline;
    for (std::size_t i = nearest > 0 ? nearest - 1 : 0; i <= std::min(segs - 1, nearest + 1); ++i) mixed[i] = linear[i];
    Path local = detail::assemble_segments(ctrl, mixed);
    if (point_polyline_distance(*via_point, local) <= params.via_max_distance) return local;
    return detail::assemble_segments(ctrl, linear);
}

// ---------------------------------------------------------------------------
// RDP

struct RdpResult {
    Path points;
    std::vector<std::size_t> indices;  // positions in the input
    double epsilon = 0.0;              // tolerance actually used
};

inline std::vector<std::size_t> rdp_indices(const Path& path, double epsilon)
{
    if (path.size() < 2) return path.empty() ? std::vector<std::size_t>{} : std::vector<std::size_t>{0};
    std::vector<char> keep(path.size(), 0);
    keep.front() = keep.back() = 1;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, path.size() - 1}};
    while (!stack.empty()) {
        const auto [a, b] = stack.back();
        stack.pop_back();
        if (b <= a + 1) continue;
        double worst = -1.0;
        std::size_t idx = a;
        for (std::size_t i = a + 1; i < b; ++i) {
            const double d = point_segment_distance(path[i], path[a], path[b]);
            if (d > worst) {
                worst = d;
                idx = i;
            }
        }
        if (worst > epsilon) {
            keep[idx] = 1;
            stack.push_back({a, idx});
            stack.push_back({idx, b});
        }
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < path.size(); ++i)
        if (keep[i]) out.push_back(i);
    return out;
}

/// Doubles epsilon until at most `max_points` remain.
inline RdpResult simplify_rdp(const Path& path, double epsilon, std::size_t max_points = 8)
{
    if (path.size() < 2) throw InvalidInput("RDP needs at least 2 points");
    if (max_points < 2) throw InvalidInput("max_points must be >= 2");
    RdpResult r;
    r.epsilon = epsilon > 0.0 ? epsilon : 1e-9;
    for (;;) {
        r.indices = rdp_indices(path, r.epsilon);
        if (r.indices.size() <= max_points) break;
        r.epsilon *= 2.0;
    }
    for (auto i : r.indices) r.points.push_back(path[i]);
    return r;
}

// ---------------------------------------------------------------------------
// Grounding and start alignment

struct GroundParams {
    double tolerance = 0.02;
    double step = 0.005;
    double max_descent = 0.5;
};

struct GroundResult {
    Trace trace;
    bool grounded = false;  // false: descent cap reached, trace unchanged
    double descent = 0.0;
};

/// Lower the final point along gravity until its
/// projected depth agrees with the sensor depth.
inline GroundResult ground_endpoint(const Trace& trace, const DepthMap& depth, const CameraModel& camera,
                                    const GroundParams& params = {})
{
    if (trace.world_points.empty()) throw InvalidInput("empty trace");
    const Vec3 end = trace.world_points.back();
    const auto first = camera.try_project(end);
    if (!first || !camera.pixel_of(first->u, first->v)) throw FinalPointOutOfFrame("final point projects outside the image");

    GroundResult out{trace, false, 0.0};
    const int steps = static_cast<int>(std::floor(params.max_descent / params.step + 1e-9));
    for (int k = 0; k <= steps; ++k) {
        const Vec3 p = end - (k * params.step) * up_vector();
        const auto pr = camera.try_project(p);
        if (!pr) break;
        const auto px = camera.pixel_of(pr->u, pr->v);
        if (!px) break;
        const double d = depth.at(px->x, px->y);
        if (d > 0.0 && std::abs(pr->z - d) <= params.tolerance) {
            out.trace.world_points.back() = p;
            out.trace.image_points.back() = {pr->u, pr->v, pr->z};
            out.grounded = true;
            out.descent = k * params.step;
            return out;
        }
    }
    return out;
}

/// Move the first image point to the centroid of the mask's
/// largest 4-connected component, keeping its depth.
inline Trace align_start(const Trace& trace, const RleMask& mask, const CameraModel& camera)
{
    if (trace.image_points.empty()) throw InvalidInput("empty trace");
    const Vec2 c = mask.largest_component_centroid();
    Trace out = trace;
    auto& ip = out.image_points.front();
    ip.u = c.x();
    ip.v = c.y();
    out.world_points.front() = camera.backproject(ip.u, ip.v, ip.d);
    return out;
}

// ---------------------------------------------------------------------------
// Retroactive via discovery

struct DiscoveredVia {
    std::string id;
    Direction direction = Direction::Left;
    double surface_distance = 0.0;
};

struct DiscoverParams {
    double threshold = 0.15;
    double density = 0.01;
};

/// Label of the dominant component of `offset` after removing its part along
/// `velocity`.
inline Direction classify_offset(const Vec3& offset, const Vec3& velocity, const DirectionFrame& frame)
{
    Vec3 perp = offset;
    if (velocity.norm() > 1e-12) {
        const Vec3 v = velocity.normalized();
        perp -= perp.dot(v) * v;
    }
    const double r = perp.dot(frame.right), b = perp.dot(frame.behind), u = perp.dot(frame.up);
    if (std::abs(r) >= std::abs(b) && std::abs(r) >= std::abs(u)) return r >= 0 ? Direction::Right : Direction::Left;
    if (std::abs(b) >= std::abs(u)) return b >= 0 ? Direction::Behind : Direction::Front;
    return u >= 0 ? Direction::Above : Direction::Below;
}

/// Objects whose bounding sphere passes within
/// `threshold` of the densified trace. Sorted by distance, then id.
inline std::vector<DiscoveredVia> discover_vias(const Path& trace, std::span<const ObjectInstance> objects,
                                                const std::set<std::string>& exclude_ids, const DirectionFrame& frame,
                                                const DiscoverParams& params = {})
{
    if (trace.size() < 2) throw InvalidInput("trace needs at least 2 points");
    const Path dense = densify(trace, params.density);
    std::vector<DiscoveredVia> out;
    for (const auto& o : objects) {
        if (exclude_ids.count(o.id)) continue;
        const Vec3& c = o.box.center;
        std::size_t close = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < dense.size(); ++i) {
            const double d = (dense[i] - c).norm();
            if (d < best) {
                best = d;
                close = i;
            }
        }
        const double d_surf = best - o.box.bounding_radius();
        if (!(d_surf < params.threshold)) continue;
        const std::size_t a = close > 0 ? close - 1 : 0;
        const std::size_t b = std::min(dense.size() - 1, close + 1);
        const Vec3 velocity = dense[b] - dense[a];
        out.push_back({o.id, classify_offset(c - dense[close], velocity, frame), d_surf});
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
        if (x.surface_distance != y.surface_distance) return x.surface_distance < y.surface_distance;
        return x.id < y.id;
    });
    return out;
}

}  // namespace tracespatial
