#pragma once

#include "tracespatial/refine.hpp"
#include "tracespatial/scene.hpp"

#include <cmath>
#include <string>

namespace tracespatial {

struct QcConfig {
    double length_base = 0.15;        // L_base, meters
    double max_occlusion = 0.30;
    double occlusion_tolerance = 0.03;
    double waypoint_spacing = 0.01;
};

enum class QcReason { None, Blocklist, OutOfFrame, Occluded, TooShort };

inline const char* qc_reason_name(QcReason r)
{
    switch (r) {
    case QcReason::None: return "accept";
    case QcReason::Blocklist: return "blocklist";
    case QcReason::OutOfFrame: return "out-of-frame";
    case QcReason::Occluded: return "occluded";
    case QcReason::TooShort: return "too-short";
    }
    return "?";
}

struct QcVerdict {
    QcReason reason = QcReason::None;
    double occlusion = 0.0;
    double displacement = 0.0;
    double min_length = 0.0;
    bool accepted() const { return reason == QcReason::None; }
};

/// occlusion_ratio over waypoints interpolated at `spacing`.
inline double occlusion_ratio(const Path& world, const DepthMap& depth, const CameraModel& camera,
                              double tolerance = 0.03, double spacing = 0.01)
{
    if (world.empty()) return 0.0;
    const Path pts = world.size() > 1 ? densify(world, spacing) : world;
    std::size_t occluded = 0;
    for (const auto& p : pts) {
        const auto pr = camera.try_project(p);
        if (!pr) continue;
        const auto px = camera.pixel_of(pr->u, pr->v);
        if (!px) continue;
        const double d = depth.at(px->x, px->y);
        if (d > 0.0 && pr->z - d > tolerance) ++occluded;
    }
    return static_cast<double>(occluded) / static_cast<double>(pts.size());
}

inline double occlusion_ratio(const Trace& trace, const DepthMap& depth, const CameraModel& camera,
                              const QcConfig& cfg = {})
{
    return occlusion_ratio(trace.world_points, depth, camera, cfg.occlusion_tolerance, cfg.waypoint_spacing);
}

/// L_min = L_base * cbrt(V).
inline double min_displacement(double volume, double length_base = 0.15)
{
    return length_base * std::cbrt(std::max(volume, 0.0));
}

/// run_qc. `keypoints` are checked against the frame; the dense trace is
/// used for occlusion and displacement.
inline QcVerdict run_qc(const Trace& trace, const Path& keypoints, const Scene& scene, const ObjectInstance& src,
                        const QcConfig& cfg = {})
{
    QcVerdict v;
    if (trace.world_points.empty()) throw InvalidInput("empty trace");
    v.displacement = (trace.world_points.back() - trace.world_points.front()).norm();
    v.min_length = min_displacement(src.box.volume(), cfg.length_base);
    if (is_blocklisted(src.category)) {
        v.reason = QcReason::Blocklist;
        return v;
    }
    for (const auto& k : keypoints) {
        const auto pr = scene.camera.try_project(k);
        if (!pr || !scene.camera.pixel_of(pr->u, pr->v)) {
            v.reason = QcReason::OutOfFrame;
            return v;
        }
    }
    v.occlusion = occlusion_ratio(trace, scene.depth, scene.camera, cfg);
    if (v.occlusion > cfg.max_occlusion) {
        v.reason = QcReason::Occluded;
        return v;
    }
    if (v.displacement < v.min_length) v.reason = QcReason::TooShort;
    return v;
}

inline QcVerdict run_qc(const Trace& trace, const Scene& scene, const ObjectInstance& src, const QcConfig& cfg = {})
{
    return run_qc(trace, trace.world_points, scene, src, cfg);
}

}  // namespace tracespatial
