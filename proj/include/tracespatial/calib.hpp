#pragma once

#include "tracespatial/refine.hpp"
#include "tracespatial/scene.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tracespatial {

TRACESPATIAL_ERROR(Indeterminate);
TRACESPATIAL_ERROR(MultiClosure);
TRACESPATIAL_ERROR(AmbiguousArms);
TRACESPATIAL_ERROR(NoClosure);

struct EefPose {
    int frame = 0;
    Mat3 rotation = Mat3::Identity();  // eef -> world
    Vec3 position = Vec3::Zero();
    bool gripper_closed = false;
};

struct EpisodeFrame {
    std::optional<CameraModel> camera;  // falls back to Episode::camera
    DepthMap depth;
    std::map<std::string, EefPose> arms;
};

struct Episode {
    std::vector<EpisodeFrame> frames;
    std::optional<CameraModel> camera;
    std::string instruction;

    const CameraModel& camera_at(std::size_t i) const
    {
        if (frames.at(i).camera) return *frames[i].camera;
        if (camera) return *camera;
        throw InvalidInput(strformat("no camera for frame %zu", i));
    }

    std::vector<std::string> arm_names() const
    {
        std::set<std::string> names;
        for (const auto& f : frames)
            for (const auto& [k, v] : f.arms) names.insert(k);
        return {names.begin(), names.end()};
    }
};

enum class GripperConvention { ZOffset15, XOffset14 };

inline Vec3 gripper_point(const EefPose& pose, GripperConvention c = GripperConvention::ZOffset15)
{
    const Vec3 offset = c == GripperConvention::ZOffset15 ? Vec3(0, 0, 0.15) : Vec3(0.14, 0, 0);
    return pose.position + pose.rotation * offset;
}

enum class ExtrinsicsMode { Strict, ZeroTolerant };

inline double default_extrinsics_threshold(ExtrinsicsMode m) { return m == ExtrinsicsMode::Strict ? 1.0 / 3.0 : 0.83; }

struct ExtrinsicsResult {
    double fraction = 0.0;
    bool valid = false;
    std::size_t tested = 0;
    std::size_t aligned = 0;
};

/// Every (frame, arm) pair whose eef position
/// projects inside the image is tested.
inline ExtrinsicsResult validate_extrinsics(const Episode& ep, ExtrinsicsMode mode,
                                            std::optional<double> threshold = std::nullopt, double tolerance = 0.05)
{
    ExtrinsicsResult r;
    for (std::size_t i = 0; i < ep.frames.size(); ++i) {
        const auto& f = ep.frames[i];
        const auto& cam = ep.camera_at(i);
        for (const auto& [name, pose] : f.arms) {
            const auto pr = cam.try_project(pose.position);
            if (!pr) continue;
            const auto px = cam.pixel_of(pr->u, pr->v);
            if (!px || px->x >= f.depth.width || px->y >= f.depth.height) continue;
            ++r.tested;
            const double d = f.depth.at(px->x, px->y);
            const bool close = std::abs(d - pr->z) < tolerance;
            if (close || (mode == ExtrinsicsMode::ZeroTolerant && d == 0.0)) ++r.aligned;
        }
    }
    if (r.tested == 0) throw Indeterminate("no frame projects inside the image");
    r.fraction = static_cast<double>(r.aligned) / static_cast<double>(r.tested);
    r.valid = r.fraction > threshold.value_or(default_extrinsics_threshold(mode));
    return r;
}

/// More than `zero_fraction` of the disc is zero depth.
inline bool occlusion_check(const Vec3& point_world, const CameraModel& camera, const DepthMap& depth,
                            int radius_px = 30, double zero_fraction = 0.6)
{
    const auto pr = camera.try_project(point_world);
    if (!pr) throw Indeterminate("point behind the camera");
    const auto px = camera.pixel_of(pr->u, pr->v);
    if (!px) throw Indeterminate("point projects outside the image");
    std::size_t total = 0, zeros = 0;
    for (int dy = -radius_px; dy <= radius_px; ++dy)
        for (int dx = -radius_px; dx <= radius_px; ++dx) {
            if (dx * dx + dy * dy > radius_px * radius_px) continue;
            const int x = px->x + dx, y = px->y + dy;
            if (x < 0 || y < 0 || x >= depth.width || y >= depth.height) continue;
            ++total;
            if (depth.at(x, y) == 0.0) ++zeros;
        }
    return total > 0 && static_cast<double>(zeros) > zero_fraction * static_cast<double>(total);
}

struct Interval {
    int begin = 0;  // inclusive
    int end = 0;    // exclusive
};

/// Runs of consecutive frames where `arm` is closed.
inline std::vector<Interval> closure_intervals(const Episode& ep, const std::string& arm)
{
    std::vector<Interval> out;
    std::optional<int> start;
    for (std::size_t i = 0; i <= ep.frames.size(); ++i) {
        bool closed = false;
        if (i < ep.frames.size()) {
            const auto it = ep.frames[i].arms.find(arm);
            closed = it != ep.frames[i].arms.end() && it->second.gripper_closed;
        }
        if (closed && !start) start = static_cast<int>(i);
        if (!closed && start) {
            out.push_back({*start, static_cast<int>(i)});
            start.reset();
        }
    }
    return out;
}

struct ExtractParams {
    GripperConvention convention = GripperConvention::ZOffset15;
    int base_offset = 60;
    double move_threshold = 0.02;  // closure-interval path length for "moves"
};

struct ExtractedTraces {
    std::string arm;
    Interval closure;
    int base_frame = 0;
    Trace eef_trace;     // frames [base, closure.end)
    Trace object_trace;  // frames [closure.begin, closure.end)
};

inline double gripper_path_length(const Episode& ep, const std::string& arm, Interval iv, GripperConvention c)
{
    Path pts;
    for (int i = iv.begin; i < iv.end; ++i) {
        const auto it = ep.frames[i].arms.find(arm);
        if (it != ep.frames[i].arms.end()) pts.push_back(gripper_point(it->second, c));
    }
    return polyline_length(pts);
}

/// Single closure interval, arm disambiguation, traces
/// expressed in the base frame's camera.
inline ExtractedTraces extract_traces(const Episode& ep, const ExtractParams& p = {})
{
    if (ep.frames.empty()) throw InvalidInput("episode has no frames");
    std::vector<std::pair<std::string, Interval>> closing;
    for (const auto& arm : ep.arm_names()) {
        const auto iv = closure_intervals(ep, arm);
        if (iv.size() > 1) throw MultiClosure("arm '" + arm + "' closes more than once");
        if (iv.size() == 1) closing.push_back({arm, iv.front()});
    }
    if (closing.empty()) throw NoClosure("no gripper closure in episode");
    std::pair<std::string, Interval> chosen = closing.front();
    if (closing.size() > 1) {
        std::vector<std::pair<std::string, Interval>> moving;
        for (const auto& c : closing)
            if (gripper_path_length(ep, c.first, c.second, p.convention) > p.move_threshold) moving.push_back(c);
        if (moving.size() != 1) throw AmbiguousArms(strformat("%zu closing arms move", moving.size()));
        chosen = moving.front();
    }

    ExtractedTraces out;
    out.arm = chosen.first;
    out.closure = chosen.second;
    out.base_frame = std::max(0, out.closure.begin - p.base_offset);
    const auto& cam = ep.camera_at(static_cast<std::size_t>(out.base_frame));
    const auto collect = [&](int from, int to) {
        Path pts;
        for (int i = from; i < to; ++i) {
            const auto it = ep.frames[i].arms.find(out.arm);
            if (it != ep.frames[i].arms.end()) pts.push_back(gripper_point(it->second, p.convention));
        }
        return pts;
    };
    out.eef_trace = Trace::from_world(collect(out.base_frame, out.closure.end), cam, TraceFrame::EndEffectorCentric);
    out.object_trace = Trace::from_world(collect(out.closure.begin, out.closure.end), cam, TraceFrame::ObjectCentric);
    return out;
}

/// RDP at a fixed tolerance; nullopt when more than `max_points` remain.
inline std::optional<Trace> downsample_or_reject(const Trace& t, double epsilon, std::size_t max_points = 8)
{
    if (t.size() < 2) return t;
    const auto idx = rdp_indices(t.world_points, epsilon);
    if (idx.size() > max_points) return std::nullopt;
    Trace out;
    out.frame = t.frame;
    out.via_point = t.via_point;
    for (auto i : idx) {
        out.world_points.push_back(t.world_points[i]);
        out.image_points.push_back(t.image_points[i]);
    }
    return out;
}

}  // namespace tracespatial
