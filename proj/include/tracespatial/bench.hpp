#pragma once

#include "tracespatial/collide.hpp"
#include "tracespatial/refine.hpp"
#include "tracespatial/reward.hpp"
#include "tracespatial/scene.hpp"

#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace tracespatial {

enum class TaskCategory { PickPlace, PushPull };

inline const char* task_category_name(TaskCategory c) { return c == TaskCategory::PickPlace ? "pick-place" : "push-pull"; }

inline TaskCategory parse_task_category(const std::string& s)
{
    if (s == "pick-place" || s == "PickPlace") return TaskCategory::PickPlace;
    if (s == "push-pull" || s == "PushPull") return TaskCategory::PushPull;
    throw InvalidInput("unknown task category '" + s + "'");
}

struct BenchSample {
    std::string id;
    Scene scene;
    RleMask start_mask;
    OrientedBox3 end_box;
    Trace reference_trace;
    std::string prompt;
    int step_count = 2;
    TaskCategory category = TaskCategory::PickPlace;
    std::optional<OrientedBox3> source_box;  // only used with start_cloud_from_box
};

struct SampleResult {
    bool start2d = false;
    bool end2d = false;
    bool start3d = false;
    bool end3d = false;
    bool overall = false;
    double sweep_max_fraction = 0.0;
};

struct BenchParams {
    double distance_3d = 0.20;
    double max_sweep = 0.20;
    double voxel_size = 0.02;
    int end_points = 3;
    bool keypoints_only_sweep = false;
    bool start_cloud_from_box = false;  // start3d against the source box instead of mask x depth
};

/// Per-sample geometry derived once from the scene.
struct BenchContext {
    std::vector<Vec3> object_cloud;
    OccupancyGrid occupancy;
    std::unordered_set<long> own_voxels;  // voxels holding only the object's own depth points
    std::optional<Box2d> end_box_2d;
};

/// Axis-aligned hull of the projected corners in front of the camera.
inline std::optional<Box2d> projected_hull(const OrientedBox3& box, const CameraModel& camera)
{
    std::optional<Box2d> out;
    for (const auto& c : box.corners()) {
        const auto pr = camera.try_project(c);
        if (!pr) continue;
        if (!out) {
            out = Box2d{pr->u, pr->v, pr->u, pr->v};
        } else {
            out->u_min = std::min(out->u_min, pr->u);
            out->v_min = std::min(out->v_min, pr->v);
            out->u_max = std::max(out->u_max, pr->u);
            out->v_max = std::max(out->v_max, pr->v);
        }
    }
    return out;
}

/// Back-projection of the mask pixels that carry valid depth.
inline std::vector<Vec3> mask_cloud(const RleMask& mask, const DepthMap& depth, const CameraModel& camera)
{
    std::vector<Vec3> out;
    const int w = std::min(mask.width(), depth.width), h = std::min(mask.height(), depth.height);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y)) continue;
            const double d = depth.at(x, y);
            if (d > 0.0) out.push_back(camera.backproject(x, y, d));
        }
    return out;
}

inline BenchContext prepare_bench(const BenchSample& s, const BenchParams& p = {})
{
    BenchContext ctx;
    const auto& cam = s.scene.camera;
    const auto& depth = s.scene.depth;
    ctx.occupancy = build_occupancy(depth, cam, p.voxel_size);
    ctx.object_cloud = mask_cloud(s.start_mask, depth, cam);
    std::unordered_set<long> shared;
    for (int y = 0; y < depth.height; ++y)
        for (int x = 0; x < depth.width; ++x) {
            const double d = depth.at(x, y);
            if (!(d > 0.0) || s.start_mask.at(x, y)) continue;
            shared.insert(ctx.occupancy.voxel_index(cam.backproject(x, y, d)));
        }
    for (const auto& q : ctx.object_cloud) {
        const long v = ctx.occupancy.voxel_index(q);
        if (v >= 0 && !shared.count(v)) ctx.own_voxels.insert(v);
    }
    ctx.end_box_2d = projected_hull(s.end_box, cam);
    return ctx;
}

/// Grid answer (u, v on [0, 1000], d meters) to a pixel-space trace.
inline std::optional<Trace> trace_from_answer(const std::string& answer, const CameraModel& camera)
{
    const auto pts = parse_point_list(answer);
    if (!pts) return std::nullopt;
    std::vector<ImagePoint> img;
    for (const auto& p : *pts)
        img.push_back({p[0] * camera.width / kAnswerGrid, p[1] * camera.height / kAnswerGrid, p[2]});
    return Trace::from_image(img, camera);
}

/// evaluate_sample. An absent or malformed prediction scores all-false.
inline SampleResult evaluate_sample(const std::optional<Trace>& pred, const BenchSample& s, const BenchContext& ctx,
                                    const BenchParams& p = {})
{
    SampleResult r;
    if (!pred || pred->world_points.empty() || pred->world_points.size() != pred->image_points.size()) return r;
    const auto& cam = s.scene.camera;
    const auto& img = pred->image_points;
    const auto& world = pred->world_points;
    const std::size_t n = img.size();
    const std::size_t tail = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, p.end_points)));

    if (const auto px = cam.pixel_of(img.front().u, img.front().v))
        r.start2d = px->x < s.start_mask.width() && px->y < s.start_mask.height() && s.start_mask.at(px->x, px->y);
    if (ctx.end_box_2d) {
        for (std::size_t i = n - tail; i < n; ++i)
            if (ctx.end_box_2d->contains(img[i].u, img[i].v)) r.end2d = true;
    }

    double start_dist = std::numeric_limits<double>::infinity();
    if (p.start_cloud_from_box && s.source_box) {
        start_dist = s.source_box->distance_to(world.front());
    } else {
        for (const auto& q : ctx.object_cloud) start_dist = std::min(start_dist, (q - world.front()).norm());
    }
    r.start3d = start_dist <= p.distance_3d;
    for (std::size_t i = n - tail; i < n; ++i)
        if (s.end_box.distance_to(world[i]) <= p.distance_3d) r.end3d = true;

    SweepOptions opts;
    opts.keypoints_only = p.keypoints_only_sweep;
    opts.exclude_voxels = &ctx.own_voxels;
    r.sweep_max_fraction = sweep_fraction(ctx.object_cloud, world, ctx.occupancy, opts);
    r.overall = r.start3d && r.end3d && r.sweep_max_fraction <= p.max_sweep;
    return r;
}

inline SampleResult evaluate_sample(const std::optional<Trace>& pred, const BenchSample& s, const BenchParams& p = {})
{
    return evaluate_sample(pred, s, prepare_bench(s, p), p);
}

struct MetricCounts {
    std::size_t n = 0, start2d = 0, end2d = 0, start3d = 0, end3d = 0, overall = 0;

    void add(const SampleResult& r)
    {
        ++n;
        start2d += r.start2d;
        end2d += r.end2d;
        start3d += r.start3d;
        end3d += r.end3d;
        overall += r.overall;
    }

    static double pct(std::size_t k, std::size_t n) { return n ? 100.0 * static_cast<double>(k) / n : 0.0; }
};

struct SuiteReport {
    MetricCounts total;
    std::map<int, MetricCounts> by_step_count;
    std::vector<SampleResult> results;  // sample order
};

/// evaluate_suite. `preds[i]` belongs to `samples[i]`; missing entries
/// count as all-false.
inline SuiteReport evaluate_suite(const std::vector<BenchSample>& samples, const std::vector<std::optional<Trace>>& preds,
                                  const BenchParams& p = {})
{
    SuiteReport rep;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto r = i < preds.size() ? evaluate_sample(preds[i], samples[i], p) : SampleResult{};
        rep.results.push_back(r);
        rep.total.add(r);
        rep.by_step_count[samples[i].step_count].add(r);
    }
    return rep;
}

inline std::string format_report(const SuiteReport& rep)
{
    std::string out = strformat("%-10s %6s %8s %8s %8s %8s %8s\n", "steps", "n", "2DStart", "2DEnd", "3DStart",
                                "3DEnd", "Overall");
    const auto row = [](const std::string& label, const MetricCounts& c) {
        return strformat("%-10s %6zu %8.2f %8.2f %8.2f %8.2f %8.2f\n", label.c_str(), c.n,
                         MetricCounts::pct(c.start2d, c.n), MetricCounts::pct(c.end2d, c.n),
                         MetricCounts::pct(c.start3d, c.n), MetricCounts::pct(c.end3d, c.n),
                         MetricCounts::pct(c.overall, c.n));
    };
    for (const auto& [k, c] : rep.by_step_count) out += row(std::to_string(k), c);
    out += row("all", rep.total);
    return out;
}

}  // namespace tracespatial
