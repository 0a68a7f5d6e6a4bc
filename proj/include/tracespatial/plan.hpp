#pragma once

#include "tracespatial/collide.hpp"
#include "tracespatial/geometry.hpp"
#include "tracespatial/rng.hpp"
#include "tracespatial/scene.hpp"

#include <functional>
#include <numeric>
#include <optional>
#include <vector>

namespace tracespatial {

TRACESPATIAL_ERROR(EscapeFailed);

struct PlannerParams {
    double step_size = 0.05;
    double goal_bias = 0.25;
    double rewire_radius = 0.25;
    int max_iterations = 5000;
    double goal_tolerance = 0.05;
    std::uint64_t rng_seed = 0;
    double sweep_step = kDefaultSweepStep;
    /// Sampling domain; when unset, the start/goal box grown by `bounds_padding`.
    std::optional<Aabb3> bounds;
    double bounds_padding = 0.4;

    void validate() const
    {
        if (!(step_size > 0.0)) throw InvalidInput("step_size must be positive");
        if (!(goal_bias >= 0.0 && goal_bias <= 1.0)) throw InvalidInput("goal_bias must be in [0, 1]");
        if (!(rewire_radius >= step_size)) throw InvalidInput("rewire_radius must be >= step_size");
        if (max_iterations <= 0) throw InvalidInput("max_iterations must be positive");
        if (!(goal_tolerance >= 0.0)) throw InvalidInput("goal_tolerance must be >= 0");
    }
};

enum class PlanFailure { None, MaxIterationsExceeded, GoalInCollision, StartInCollision };

inline const char* plan_failure_name(PlanFailure f)
{
    switch (f) {
    case PlanFailure::None: return "None";
    case PlanFailure::MaxIterationsExceeded: return "MaxIterationsExceeded";
    case PlanFailure::GoalInCollision: return "GoalInCollision";
    case PlanFailure::StartInCollision: return "StartInCollision";
    }
    return "?";
}

struct PlanResult {
    Path path;  // start -> goal, consecutive points <= step_size apart
    PlanFailure failure = PlanFailure::None;
    double cost = 0.0;
    int iterations = 0;
    std::size_t tree_size = 0;
    Path escape_prefix;
    std::optional<Vec3> via_point;
    int failed_stage = 0;  // 1 or 2 for two-stage plans

    bool ok() const { return failure == PlanFailure::None; }
};

// ---------------------------------------------------------------------------
// Endpoint sampling

struct DestinationRegion {
    Vec3 centroid = Vec3::Zero();
    double max_radius = 0.20;
    Vec3 axis_u = Vec3::UnitX();  // horizontal basis of the polar grid
    Vec3 axis_v = Vec3::UnitZ();
};

struct EndpointParams {
    std::vector<double> radii{0.0, 0.03, 0.06, 0.10, 0.15, 0.20};
    int first_ring_samples = 8;
    int samples_increment = 4;
    double safety = 0.01;
};

/// Polar grid candidates, inner rings first, angular phase 0.
inline std::vector<Vec3> polar_candidates(const DestinationRegion& region, double height, const EndpointParams& p = {})
{
    std::vector<Vec3> out;
    int ring = 0;
    for (double r : p.radii) {
        if (r > region.max_radius + 1e-12) break;
        if (r <= 0.0) {
            Vec3 c = region.centroid;
            c.y() = height;
            out.push_back(c);
            continue;
        }
        const int n = p.first_ring_samples + p.samples_increment * ring++;
        for (int k = 0; k < n; ++k) {
            const double th = 2.0 * kPi * k / n;
            Vec3 c = region.centroid + r * (std::cos(th) * region.axis_u + std::sin(th) * region.axis_v);
            c.y() = height;
            out.push_back(c);
        }
    }
    return out;
}

/// First collision-free polar candidate, height set to
/// platform_y + obj_height/2 + safety.
inline std::optional<Vec3> sample_endpoint(const DestinationRegion& region, double platform_y, double obj_height,
                                           const std::function<bool(const Vec3&)>& collides,
                                           const EndpointParams& params = {})
{
    const double y = platform_y + 0.5 * obj_height + params.safety;
    for (const auto& c : polar_candidates(region, y, params))
        if (!collides(c)) return c;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// RRT*

namespace detail {

struct TreeNode {
    Vec3 pos;
    int parent = -1;
    double cost = 0.0;
    std::vector<int> children;
};

inline void propagate_cost(std::vector<TreeNode>& nodes, int root, double delta)
{
    std::vector<int> stack(nodes[root].children.begin(), nodes[root].children.end());
    while (!stack.empty()) {
        const int n = stack.back();
        stack.pop_back();
        nodes[n].cost += delta;
        stack.insert(stack.end(), nodes[n].children.begin(), nodes[n].children.end());
    }
}

}  // namespace detail

/// rrt_star over translations of `moving` (orientation held fixed).
inline PlanResult rrt_star(const Vec3& start, const Vec3& goal, const OrientedBox3& moving, const CollisionWorld& world,
                           const PlannerParams& params)
{
    params.validate();
    PlanResult result;
    if (world.collides(moving, goal)) {
        result.failure = PlanFailure::GoalInCollision;
        return result;
    }
    if (world.collides(moving, start)) {
        result.failure = PlanFailure::StartInCollision;
        return result;
    }

    Aabb3 bounds;
    if (params.bounds) {
        bounds = *params.bounds;
    } else {
        bounds = Aabb3::empty();
        bounds.extend(start);
        bounds.extend(goal);
        bounds = bounds.expanded(params.bounds_padding);
    }

    Rng rng(params.rng_seed);
    std::vector<detail::TreeNode> nodes;
    nodes.push_back({start, -1, 0.0, {}});
    std::vector<int> goal_nodes;

    const auto edge_free = [&](const Vec3& a, const Vec3& b) {
        return !world.segment_collides(moving, a, b, params.sweep_step);
    };

    if ((goal - start).norm() <= params.goal_tolerance && edge_free(start, goal)) goal_nodes.push_back(0);

    const double r2 = params.rewire_radius * params.rewire_radius;
    std::vector<int> near;
    std::vector<std::pair<double, int>> order;
    int it = 0;
    for (; it < params.max_iterations; ++it) {
        Vec3 sample;
        if (rng.uniform() < params.goal_bias) {
            sample = goal;
        } else {
            for (int k = 0; k < 3; ++k) sample[k] = rng.uniform(bounds.min[k], bounds.max[k]);
        }

        int nearest = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
            const double d2 = (nodes[i].pos - sample).squaredNorm();
            if (d2 < best_d2) {
                best_d2 = d2;
                nearest = i;
            }
        }
        Vec3 dir = sample - nodes[nearest].pos;
        const double dist = dir.norm();
        if (dist < 1e-9) continue;
        const Vec3 next = dist > params.step_size ? Vec3(nodes[nearest].pos + dir * (params.step_size / dist)) : sample;
        if (world.collides(moving, next)) continue;

        near.clear();
        for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
            if ((nodes[i].pos - next).squaredNorm() <= r2) near.push_back(i);
        if (std::find(near.begin(), near.end(), nearest) == near.end()) near.push_back(nearest);

        order.clear();
        for (int i : near) order.push_back({nodes[i].cost + (nodes[i].pos - next).norm(), i});
        std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        int parent = -1;
        double parent_cost = 0.0;
        for (const auto& [c, cand] : order) {
            if (edge_free(nodes[cand].pos, next)) {
                parent = cand;
                parent_cost = c;
                break;
            }
        }
        if (parent < 0) continue;

        const int id = static_cast<int>(nodes.size());
        nodes.push_back({next, parent, parent_cost, {}});
        nodes[parent].children.push_back(id);

        for (int n : near) {
            if (n == parent) continue;
            const double c = nodes[id].cost + (nodes[n].pos - next).norm();
            if (c >= nodes[n].cost - 1e-12) continue;
            if (!edge_free(next, nodes[n].pos)) continue;
            auto& siblings = nodes[nodes[n].parent].children;
            siblings.erase(std::find(siblings.begin(), siblings.end(), n));
            const double delta = c - nodes[n].cost;
            nodes[n].parent = id;
            nodes[n].cost = c;
            nodes[id].children.push_back(n);
            detail::propagate_cost(nodes, n, delta);
        }

        if ((next - goal).norm() <= params.goal_tolerance && edge_free(next, goal)) goal_nodes.push_back(id);
    }

    result.iterations = it;
    result.tree_size = nodes.size();
    int best = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int g : goal_nodes) {
        const double c = nodes[g].cost + (nodes[g].pos - goal).norm();
        if (c < best_cost) {
            best_cost = c;
            best = g;
        }
    }
    if (best < 0) {
        result.failure = PlanFailure::MaxIterationsExceeded;
        return result;
    }
    Path rev;
    if ((nodes[best].pos - goal).norm() > 0.0) rev.push_back(goal);
    for (int n = best; n >= 0; n = nodes[n].parent) rev.push_back(nodes[n].pos);
    Path path(rev.rbegin(), rev.rend());
    result.path = densify(path, params.step_size);
    result.cost = best_cost;
    return result;
}

inline PlanResult rrt_star(const Vec3& start, const Vec3& goal, const OrientedBox3& moving,
                           std::span<const ObjectInstance> obstacles, const std::set<std::string>& exclude_ids,
                           const PlannerParams& params)
{
    return rrt_star(start, goal, moving, CollisionWorld(obstacles, exclude_ids), params);
}

// ---------------------------------------------------------------------------
// Escape from in-collision starts

struct EscapeParams {
    double max_distance = 0.6;
    double advance_step = 0.02;
    int fan_size = 5;           // fan_size x fan_size pixels per direction
    double ray_cap = 3.0;
    double ray_step = 0.02;
    double occlusion_tol = 0.02;
    double inconclusive_below = 0.1;
};

enum class EscapeMode { None, Visual, Geometric };

struct EscapeResult {
    Vec3 free_point = Vec3::Zero();
    Path segment;  // empty when the start was already free
    EscapeMode mode = EscapeMode::None;
    Vec3 direction = Vec3::Zero();
};

/// Mean free length of rays cast from a pixel fan around `start` along `dir`,
/// judged against the depth buffer.
inline double opening_score(const Vec3& start, const Vec3& dir, const CameraModel& camera, const DepthMap& depth,
                            const EscapeParams& params = {})
{
    const auto proj = camera.try_project(start);
    if (!proj) return 0.0;
    const int half = params.fan_size / 2;
    double total = 0.0;
    int rays = 0;
    for (int dv = -half; dv <= half; ++dv)
        for (int du = -half; du <= half; ++du) {
            const Vec3 origin = camera.backproject(proj->u + du, proj->v + dv, proj->z);
            double free_len = 0.0;
            for (double s = params.ray_step; s <= params.ray_cap + 1e-12; s += params.ray_step) {
                const auto q = camera.try_project(origin + s * dir);
                if (!q) break;
                const auto px = camera.pixel_of(q->u, q->v);
                if (!px) break;
                const double d = depth.at(px->x, px->y);
                if (d > 0.0 && q->z > d + params.occlusion_tol) continue;
                free_len += params.ray_step;
            }
            total += free_len;
            ++rays;
        }
    return rays ? total / rays : 0.0;
}

namespace detail {

inline std::optional<double> advance_until_free(const Vec3& start, const Vec3& dir, double first, const OrientedBox3& moving,
                                                const CollisionWorld& world, const EscapeParams& params)
{
    for (double d = first; d <= params.max_distance + 1e-12; d += params.advance_step)
        if (!world.collides(moving, start + d * dir)) return d;
    return std::nullopt;
}

}  // namespace detail

/// Visual opening analysis, then geometric AABB push.
inline EscapeResult escape_start(const Vec3& start, const OrientedBox3& moving, const CollisionWorld& world,
                                 const DepthMap* depth = nullptr, const CameraModel* camera = nullptr,
                                 const EscapeParams& params = {})
{
    EscapeResult out;
    out.free_point = start;
    if (!world.collides(moving, start)) return out;

    const auto finish = [&](const Vec3& dir, double dist, EscapeMode mode) {
        out.free_point = start + dist * dir;
        out.segment = densify({start, out.free_point}, params.advance_step);
        out.mode = mode;
        out.direction = dir;
        return out;
    };

    const DirectionFrame frame = camera ? DirectionFrame::from_camera(*camera) : DirectionFrame{};
    if (depth && camera && depth->width == camera->width && depth->height == camera->height) {
        std::array<std::pair<double, int>, 6> scored;
        for (int i = 0; i < 6; ++i)
            scored[i] = {opening_score(start, frame.normal(kAllDirections[i]), *camera, *depth, params), i};
        std::stable_sort(scored.begin(), scored.end(), [](auto a, auto b) { return a.first > b.first; });
        if (scored[0].first >= params.inconclusive_below) {
            const Vec3 dir = frame.normal(kAllDirections[scored[0].second]);
            if (auto d = detail::advance_until_free(start, dir, params.advance_step, moving, world, params))
                return finish(dir, *d, EscapeMode::Visual);
        }
    }

    // Geometric push: per world axis direction, the translation that clears every
    // overlapping obstacle AABB; smallest first.
    const OrientedBox3 m = moving.at(start);
    const Aabb3 ma = m.aabb();
    std::array<std::pair<double, int>, 6> pushes;
    for (int i = 0; i < 6; ++i) pushes[i] = {0.0, i};
    bool any = false;
    for (const auto& e : world.entries()) {
        if (!e.aabb.overlaps(ma) || !sat_intersect(m, e.box)) continue;
        any = true;
        for (int axis = 0; axis < 3; ++axis) {
            pushes[2 * axis].first = std::max(pushes[2 * axis].first, e.aabb.max[axis] - ma.min[axis]);
            pushes[2 * axis + 1].first = std::max(pushes[2 * axis + 1].first, ma.max[axis] - e.aabb.min[axis]);
        }
    }
    if (any) {
        std::stable_sort(pushes.begin(), pushes.end(), [](auto a, auto b) { return a.first < b.first; });
        for (const auto& [push, i] : pushes) {
            if (push > params.max_distance) break;
            Vec3 dir = Vec3::Zero();
            dir[i / 2] = (i % 2 == 0) ? 1.0 : -1.0;
            if (auto d = detail::advance_until_free(start, dir, push + 1e-3, moving, world, params))
                return finish(dir, *d, EscapeMode::Geometric);
        }
    }
    throw EscapeFailed(strformat("no free pose within %.2f m", params.max_distance));
}

}  // namespace tracespatial
