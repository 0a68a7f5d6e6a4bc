#pragma once

#include "tracespatial/collide.hpp"
#include "tracespatial/plan.hpp"
#include "tracespatial/scene.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tracespatial {

struct ViaCandidate {
    Direction direction = Direction::Left;
    Vec3 via_point = Vec3::Zero();
    double cost_J = 0.0;
    bool feasible = false;
};

/// Candidate whose bounding sphere comes within
/// `margin` of the path; closest wins, ties by smaller id.
inline std::optional<std::string> find_blocking(const Path& direct_path, std::span<const ObjectInstance> candidates,
                                                double margin = 0.05)
{
    if (direct_path.empty()) throw InvalidInput("direct path is empty");
    std::optional<std::string> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& o : candidates) {
        const double d = point_polyline_distance(o.box.center, direct_path) - o.box.bounding_radius();
        if (d >= margin) continue;
        if (d < best_d || (d == best_d && best && o.id < *best)) {
            best_d = d;
            best = o.id;
        }
    }
    return best;
}

/// c_via = c_obs + (r_obs + r_src + margin) n_d for
/// each of the six directions, in enum order.
inline std::vector<ViaCandidate> via_candidates(const ObjectInstance& via_obj, const ObjectInstance& src_obj,
                                                const DirectionFrame& frame, const CollisionWorld& world,
                                                double margin = 0.05)
{
    const double reach = via_obj.box.bounding_radius() + src_obj.box.bounding_radius() + margin;
    std::vector<ViaCandidate> out;
    for (Direction d : kAllDirections) {
        ViaCandidate c;
        c.direction = d;
        c.via_point = via_obj.box.center + reach * frame.normal(d);
        c.feasible = !world.collides(src_obj.box, c.via_point);
        out.push_back(c);
    }
    return out;
}

struct PathCostWeights {
    double length = 1.0;
    double angle = 0.3;
    double backtrack = 2.0;
    double lateral = 0.2;
};

struct PathCostTerms {
    double length = 0.0;
    double angle = 0.0;
    double backtrack = 0.0;
    double lateral = 0.0;
    double total = 0.0;
};

/// Individual terms of the naturalness cost. Angle term: sum over interior
/// vertices of (1 - cos turn). Backtrack: 1 if any segment points against
/// start->goal. Lateral: max perpendicular distance from the start->goal line.
inline PathCostTerms path_cost_terms(const Path& path, const Vec3& goal, const PathCostWeights& w = {})
{
    if (path.size() < 2) throw InvalidInput("path needs at least 2 points");
    PathCostTerms t;
    t.length = polyline_length(path);
    const Vec3 axis = goal - path.front();
    const double axis_len = axis.norm();
    std::optional<Vec3> prev_dir;
    for (std::size_t i = 1; i < path.size(); ++i) {
        const Vec3 seg = path[i] - path[i - 1];
        if (seg.norm() < 1e-12) continue;
        if (axis_len > 0.0 && seg.dot(axis) < 0.0) t.backtrack = 1.0;
        const Vec3 dir = seg.normalized();
        if (prev_dir) t.angle += 1.0 - std::clamp(prev_dir->dot(dir), -1.0, 1.0);
        prev_dir = dir;
    }
    for (const auto& p : path) {
        const double lat = axis_len > 0.0 ? (p - path.front()).cross(axis).norm() / axis_len : (p - path.front()).norm();
        t.lateral = std::max(t.lateral, lat);
    }
    t.total = w.length * t.length + w.angle * t.angle + w.backtrack * t.backtrack + w.lateral * t.lateral;
    return t;
}

/// J = 1.0 L + 0.3 P_angle + 2.0 P_backtrack + 0.2 P_lateral.
inline double score_path(const Path& path, const Vec3& goal, const PathCostWeights& w = {})
{
    return path_cost_terms(path, goal, w).total;
}

/// Index of the feasible candidate with the lowest J; ties go to the
/// earlier direction. Infeasible candidates are never selected.
inline std::optional<std::size_t> select_candidate(const std::vector<ViaCandidate>& candidates)
{
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!candidates[i].feasible) continue;
        if (!best || candidates[i].cost_J < candidates[*best].cost_J) best = i;
    }
    return best;
}

/// Fill cost_J with the polyline proxy start -> via -> goal.
inline void score_candidates_proxy(std::vector<ViaCandidate>& candidates, const Vec3& start, const Vec3& goal,
                                   const PathCostWeights& w = {})
{
    for (auto& c : candidates) c.cost_J = score_path({start, c.via_point, goal}, goal, w);
}

/// Two independent searches start->via and via->goal,
/// concatenated with the via point deduplicated.
inline PlanResult plan_with_bypass(const Vec3& start, const Vec3& via_point, const Vec3& goal, const OrientedBox3& moving,
                                   const CollisionWorld& world, const PlannerParams& params)
{
    PlannerParams p1 = params;
    PlanResult first = rrt_star(start, via_point, moving, world, p1);
    if (!first.ok()) {
        first.failed_stage = 1;
        return first;
    }
    PlannerParams p2 = params;
    p2.rng_seed = params.rng_seed ^ 0x5DEECE66DULL;
    PlanResult second = rrt_star(via_point, goal, moving, world, p2);
    if (!second.ok()) {
        second.failed_stage = 2;
        return second;
    }
    PlanResult out;
    out.path = first.path;
    for (std::size_t i = 1; i < second.path.size(); ++i) out.path.push_back(second.path[i]);
    out.cost = first.cost + second.cost;
    out.iterations = first.iterations + second.iterations;
    out.tree_size = first.tree_size + second.tree_size;
    out.via_point = via_point;
    return out;
}

}  // namespace tracespatial
