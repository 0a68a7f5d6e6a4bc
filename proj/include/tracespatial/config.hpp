#pragma once

#include "tracespatial/bench.hpp"
#include "tracespatial/bypass.hpp"
#include "tracespatial/plan.hpp"
#include "tracespatial/qc.hpp"
#include "tracespatial/refine.hpp"

#include "json.hpp"

#include <fstream>
#include <string>

namespace tracespatial {

using nlohmann::json;

struct PipelineConfig {
    PlannerParams planner;
    EndpointParams endpoint;
    EscapeParams escape;
    double region_radius = 0.20;
    double move_region_radius = 0.10;
    double placement_gap = 0.05;
    double default_move_distance = 0.30;

    double via_margin = 0.05;
    double block_margin = 0.05;
    PathCostWeights cost_weights;
    bool score_realized = false;

    SmoothParams smooth;
    double rdp_epsilon = 0.01;
    std::size_t max_keypoints = 8;
    GroundParams ground;
    DiscoverParams discover;
    SupportParams support;

    QcConfig qc;
    BenchParams bench;
    bool self_check = true;

    double metric_probability = 0.20;
    int auto_max_tasks = 5;
};

namespace detail {

template <class T>
void read(const json& j, const char* key, T& out)
{
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("config key '") + key + "': " + e.what());
    }
}

}  // namespace detail

/// Apply overrides from `j` (same layout as config/defaults.json). Unknown keys
/// are ignored; absent keys keep their current values.
inline void apply_config(PipelineConfig& c, const json& j)
{
    using detail::read;
    if (j.contains("plan")) {
        const auto& p = j["plan"];
        read(p, "step_size", c.planner.step_size);
        read(p, "goal_bias", c.planner.goal_bias);
        read(p, "rewire_radius", c.planner.rewire_radius);
        read(p, "max_iterations", c.planner.max_iterations);
        read(p, "goal_tolerance", c.planner.goal_tolerance);
        read(p, "sweep_step", c.planner.sweep_step);
        read(p, "bounds_padding", c.planner.bounds_padding);
        read(p, "endpoint_radii", c.endpoint.radii);
        read(p, "first_ring_samples", c.endpoint.first_ring_samples);
        read(p, "samples_increment", c.endpoint.samples_increment);
        read(p, "safety", c.endpoint.safety);
        read(p, "region_radius", c.region_radius);
        read(p, "move_region_radius", c.move_region_radius);
        read(p, "placement_gap", c.placement_gap);
        read(p, "default_move_distance", c.default_move_distance);
    }
    if (j.contains("escape")) {
        const auto& e = j["escape"];
        read(e, "max_distance", c.escape.max_distance);
        read(e, "advance_step", c.escape.advance_step);
        read(e, "fan_size", c.escape.fan_size);
        read(e, "ray_cap", c.escape.ray_cap);
        read(e, "ray_step", c.escape.ray_step);
        read(e, "occlusion_tol", c.escape.occlusion_tol);
        read(e, "inconclusive_below", c.escape.inconclusive_below);
    }
    if (j.contains("bypass")) {
        const auto& b = j["bypass"];
        read(b, "delta_margin", c.via_margin);
        read(b, "block_margin", c.block_margin);
        read(b, "score_realized", c.score_realized);
        read(b, "w_length", c.cost_weights.length);
        read(b, "w_angle", c.cost_weights.angle);
        read(b, "w_backtrack", c.cost_weights.backtrack);
        read(b, "w_lateral", c.cost_weights.lateral);
    }
    if (j.contains("refine")) {
        const auto& r = j["refine"];
        read(r, "samples_per_segment", c.smooth.samples_per_segment);
        read(r, "via_max_distance", c.smooth.via_max_distance);
        read(r, "rdp_epsilon", c.rdp_epsilon);
        read(r, "max_keypoints", c.max_keypoints);
        read(r, "ground_tolerance", c.ground.tolerance);
        read(r, "ground_step", c.ground.step);
        read(r, "ground_max_descent", c.ground.max_descent);
        read(r, "via_threshold", c.discover.threshold);
        read(r, "via_density", c.discover.density);
    }
    if (j.contains("scene")) {
        const auto& s = j["scene"];
        read(s, "support_max_gap", c.support.max_gap);
        read(s, "support_max_penetration", c.support.max_penetration);
        read(s, "support_min_overlap", c.support.min_footprint_overlap);
    }
    if (j.contains("qc")) {
        const auto& q = j["qc"];
        read(q, "length_base", c.qc.length_base);
        read(q, "max_occlusion", c.qc.max_occlusion);
        read(q, "occlusion_tolerance", c.qc.occlusion_tolerance);
        read(q, "waypoint_spacing", c.qc.waypoint_spacing);
        read(q, "self_check", c.self_check);
    }
    if (j.contains("bench")) {
        const auto& b = j["bench"];
        read(b, "distance_3d", c.bench.distance_3d);
        read(b, "max_sweep", c.bench.max_sweep);
        read(b, "voxel_size", c.bench.voxel_size);
        read(b, "end_points", c.bench.end_points);
        read(b, "keypoints_only_sweep", c.bench.keypoints_only_sweep);
        read(b, "start_cloud_from_box", c.bench.start_cloud_from_box);
    }
    if (j.contains("instruct")) read(j["instruct"], "metric_probability", c.metric_probability);
    if (j.contains("pipeline")) read(j["pipeline"], "auto_max_tasks", c.auto_max_tasks);
    c.planner.validate();
}

inline PipelineConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InvalidInput("config '" + path + "': " + e.what());
    }
    PipelineConfig c;
    apply_config(c, j);
    return c;
}

}  // namespace tracespatial
