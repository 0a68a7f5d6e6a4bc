#pragma once

#include "tracespatial/bench.hpp"
#include "tracespatial/bypass.hpp"
#include "tracespatial/config.hpp"
#include "tracespatial/instruct.hpp"
#include "tracespatial/io.hpp"
#include "tracespatial/plan.hpp"
#include "tracespatial/qc.hpp"
#include "tracespatial/refine.hpp"
#include "tracespatial/scene.hpp"

#include "json.hpp"

#include <atomic>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace tracespatial {

/// Outcome of one task. `lines` holds the JSONL records in emission order.
struct TaskOutcome {
    std::size_t index = 0;
    TaskSpec task;
    bool accepted = false;
    std::string reason;  // rejection reason, empty when accepted
    std::string detail;
    std::optional<Trace> trace;
    std::optional<OrientedBox3> end_box;
    std::vector<json> lines;
};

struct GenerateResult {
    std::vector<TaskOutcome> outcomes;
    std::size_t accepted() const
    {
        std::size_t n = 0;
        for (const auto& o : outcomes) n += o.accepted;
        return n;
    }
    std::string jsonl() const
    {
        std::string out;
        for (const auto& o : outcomes)
            for (const auto& l : o.lines) out += l.dump() + "\n";
        return out;
    }
};

namespace detail {

inline std::string strip_article(std::string s)
{
    for (const char* a : {"the ", "The "})
        if (s.rfind(a, 0) == 0) return s.substr(4);
    return s;
}

/// Half-width of `box` along unit direction n.
inline double support_extent(const OrientedBox3& box, const Vec3& n)
{
    double e = 0.0;
    for (int i = 0; i < 3; ++i) e += std::abs(n.dot(box.axis(i))) * box.half_extents[i];
    return e;
}

/// Height of the surface `obj` rests on: its support's top, or its own bottom.
inline double resting_height(const Scene& scene, const ObjectInstance& obj, const SupportParams& sp)
{
    if (const auto sup = supporting_object(scene, obj, sp)) return scene.get(*sup).box.aabb().max.y();
    return obj.box.aabb().min.y();
}

inline double footprint_area(const OrientedBox3& b)
{
    const Aabb3 a = b.aabb();
    return (a.max.x() - a.min.x()) * (a.max.z() - a.min.z());
}

inline bool in_frame(const CameraModel& cam, const Vec3& p)
{
    const auto pr = cam.try_project(p);
    return pr && cam.pixel_of(pr->u, pr->v).has_value();
}

struct Destination {
    DestinationRegion region;
    double platform_y = 0.0;
};

inline Destination destination(const Scene& scene, const TaskSpec& t, const ObjectInstance& src,
                               const DirectionFrame& frame, const PipelineConfig& cfg)
{
    Destination d;
    d.region.axis_u = frame.right;
    d.region.axis_v = frame.behind;
    switch (t.method) {
    case Method::PlaceRelative:
    case Method::BypassPlace: {
        if (!is_horizontal(*t.direction)) throw InvalidInput("placement directions must be horizontal");
        const auto& ref = scene.get(*t.reference_id);
        const Vec3 n = frame.normal(*t.direction);
        d.region.centroid = ref.box.center + (support_extent(ref.box, n) + support_extent(src.box, n) + cfg.placement_gap) * n;
        d.region.max_radius = cfg.region_radius;
        d.platform_y = resting_height(scene, ref, cfg.support);
        break;
    }
    case Method::DirectionalMove: {
        if (!is_horizontal(*t.direction)) throw InvalidInput("move directions must be horizontal");
        const double dist = t.distance.value_or(cfg.default_move_distance);
        if (!(dist > 0.0)) throw InvalidInput("move distance must be positive");
        d.region.centroid = src.box.center + dist * frame.normal(*t.direction);
        d.region.max_radius = cfg.move_region_radius;
        d.platform_y = resting_height(scene, src, cfg.support);
        break;
    }
    case Method::Stacking:
    case Method::BypassStack: {
        const auto& ref = scene.get(*t.reference_id);
        d.region.centroid = ref.box.center;
        d.region.max_radius = std::min({cfg.region_radius, ref.box.half_extents.x(), ref.box.half_extents.z()});
        d.platform_y = ref.box.aabb().max.y();
        break;
    }
    }
    return d;
}

/// RDP keypoints of `path`; any keypoint segment that collides is split at its
/// farthest intermediate point until the polyline is free. Fails when a
/// colliding segment has no intermediate point or the count exceeds `max_points`.
template <class SegCollides>
std::optional<Path> repair_keypoints(const Path& path, double epsilon, std::size_t max_points, const SegCollides& collides)
{
    if (path.size() < 2) return std::nullopt;
    std::vector<std::size_t> idx = simplify_rdp(path, epsilon, max_points).indices;
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
            const std::size_t a = idx[k], b = idx[k + 1];
            if (!collides(path[a], path[b])) continue;
            if (b <= a + 1 || idx.size() >= max_points) return std::nullopt;
            std::size_t far = a + 1;
            double worst = -1.0;
            for (std::size_t i = a + 1; i < b; ++i) {
                const double d = point_segment_distance(path[i], path[a], path[b]);
                if (d > worst) {
                    worst = d;
                    far = i;
                }
            }
            idx.insert(idx.begin() + static_cast<long>(k) + 1, far);
            changed = true;
            break;
        }
    }
    Path out;
    for (auto i : idx) out.push_back(path[i]);
    return out;
}

inline json key_steps_json(const Scene& scene, const ObjectInstance& src, const ObjectInstance* ref)
{
    json entries = json::array();
    const auto referring = [&](const ObjectInstance& o) {
        const auto pr = scene.camera.try_project(o.box.center);
        if (!pr) return;
        entries.push_back({{"type", "referring"},
                           {"object", strip_article(o.phrase())},
                           {"value", {pr->u, pr->v, pr->z}}});
    };
    referring(src);
    if (ref) referring(*ref);
    entries.push_back({{"type", "measuring"}, {"object", strip_article(src.phrase())}, {"value", object_height(src.box)}});
    return {{"image_width", scene.camera.width},
            {"image_height", scene.camera.height},
            {"scene_max_depth", scene.depth.max_valid()},
            {"entries", entries}};
}

inline json qc_json(const QcVerdict& v)
{
    return {{"verdict", qc_reason_name(v.reason)},
            {"occlusion", v.occlusion},
            {"displacement", v.displacement},
            {"min_length", v.min_length}};
}

}  // namespace detail

/// Per-scene state shared by all tasks.
struct SceneContext {
    const Scene* scene = nullptr;
    RoleAssignment roles;
    DirectionFrame frame;
};

inline SceneContext make_scene_context(const Scene& scene, const PipelineConfig& cfg)
{
    return {&scene, assign_roles(scene, cfg.support), DirectionFrame::from_camera(scene.camera)};
}

/// Bench sample built from an accepted trace against its own scene.
inline BenchSample self_sample(const Scene& scene, const ObjectInstance& src, const Trace& trace, const OrientedBox3& end_box)
{
    BenchSample s;
    s.id = src.id;
    s.scene = scene;
    s.start_mask = *src.mask;
    s.end_box = end_box;
    s.reference_trace = trace;
    s.step_count = static_cast<int>(trace.size());
    s.source_box = src.box;
    return s;
}

/// One task, end to end. Never throws; failures become rejection records.
inline TaskOutcome run_task(const SceneContext& ctx, const TaskSpec& task, std::size_t index, std::uint64_t seed,
                            const PipelineConfig& cfg)
{
    const Scene& scene = *ctx.scene;
    TaskOutcome out;
    out.index = index;
    out.task = task;
    const std::string task_id = strformat("task_%04zu", index);
    const auto reject = [&](const std::string& reason, const std::string& detail = "") {
        out.accepted = false;
        out.reason = reason;
        out.detail = detail;
        out.lines = {{{"type", "rejection"}, {"task_id", task_id}, {"task", task_to_json(task)}, {"reason", reason}}};
        if (!detail.empty()) out.lines.front()["detail"] = detail;
        return out;
    };

    try {
        Rng rng = Rng::derive(seed, index);
        task.validate(scene);
        const auto& src = scene.get(task.source_id);
        if (is_blocklisted(src.category)) return reject("blocklist");
        if (!src.mask || src.mask->empty()) return reject("no-mask", "source has no visible mask");
        const ObjectInstance* ref = task.reference_id ? &scene.get(*task.reference_id) : nullptr;

        CollisionWorld world(scene.objects, {src.id});
        const auto dest = detail::destination(scene, task, src, ctx.frame, cfg);
        const auto collides = [&](const Vec3& p) { return world.collides(src.box, p) || !detail::in_frame(scene.camera, p); };
        const auto goal = sample_endpoint(dest.region, dest.platform_y, object_height(src.box), collides, cfg.endpoint);
        if (!goal) return reject("no-endpoint");

        const Vec3 start = src.box.center;
        EscapeResult esc;
        try {
            esc = escape_start(start, src.box, world, &scene.depth, &scene.camera, cfg.escape);
        } catch (const EscapeFailed& e) {
            return reject("escape-failed", e.what());
        }

        PlannerParams pp = cfg.planner;
        pp.rng_seed = rng.next();
        PlanResult plan;
        std::optional<Vec3> via_point;
        std::optional<Direction> via_dir;
        if (is_bypass(task.method)) {
            const auto& via = scene.get(*task.via_id);
            auto cands = via_candidates(via, src, ctx.frame, world, cfg.via_margin);
            std::vector<PlanResult> realized(cands.size());
            if (cfg.score_realized) {
                for (std::size_t i = 0; i < cands.size(); ++i) {
                    if (!cands[i].feasible) continue;
                    PlannerParams pi = pp;
                    pi.rng_seed = Rng::derive(pp.rng_seed, i).next();
                    realized[i] = plan_with_bypass(esc.free_point, cands[i].via_point, *goal, src.box, world, pi);
                    cands[i].feasible = realized[i].ok();
                    if (cands[i].feasible) cands[i].cost_J = score_path(realized[i].path, *goal, cfg.cost_weights);
                }
            } else {
                score_candidates_proxy(cands, esc.free_point, *goal, cfg.cost_weights);
            }
            const auto pick = select_candidate(cands);
            if (!pick) return reject("no-via-candidate");
            via_point = cands[*pick].via_point;
            via_dir = cands[*pick].direction;
            plan = cfg.score_realized ? realized[*pick]
                                      : plan_with_bypass(esc.free_point, *via_point, *goal, src.box, world, pp);
        } else {
            plan = rrt_star(esc.free_point, *goal, src.box, world, pp);
        }
        if (!plan.ok()) return reject("plan-failed", plan_failure_name(plan.failure));

        Path full = esc.segment.empty() ? Path{start} : esc.segment;
        for (const auto& p : plan.path)
            if ((p - full.back()).norm() > 1e-12) full.push_back(p);

        // Keypoints must stay collision-free as a polyline; obstacles already
        // touched at the start pose are ignored. The smoothed curve is tried
        // first, then the raw planner path.
        const Path dense = smooth_catmull_rom(full, via_point, cfg.smooth);
        std::set<std::string> touching{src.id};
        for (const auto& id : world.hits(src.box, start)) touching.insert(id);
        const CollisionWorld key_world(scene.objects, touching);
        const auto seg_collides = [&](const Vec3& a, const Vec3& b) {
            return key_world.segment_collides(src.box, a, b, cfg.planner.sweep_step);
        };
        std::optional<Path> keypoints = detail::repair_keypoints(dense, cfg.rdp_epsilon, cfg.max_keypoints, seg_collides);
        if (!keypoints) keypoints = detail::repair_keypoints(full, cfg.rdp_epsilon, cfg.max_keypoints, seg_collides);
        if (!keypoints) return reject("keypoints-collide");

        Trace trace = Trace::from_world(*keypoints, scene.camera, TraceFrame::ObjectCentric);
        trace.via_point = via_point;
        try {
            trace = ground_endpoint(trace, scene.depth, scene.camera, cfg.ground).trace;
        } catch (const FinalPointOutOfFrame& e) {
            return reject("out-of-frame", e.what());
        }
        trace = align_start(trace, *src.mask, scene.camera);

        const QcVerdict qc = run_qc(trace, trace.world_points, scene, src, cfg.qc);
        if (!qc.accepted()) return reject(qc_reason_name(qc.reason));

        const OrientedBox3 end_box = src.box.at(*goal);
        if (cfg.self_check) {
            const BenchSample s = self_sample(scene, src, trace, end_box);
            const SampleResult r = evaluate_sample(trace, s, cfg.bench);
            if (!r.overall) return reject("self-check", strformat("sweep %.3f", r.sweep_max_fraction));
        }

        TemplateValues tv;
        tv.source_obj = detail::strip_article(src.phrase());
        if (ref) tv.reference_obj = detail::strip_article(ref->phrase());
        if (task.direction) tv.endpoint_direction = direction_label(*task.direction);
        if (task.via_id) tv.via_obj = detail::strip_article(scene.get(*task.via_id).phrase());
        if (via_dir) tv.via_direction = direction_label(*via_dir);
        if (task.method == Method::DirectionalMove) {
            Vec3 off = *goal - start;
            off -= off.dot(up_vector()) * up_vector();
            tv.distance = off.norm();
        } else if (task.method == Method::PlaceRelative) {
            tv.distance = (*goal - ref->box.center).dot(ctx.frame.normal(*task.direction));
        }
        const auto instr = render_instruction(task.method, tv, rng, cfg.metric_probability);

        json discovered = json::array();
        std::optional<std::string> enriched;
        if (!is_bypass(task.method)) {
            std::set<std::string> exclude{src.id};
            if (ref) exclude.insert(ref->id);
            std::vector<ObjectInstance> pool;
            for (const auto& id : ctx.roles.vias)
                if (!exclude.count(id)) pool.push_back(scene.get(id));
            const auto vias = discover_vias(trace.world_points, pool, exclude, ctx.frame, cfg.discover);
            for (const auto& v : vias)
                discovered.push_back({{"id", v.id}, {"direction", direction_label(v.direction)}, {"surface_distance", v.surface_distance}});
            if (!vias.empty()) {
                TemplateValues ev = tv;
                ev.via_obj = detail::strip_article(scene.get(vias.front().id).phrase());
                ev.via_direction = direction_label(vias.front().direction);
                enriched = render_enrichment(task.method, ev, rng);
            }
        }
        const std::string qa_instruction = enriched.value_or(instr.text);

        json rec = {{"type", "trace"},
                    {"task_id", task_id},
                    {"task", task_to_json(task)},
                    {"source_id", src.id},
                    {"instruction", instr.text},
                    {"metric_instruction", instr.metric},
                    {"frame", trace_frame_name(trace.frame)},
                    {"end_box", box_to_json(end_box)},
                    {"points", trace_points_json(trace)},
                    {"via_point", via_point ? io_detail::to_json(*via_point) : json(nullptr)},
                    {"discovered_vias", discovered},
                    {"escape", esc.mode == EscapeMode::None ? "none" : esc.mode == EscapeMode::Visual ? "visual" : "geometric"},
                    {"qc", detail::qc_json(qc)},
                    {"key_steps", detail::key_steps_json(scene, src, ref)}};
        if (enriched) rec["enriched_instruction"] = *enriched;
        out.lines.push_back(rec);
        for (QaKind k : {QaKind::TwoD, QaKind::ThreeD, QaKind::Lift}) {
            const QaPair qa = format_trace_qa(trace, k, qa_instruction, scene.camera, rng);
            out.lines.push_back({{"type", "qa"}, {"task_id", task_id}, {"kind", qa_kind_name(k)}, {"prompt", qa.prompt}, {"answer", qa.answer}});
        }
        out.accepted = true;
        out.trace = std::move(trace);
        out.end_box = end_box;
        return out;
    } catch (const std::exception& e) {
        return reject("error", e.what());
    }
}

/// Round-robin over methods of candidate tasks built from the scene's roles,
/// capped at `cfg.auto_max_tasks`.
inline std::vector<TaskSpec> synthesize_tasks(const SceneContext& ctx, std::uint64_t seed, const PipelineConfig& cfg)
{
    const Scene& scene = *ctx.scene;
    std::vector<std::string> sources;
    for (const auto& id : ctx.roles.sources)
        if (const auto& o = scene.get(id); o.mask && !o.mask->empty()) sources.push_back(id);
    if (sources.empty() || cfg.auto_max_tasks <= 0) return {};

    Rng rng = Rng::derive(seed, 0xA070ULL);
    constexpr std::array<Direction, 4> horizontal{Direction::Left, Direction::Right, Direction::Front, Direction::Behind};
    const auto pick_dir = [&] { return horizontal[rng.index(horizontal.size())]; };
    const auto stackable = [&](const std::string& s, const std::string& r) {
        return detail::footprint_area(scene.get(r).box) >= detail::footprint_area(scene.get(s).box);
    };

    std::array<std::vector<TaskSpec>, 5> lists;
    for (const auto& s : sources) {
        TaskSpec m2{Method::DirectionalMove, s, std::nullopt, std::nullopt, pick_dir(), cfg.default_move_distance};
        lists[1].push_back(m2);
        for (const auto& r : ctx.roles.references) {
            if (r == s) continue;
            lists[0].push_back({Method::PlaceRelative, s, r, std::nullopt, pick_dir(), std::nullopt});
            if (stackable(s, r)) lists[2].push_back({Method::Stacking, s, r, std::nullopt, std::nullopt, std::nullopt});
            for (const auto& v : ctx.roles.vias) {
                if (v == s || v == r) continue;
                lists[3].push_back({Method::BypassPlace, s, r, v, pick_dir(), std::nullopt});
                if (stackable(s, r)) lists[4].push_back({Method::BypassStack, s, r, v, std::nullopt, std::nullopt});
            }
        }
    }
    for (auto& l : lists) rng.shuffle(l);

    std::vector<TaskSpec> out;
    std::array<std::size_t, 5> next{};
    bool progress = true;
    while (progress && static_cast<int>(out.size()) < cfg.auto_max_tasks) {
        progress = false;
        for (std::size_t m = 0; m < lists.size() && static_cast<int>(out.size()) < cfg.auto_max_tasks; ++m) {
            if (next[m] >= lists[m].size()) continue;
            out.push_back(lists[m][next[m]++]);
            progress = true;
        }
    }
    return out;
}

/// Run `tasks` on `workers` threads; outcomes are kept in task order.
inline GenerateResult generate(const Scene& scene, const std::vector<TaskSpec>& tasks, std::uint64_t seed,
                               const PipelineConfig& cfg, int workers = 1)
{
    const SceneContext ctx = make_scene_context(scene, cfg);
    GenerateResult res;
    res.outcomes.resize(tasks.size());
    std::atomic<std::size_t> next{0};
    const auto work = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) res.outcomes[i] = run_task(ctx, tasks[i], i, seed, cfg);
    };
    const int n = std::max(1, std::min<int>(workers, static_cast<int>(tasks.size())));
    std::vector<std::thread> pool;
    for (int k = 1; k < n; ++k) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    return res;
}

inline GenerateResult generate_auto(const Scene& scene, std::uint64_t seed, const PipelineConfig& cfg, int workers = 1)
{
    const SceneContext ctx = make_scene_context(scene, cfg);
    return generate(scene, synthesize_tasks(ctx, seed, cfg), seed, cfg, workers);
}

}  // namespace tracespatial
