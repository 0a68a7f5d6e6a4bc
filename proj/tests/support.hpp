#pragma once

#include "tracespatial/tracespatial.hpp"

#include <deque>
#include <functional>

namespace testsupport {

using namespace tracespatial;

inline CameraModel simple_camera(int w = 100, int h = 100, double f = 100.0)
{
    CameraModel c;
    c.fx = c.fy = f;
    c.cx = w / 2.0;
    c.cy = h / 2.0;
    c.width = w;
    c.height = h;
    return c;
}

inline OrientedBox3 box(const Vec3& c, const Vec3& h, const Mat3& r = Mat3::Identity()) { return {c, h, r}; }

inline ObjectInstance object(const std::string& id, const OrientedBox3& b, bool hq = true, bool movable = true,
                             const std::string& category = "cup")
{
    ObjectInstance o;
    o.id = id;
    o.category = category;
    o.dense_caption = "the " + category;
    o.box = b;
    o.is_high_quality = hq;
    o.movable = movable;
    return o;
}

inline Mat3 random_rotation(Rng& rng)
{
    Eigen::Quaterniond q(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (q.norm() < 1e-6) q = Eigen::Quaterniond::Identity();
    return q.normalized().toRotationMatrix();
}

/// Point-sampling overlap oracle: an n^3 lattice over the intersection of the
/// two AABBs; overlap iff some lattice point lies in both boxes.
/// n^3 cell-centred lattice test for a common point. The lattice spans a
/// region narrowed by alternately clipping each box's local extents with the
/// bounding box (in that frame) of the other side's current region.
inline bool sampled_overlap(const OrientedBox3& a, const OrientedBox3& b, int n = 50)
{
    struct Region {
        const OrientedBox3* frame;
        Vec3 lo, hi;
        OrientedBox3 as_box() const
        {
            OrientedBox3 r;
            r.rotation = frame->rotation;
            r.center = frame->center + frame->rotation * (0.5 * (lo + hi));
            r.half_extents = 0.5 * (hi - lo);
            return r;
        }
        bool empty() const { return (lo.array() > hi.array()).any(); }
    };
    const auto clip = [](Region r, const OrientedBox3& other) {
        Vec3 olo = Vec3::Constant(1e300), ohi = Vec3::Constant(-1e300);
        for (const auto& c : other.corners()) {
            const Vec3 q = r.frame->rotation.transpose() * (c - r.frame->center);
            olo = olo.cwiseMin(q);
            ohi = ohi.cwiseMax(q);
        }
        r.lo = r.lo.cwiseMax(olo);
        r.hi = r.hi.cwiseMin(ohi);
        return r;
    };
    Region ra{&a, -a.half_extents, a.half_extents}, rb{&b, -b.half_extents, b.half_extents};
    for (int it = 0; it < 8; ++it) {
        ra = clip(ra, rb.as_box());
        if (ra.empty()) return false;
        rb = clip(rb, ra.as_box());
        if (rb.empty()) return false;
    }
    // World-aligned candidate: bounding box of both narrowed regions' overlap.
    const OrientedBox3 world_frame = box(Vec3::Zero(), Vec3::Ones());
    const Aabb3 wa = ra.as_box().aabb(), wb = rb.as_box().aabb();
    const Region rw{&world_frame, wa.min.cwiseMax(wb.min), wa.max.cwiseMin(wb.max)};
    if (rw.empty()) return false;
    const Region* best = &ra;
    for (const Region* r : std::array<const Region*, 2>{&rb, &rw})
        if ((r->hi - r->lo).prod() < (best->hi - best->lo).prod()) best = r;
    const Vec3 step = (best->hi - best->lo) / n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const Vec3 q = best->lo + Vec3((i + 0.5) * step.x(), (j + 0.5) * step.y(), (k + 0.5) * step.z());
                const Vec3 p = best->frame->center + best->frame->rotation * q;
                if (a.contains(p) && b.contains(p)) return true;
            }
    return false;
}

/// Smallest projected overlap over the 15 candidate axes; for intersecting
/// boxes this is the penetration depth, for separated ones it is negative.
inline double min_axis_overlap(const OrientedBox3& a, const OrientedBox3& b)
{
    std::vector<Vec3> axes;
    for (int i = 0; i < 3; ++i) axes.push_back(a.axis(i));
    for (int i = 0; i < 3; ++i) axes.push_back(b.axis(i));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const Vec3 c = a.axis(i).cross(b.axis(j));
            if (c.norm() > 1e-8) axes.push_back(c.normalized());
        }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& ax : axes) {
        double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
        for (const auto& p : a.corners()) {
            amin = std::min(amin, p.dot(ax));
            amax = std::max(amax, p.dot(ax));
        }
        for (const auto& p : b.corners()) {
            bmin = std::min(bmin, p.dot(ax));
            bmax = std::max(bmax, p.dot(ax));
        }
        best = std::min(best, std::min(amax, bmax) - std::max(amin, bmin));
    }
    return best;
}

/// Free-space BFS on a grid of `res`: a cell is free when the moving box
/// centred there misses every obstacle. Feasible when start and goal cells
/// connect through 6-neighbours inside `bounds`.
inline bool bfs_feasible(const Vec3& start, const Vec3& goal, const OrientedBox3& moving, const CollisionWorld& world,
                         const Aabb3& bounds, double res = 0.05)
{
    const Vec3 span = bounds.max - bounds.min;
    const std::array<int, 3> dims{static_cast<int>(std::floor(span.x() / res)) + 1,
                                  static_cast<int>(std::floor(span.y() / res)) + 1,
                                  static_cast<int>(std::floor(span.z() / res)) + 1};
    const auto center = [&](int i, int j, int k) -> Vec3 { return bounds.min + res * Vec3(i, j, k); };
    const auto cell = [&](const Vec3& p) {
        return std::array<int, 3>{static_cast<int>(std::lround((p.x() - bounds.min.x()) / res)),
                                  static_cast<int>(std::lround((p.y() - bounds.min.y()) / res)),
                                  static_cast<int>(std::lround((p.z() - bounds.min.z()) / res))};
    };
    const auto lin = [&](int i, int j, int k) { return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i; };
    std::vector<signed char> state(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], -1);  // -1 unknown, 0 blocked, 1 free
    const auto is_free = [&](int i, int j, int k) {
        auto& s = state[lin(i, j, k)];
        if (s < 0) s = world.collides(moving, center(i, j, k)) ? 0 : 1;
        return s == 1;
    };
    if (world.collides(moving, start) || world.collides(moving, goal)) return false;
    const auto s = cell(start), g = cell(goal);
    for (int a = 0; a < 3; ++a)
        if (s[a] < 0 || s[a] >= dims[a] || g[a] < 0 || g[a] >= dims[a]) return false;
    if (!is_free(s[0], s[1], s[2]) || !is_free(g[0], g[1], g[2])) return false;
    std::vector<char> seen(state.size(), 0);
    std::deque<std::array<int, 3>> q{s};
    seen[lin(s[0], s[1], s[2])] = 1;
    const int d[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    while (!q.empty()) {
        const auto c = q.front();
        q.pop_front();
        if (c == g) return true;
        for (const auto& dd : d) {
            const int i = c[0] + dd[0], j = c[1] + dd[1], k = c[2] + dd[2];
            if (i < 0 || j < 0 || k < 0 || i >= dims[0] || j >= dims[1] || k >= dims[2]) continue;
            if (seen[lin(i, j, k)] || !is_free(i, j, k)) continue;
            seen[lin(i, j, k)] = 1;
            q.push_back({i, j, k});
        }
    }
    return false;
}

/// Brute-force DTW over every monotone warping path (small inputs only):
/// minimum total cost, then the shortest path among the minimisers.
inline std::pair<double, std::size_t> brute_dtw(const Path& a, const Path& b)
{
    double best_cost = std::numeric_limits<double>::infinity();
    std::size_t best_len = 0;
    std::function<void(std::size_t, std::size_t, double, std::size_t)> walk = [&](std::size_t i, std::size_t j, double cost,
                                                                                   std::size_t len) {
        cost += (a[i] - b[j]).norm();
        ++len;
        if (i + 1 == a.size() && j + 1 == b.size()) {
            if (cost < best_cost - 1e-12 || (std::abs(cost - best_cost) <= 1e-12 && len < best_len)) {
                best_cost = cost;
                best_len = len;
            }
            return;
        }
        if (i + 1 < a.size()) walk(i + 1, j, cost, len);
        if (j + 1 < b.size()) walk(i, j + 1, cost, len);
        if (i + 1 < a.size() && j + 1 < b.size()) walk(i + 1, j + 1, cost, len);
    };
    walk(0, 0, 0.0, 0);
    return {best_cost, best_len};
}

/// Depth of an infinite plane n.p = c seen by `cam` (0 where the ray misses).
inline DepthMap plane_depth(const CameraModel& cam, const Vec3& n, double c)
{
    DepthMap d(cam.width, cam.height, 0.0);
    const Vec3 o = cam.position();
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            const Vec3 dir = cam.backproject(x, y, 1.0) - o;  // camera depth 1 along this ray
            const double denom = n.dot(dir);
            if (std::abs(denom) < 1e-12) continue;
            const double t = (c - n.dot(o)) / denom;
            if (t > 0) d.at(x, y) = t;
        }
    return d;
}

inline RleMask rect_mask(int w, int h, int x0, int y0, int x1, int y1)
{
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h, 0);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) bits[static_cast<std::size_t>(y) * w + x] = 1;
    return RleMask::encode(h, w, bits);
}

/// Bench sample built by hand from a synthetic tabletop: the first movable
/// object with a mask is lifted, carried to a free spot on the table and set
/// down 1 cm above it. Returns nullopt when no free spot is found.
inline std::optional<BenchSample> make_bench_sample(std::uint64_t seed)
{
    Scene scene = make_tabletop(seed);
    const ObjectInstance* src = nullptr;
    for (const auto& o : scene.objects)
        if (o.movable && o.mask && o.mask->area() > 50) {
            src = &o;
            break;
        }
    if (!src) return std::nullopt;
    const CollisionWorld world(scene.objects, {src->id});
    const double rest = 0.739 + src->box.half_extents.y() + 0.01;
    const Vec3 c = src->box.center, lift(0, 0.15, 0);
    Rng rng(seed ^ 0xBE7C);
    for (int attempt = 0; attempt < 400; ++attempt) {
        const Vec3 g(rng.uniform(-0.5, 0.5), rest, rng.uniform(0.6, 1.2));
        if ((g - c).norm() < 0.45) continue;
        const Path path{c, c + lift, g + lift, g};
        bool ok = !world.path_collides(src->box, path, 0.01);
        for (const auto& q : path) ok = ok && scene.camera.try_project(q) &&
                                        scene.camera.pixel_of(scene.camera.project(q).u, scene.camera.project(q).v);
        if (!ok) continue;
        BenchSample s;
        s.id = strformat("fixture_%llu", static_cast<unsigned long long>(seed));
        s.start_mask = *src->mask;
        s.end_box = src->box.at(g);
        s.source_box = src->box;
        s.reference_trace = align_start(Trace::from_world(path, scene.camera), *src->mask, scene.camera);
        s.prompt = "Move " + src->dense_caption + " to the new spot.";
        s.step_count = static_cast<int>(path.size());
        s.scene = std::move(scene);
        return s;
    }
    return std::nullopt;
}

}  // namespace testsupport
