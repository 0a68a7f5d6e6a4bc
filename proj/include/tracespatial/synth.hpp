#pragma once

#include "tracespatial/collide.hpp"
#include "tracespatial/geometry.hpp"
#include "tracespatial/mask.hpp"
#include "tracespatial/rng.hpp"
#include "tracespatial/scene.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace tracespatial {

/// Camera at `eye` looking at `target`, world up = +y.
inline CameraModel look_at_camera(const Vec3& eye, const Vec3& target, int width, int height, double focal)
{
    const Vec3 z = (target - eye).normalized();
    const Vec3 y = (-up_vector() - (-up_vector()).dot(z) * z).normalized();  // image down
    const Vec3 x = y.cross(z);
    CameraModel cam;
    cam.fx = cam.fy = focal;
    cam.width = width;
    cam.height = height;
    cam.cx = 0.5 * (width - 1);
    cam.cy = 0.5 * (height - 1);
    cam.rotation.row(0) = x.transpose();
    cam.rotation.row(1) = y.transpose();
    cam.rotation.row(2) = z.transpose();
    cam.translation = -(cam.rotation * eye);
    return cam;
}

/// Entry parameter of a ray against a box, or nullopt on a miss.
inline std::optional<double> ray_box(const Vec3& origin, const Vec3& dir, const OrientedBox3& box)
{
    const Vec3 o = box.rotation.transpose() * (origin - box.center);
    const Vec3 d = box.rotation.transpose() * dir;
    double t0 = -std::numeric_limits<double>::infinity(), t1 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        if (std::abs(d[i]) < 1e-15) {
            if (std::abs(o[i]) > box.half_extents[i]) return std::nullopt;
            continue;
        }
        double a = (-box.half_extents[i] - o[i]) / d[i];
        double b = (box.half_extents[i] - o[i]) / d[i];
        if (a > b) std::swap(a, b);
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
        if (t0 > t1) return std::nullopt;
    }
    if (t1 <= 0.0) return std::nullopt;
    return std::max(t0, 0.0);
}

struct Render {
    DepthMap depth;
    std::vector<int> owner;  // index into the box list, -1 for background
};

/// Ray-cast depth (camera z) and per-pixel owner of the nearest box.
inline Render render_boxes(const CameraModel& cam, const std::vector<OrientedBox3>& boxes)
{
    Render r{DepthMap(cam.width, cam.height, 0.0), std::vector<int>(static_cast<std::size_t>(cam.width) * cam.height, -1)};
    const Vec3 eye = cam.position();
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            // Unit camera-z direction: the ray parameter equals camera depth.
            const Vec3 dir = cam.rotation.transpose() * Vec3((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
            double best = std::numeric_limits<double>::infinity();
            int who = -1;
            for (std::size_t i = 0; i < boxes.size(); ++i) {
                const auto t = ray_box(eye, dir, boxes[i]);
                if (t && *t > 1e-6 && *t < best) {
                    best = *t;
                    who = static_cast<int>(i);
                }
            }
            if (who >= 0) {
                r.depth.at(x, y) = best;
                r.owner[static_cast<std::size_t>(y) * cam.width + x] = who;
            }
        }
    return r;
}

inline RleMask owner_mask(const Render& r, int index)
{
    std::vector<std::uint8_t> bits(r.owner.size());
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = r.owner[i] == index;
    return RleMask::encode(r.depth.height, r.depth.width, bits);
}

/// Render the scene's boxes into depth and attach visible masks.
inline void render_scene(Scene& scene)
{
    std::vector<OrientedBox3> boxes;
    for (const auto& o : scene.objects) boxes.push_back(o.box);
    const Render r = render_boxes(scene.camera, boxes);
    scene.depth = r.depth;
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        RleMask m = owner_mask(r, static_cast<int>(i));
        if (m.area() > 0)
            scene.objects[i].mask = std::move(m);
        else
            scene.objects[i].mask.reset();
    }
}

struct TabletopParams {
    int width = 320;
    int height = 240;
    double focal = 300.0;
    int min_objects = 3;
    int max_objects = 5;
    int min_platforms = 1;
    int max_platforms = 1;
    double table_top = 0.739;  // kept off the 0.02 voxel lattice
    double clearance = 0.002;  // gap between resting objects and their support
    Vec3 table_center{0.0, 0.0, 0.9};
    Vec3 table_half{0.6, 0.02, 0.4};
};

namespace detail {

inline const std::array<const char*, 8> kColors{"red", "blue", "green", "yellow", "white", "black", "orange", "purple"};
inline const std::array<const char*, 6> kSmall{"cup", "bottle", "can", "mug", "vase", "jar"};
inline const std::array<const char*, 3> kFlat{"tray", "book", "plate"};

inline OrientedBox3 upright_box(const Vec3& center, const Vec3& half, double yaw)
{
    OrientedBox3 b;
    b.center = center;
    b.half_extents = half;
    b.rotation = rot_y(yaw);
    return b;
}

}  // namespace detail

/// Floor, table and a handful of upright objects resting on the table,
/// rendered from a look-at camera. Flat "platform" objects come first and can
/// serve as stacking references; the rest are taller movable items.
inline Scene make_tabletop(std::uint64_t seed, const TabletopParams& p = {})
{
    Rng rng(seed);
    Scene s;
    const double top = p.table_top;
    s.camera = look_at_camera(Vec3(0.0, 1.35, 0.0), Vec3(p.table_center.x(), top, p.table_center.z()), p.width, p.height,
                              p.focal);

    ObjectInstance floor;
    floor.id = "floor";
    floor.category = "floor";
    floor.box = detail::upright_box(Vec3(0, -0.01, 1.0), Vec3(2.0, 0.01, 2.0), 0.0);
    s.objects.push_back(floor);

    ObjectInstance table;
    table.id = "table";
    table.category = "table";
    table.dense_caption = "the wooden table";
    table.is_high_quality = true;
    table.box = detail::upright_box(Vec3(p.table_center.x(), top - p.table_half.y(), p.table_center.z()), p.table_half, 0.0);
    s.objects.push_back(table);

    struct Disc {
        double x, z, r;
    };
    std::vector<Disc> placed;
    const auto place = [&](double radius) -> std::optional<Vec3> {
        for (int attempt = 0; attempt < 200; ++attempt) {
            const double x = rng.uniform(p.table_center.x() - p.table_half.x() + radius + 0.05,
                                         p.table_center.x() + p.table_half.x() - radius - 0.05);
            const double z = rng.uniform(p.table_center.z() - p.table_half.z() + radius + 0.05,
                                         p.table_center.z() + p.table_half.z() - radius - 0.05);
            bool ok = true;
            for (const auto& d : placed)
                if (std::hypot(d.x - x, d.z - z) < d.r + radius + 0.08) ok = false;
            if (ok) {
                placed.push_back({x, z, radius});
                return Vec3(x, 0.0, z);
            }
        }
        return std::nullopt;
    };

    int counter = 0;
    const int platforms = p.min_platforms + static_cast<int>(rng.index(static_cast<std::size_t>(p.max_platforms - p.min_platforms + 1)));
    for (int k = 0; k < platforms; ++k) {
        const Vec3 half(rng.uniform(0.08, 0.11), rng.uniform(0.02, 0.03), rng.uniform(0.08, 0.11));
        const auto at = place(std::hypot(half.x(), half.z()));
        if (!at) continue;
        ObjectInstance o;
        o.id = strformat("obj_%d", counter++);
        o.category = detail::kFlat[rng.index(detail::kFlat.size())];
        const std::string color = detail::kColors[rng.index(detail::kColors.size())];
        o.dense_caption = "the " + color + " " + o.category;
        o.is_high_quality = true;
        o.movable = false;
        o.box = detail::upright_box(Vec3(at->x(), top + p.clearance + half.y(), at->z()), half, rng.uniform(-0.4, 0.4));
        s.objects.push_back(o);
    }
    const int items = p.min_objects + static_cast<int>(rng.index(static_cast<std::size_t>(p.max_objects - p.min_objects + 1)));
    for (int k = 0; k < items; ++k) {
        const Vec3 half(rng.uniform(0.03, 0.05), rng.uniform(0.05, 0.08), rng.uniform(0.03, 0.05));
        const auto at = place(std::hypot(half.x(), half.z()));
        if (!at) continue;
        ObjectInstance o;
        o.id = strformat("obj_%d", counter++);
        o.category = detail::kSmall[rng.index(detail::kSmall.size())];
        const std::string color = detail::kColors[rng.index(detail::kColors.size())];
        o.dense_caption = "the " + color + " " + o.category;
        o.is_high_quality = true;
        o.movable = true;
        o.box = detail::upright_box(Vec3(at->x(), top + p.clearance + half.y(), at->z()), half, rng.uniform(-0.8, 0.8));
        s.objects.push_back(o);
    }
    render_scene(s);
    return s;
}

/// A translation query for the planner with its obstacles.
struct PlannerCase {
    std::vector<ObjectInstance> obstacles;
    OrientedBox3 moving;
    Vec3 start = Vec3::Zero();
    Vec3 goal = Vec3::Zero();
};

inline ObjectInstance obstacle(const std::string& id, const Vec3& center, const Vec3& half, double yaw = 0.0)
{
    ObjectInstance o;
    o.id = id;
    o.category = "obstacle";
    o.box = detail::upright_box(center, half, yaw);
    return o;
}

/// Wall across x = 0 spanning the planner bounds, with one rectangular gap.
/// `gap` is the opening width in both y and z.
inline PlannerCase make_wall_gap_case(std::uint64_t seed, double gap)
{
    Rng rng(seed);
    PlannerCase c;
    c.moving = detail::upright_box(Vec3::Zero(), Vec3(0.05, 0.05, 0.05), 0.0);
    c.start = Vec3(-0.6, 0.3, 0.0);
    c.goal = Vec3(0.6, 0.3, 0.0);
    // Planner bounds: y in [-0.1, 0.7], z in [-0.4, 0.4]. Wall overshoots them.
    const double gy = rng.uniform(-0.05 + gap / 2, 0.65 - gap / 2);
    const double gz = rng.uniform(-0.35 + gap / 2, 0.35 - gap / 2);
    const double ylo = -0.3, yhi = 0.9, zlo = -0.6, zhi = 0.6, t = 0.02;
    const auto slab = [&](const std::string& id, double y0, double y1, double z0, double z1) {
        if (y1 - y0 <= 1e-6 || z1 - z0 <= 1e-6) return;
        c.obstacles.push_back(obstacle(id, Vec3(0.0, 0.5 * (y0 + y1), 0.5 * (z0 + z1)),
                                       Vec3(t, 0.5 * (y1 - y0), 0.5 * (z1 - z0))));
    };
    slab("wall_below", ylo, gy - gap / 2, zlo, zhi);
    slab("wall_above", gy + gap / 2, yhi, zlo, zhi);
    slab("wall_left", gy - gap / 2, gy + gap / 2, zlo, gz - gap / 2);
    slab("wall_right", gy - gap / 2, gy + gap / 2, gz + gap / 2, zhi);
    return c;
}

/// Random upright boxes scattered between start and goal.
inline PlannerCase make_clutter_case(std::uint64_t seed, int count)
{
    Rng rng(seed);
    PlannerCase c;
    c.moving = detail::upright_box(Vec3::Zero(), Vec3(0.04, 0.04, 0.04), rng.uniform(-0.5, 0.5));
    c.start = Vec3(-0.6, 0.1, rng.uniform(-0.2, 0.2));
    c.goal = Vec3(0.6, 0.1, rng.uniform(-0.2, 0.2));
    for (int k = 0; k < count; ++k) {
        const Vec3 half(rng.uniform(0.03, 0.12), rng.uniform(0.05, 0.25), rng.uniform(0.03, 0.12));
        const Vec3 center(rng.uniform(-0.4, 0.4), rng.uniform(-0.1, 0.3), rng.uniform(-0.35, 0.35));
        auto o = obstacle(strformat("clutter_%d", k), center, half, rng.uniform(-kPi, kPi));
        OrientedBox3 clear = c.moving;
        clear.half_extents.array() += 0.02;
        if (sat_intersect(o.box, clear.at(c.start)) || sat_intersect(o.box, clear.at(c.goal))) continue;
        c.obstacles.push_back(o);
    }
    return c;
}

}  // namespace tracespatial
