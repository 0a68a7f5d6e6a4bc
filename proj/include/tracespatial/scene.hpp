#pragma once

#include "tracespatial/geometry.hpp"
#include "tracespatial/mask.hpp"
#include "tracespatial/rng.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace tracespatial {

// ---------------------------------------------------------------------------
// Camera and depth

struct Projection {
    double u = 0.0;
    double v = 0.0;
    double z = 0.0;  // camera-frame depth, meters
};

struct PixelIndex {
    int x = 0;
    int y = 0;
};

/// Pinhole camera. `rotation`/`translation` map world to camera:
/// p_cam = rotation * p_world + translation, camera x right, y down, z forward.
/// Pixel (x, y) is centred on continuous coordinates (x, y).
struct CameraModel {
    double fx = 1.0, fy = 1.0, cx = 0.5, cy = 0.5;
    int width = 1, height = 1;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    void validate() const
    {
        if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidGeometry("focal lengths must be positive");
        if (width <= 0 || height <= 0) throw InvalidGeometry("image size must be positive");
        if (!(cx > 0.0 && cx < width && cy > 0.0 && cy < height))
            throw InvalidGeometry("principal point outside the image");
        if (!is_rotation(rotation)) throw InvalidGeometry("camera rotation is not a proper rotation");
        if (!translation.allFinite()) throw InvalidGeometry("camera translation not finite");
    }

    Vec3 to_camera(const Vec3& p) const { return rotation * p + translation; }
    Vec3 to_world(const Vec3& p_cam) const { return rotation.transpose() * (p_cam - translation); }
    Vec3 position() const { return -(rotation.transpose() * translation); }

    Projection project(const Vec3& world) const
    {
        const Vec3 pc = to_camera(world);
        if (!(pc.z() > 1e-6)) throw BehindCamera(strformat("camera depth %.6g", pc.z()));
        return {fx * pc.x() / pc.z() + cx, fy * pc.y() / pc.z() + cy, pc.z()};
    }

    /// Projection that never throws; nullopt when behind the camera.
    std::optional<Projection> try_project(const Vec3& world) const
    {
        const Vec3 pc = to_camera(world);
        if (!(pc.z() > 1e-6)) return std::nullopt;
        return Projection{fx * pc.x() / pc.z() + cx, fy * pc.y() / pc.z() + cy, pc.z()};
    }

    Vec3 backproject(double u, double v, double z) const
    {
        return to_world(Vec3((u - cx) * z / fx, (v - cy) * z / fy, z));
    }

    std::optional<PixelIndex> pixel_of(double u, double v) const
    {
        if (!std::isfinite(u) || !std::isfinite(v)) return std::nullopt;
        const double fxp = std::floor(u + 0.5);
        const double fyp = std::floor(v + 0.5);
        if (fxp < 0 || fyp < 0 || fxp >= width || fyp >= height) return std::nullopt;
        return PixelIndex{static_cast<int>(fxp), static_cast<int>(fyp)};
    }

    bool in_frame(double u, double v) const { return pixel_of(u, v).has_value(); }
};

inline Projection project_point(const CameraModel& camera, const Vec3& world_point)
{
    return camera.project(world_point);
}

/// Metric depth image; 0 marks an invalid reading.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    DepthMap() = default;
    DepthMap(int w, int h, double fill = 0.0)
        : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }

    void validate() const
    {
        if (values.size() != static_cast<std::size_t>(width) * height)
            throw InvalidInput("depth map size mismatch");
        for (double d : values)
            if (!(d >= 0.0) || !std::isfinite(d)) throw InvalidInput("depth values must be finite and >= 0");
    }

    double max_valid() const
    {
        double m = 0.0;
        for (double d : values) m = std::max(m, d);
        return m;
    }
};

// ---------------------------------------------------------------------------
// Directions

enum class Direction { Left, Right, Front, Behind, Above, Below };

inline constexpr std::array<Direction, 6> kAllDirections = {
    Direction::Left, Direction::Right, Direction::Front, Direction::Behind, Direction::Above, Direction::Below};

inline const char* direction_label(Direction d)
{
    switch (d) {
    case Direction::Left: return "left";
    case Direction::Right: return "right";
    case Direction::Front: return "front";
    case Direction::Behind: return "behind";
    case Direction::Above: return "above";
    case Direction::Below: return "below";
    }
    return "?";
}

inline Direction parse_direction(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "left") return Direction::Left;
    if (s == "right") return Direction::Right;
    if (s == "front") return Direction::Front;
    if (s == "behind" || s == "back") return Direction::Behind;
    if (s == "above" || s == "up" || s == "top") return Direction::Above;
    if (s == "below" || s == "down" || s == "bottom") return Direction::Below;
    throw InvalidInput("unknown direction '" + s + "'");
}

inline bool is_horizontal(Direction d) { return d != Direction::Above && d != Direction::Below; }

/// Left/right/front/behind follow the camera's horizontal heading ("front" is
/// toward the viewer); above/below follow gravity.
struct DirectionFrame {
    Vec3 right = Vec3::UnitX();
    Vec3 behind = Vec3::UnitZ();
    Vec3 up = Vec3::UnitY();

    static DirectionFrame from_camera(const CameraModel& cam)
    {
        DirectionFrame f;
        const Vec3 up = up_vector();
        Vec3 fwd = cam.rotation.transpose() * Vec3::UnitZ();
        fwd -= fwd.dot(up) * up;
        if (fwd.norm() < 1e-6) {
            // Looking straight down or up: use the image "up" direction as heading.
            fwd = -(cam.rotation.transpose() * Vec3::UnitY());
            fwd -= fwd.dot(up) * up;
        }
        if (fwd.norm() < 1e-9) return f;
        f.behind = fwd.normalized();
        Vec3 cam_x = cam.rotation.transpose() * Vec3::UnitX();
        cam_x -= cam_x.dot(up) * up;
        f.right = cam_x.norm() > 1e-6 ? Vec3(cam_x.normalized()) : Vec3(f.behind.cross(up).normalized());
        f.up = up;
        return f;
    }

    Vec3 normal(Direction d) const
    {
        switch (d) {
        case Direction::Left: return -right;
        case Direction::Right: return right;
        case Direction::Front: return -behind;
        case Direction::Behind: return behind;
        case Direction::Above: return up;
        case Direction::Below: return -up;
        }
        return Vec3::Zero();
    }
};

// ---------------------------------------------------------------------------
// Objects and scenes

enum class LocalAxis { PosX, NegX, PosY, NegY, PosZ, NegZ };

inline LocalAxis parse_local_axis(const std::string& s)
{
    if (s == "+x" || s == "x") return LocalAxis::PosX;
    if (s == "-x") return LocalAxis::NegX;
    if (s == "+y" || s == "y") return LocalAxis::PosY;
    if (s == "-y") return LocalAxis::NegY;
    if (s == "+z" || s == "z") return LocalAxis::PosZ;
    if (s == "-z") return LocalAxis::NegZ;
    throw InvalidInput("unknown local axis '" + s + "'");
}

inline int axis_index(LocalAxis a) { return static_cast<int>(a) / 2; }

struct ObjectInstance {
    std::string id;
    std::string category;
    std::string dense_caption;
    std::string spatial_caption;
    OrientedBox3 box;
    std::optional<RleMask> mask;
    bool is_high_quality = false;
    bool movable = false;
    std::optional<LocalAxis> front_axis;

    /// Most specific available referring phrase.
    std::string phrase() const
    {
        if (!spatial_caption.empty()) return spatial_caption;
        if (!dense_caption.empty()) return dense_caption;
        return category;
    }
};

/// Voxelised surface occupancy.
class OccupancyGrid {
public:
    OccupancyGrid() = default;
    OccupancyGrid(Vec3 origin, double voxel_size, std::array<int, 3> dims)
        : origin_(std::move(origin)), voxel_(voxel_size), dims_(dims),
          bits_(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], false)
    {
        if (!(voxel_size > 0.0)) throw InvalidGeometry("voxel size must be positive");
        if (dims[0] < 0 || dims[1] < 0 || dims[2] < 0) throw InvalidGeometry("negative grid dims");
    }

    const Vec3& origin() const { return origin_; }
    double voxel_size() const { return voxel_; }
    const std::array<int, 3>& dims() const { return dims_; }

    std::array<long, 3> cell_of(const Vec3& p) const
    {
        return {static_cast<long>(std::floor((p.x() - origin_.x()) / voxel_)),
                static_cast<long>(std::floor((p.y() - origin_.y()) / voxel_)),
                static_cast<long>(std::floor((p.z() - origin_.z()) / voxel_))};
    }

    bool in_bounds(const std::array<long, 3>& c) const
    {
        return c[0] >= 0 && c[1] >= 0 && c[2] >= 0 && c[0] < dims_[0] && c[1] < dims_[1] && c[2] < dims_[2];
    }

    std::size_t linear(const std::array<long, 3>& c) const
    {
        return (static_cast<std::size_t>(c[2]) * dims_[1] + c[1]) * dims_[0] + c[0];
    }

    /// Linear index of the voxel containing p, or -1 outside the grid.
    long voxel_index(const Vec3& p) const
    {
        const auto c = cell_of(p);
        return in_bounds(c) ? static_cast<long>(linear(c)) : -1;
    }

    bool occupied(const Vec3& p) const
    {
        const long i = voxel_index(p);
        return i >= 0 && bits_[static_cast<std::size_t>(i)];
    }
    bool occupied_index(long i) const { return i >= 0 && static_cast<std::size_t>(i) < bits_.size() && bits_[i]; }

    void mark(const Vec3& p)
    {
        const long i = voxel_index(p);
        if (i >= 0) bits_[static_cast<std::size_t>(i)] = true;
    }
    void mark_index(std::size_t i) { bits_.at(i) = true; }

    Vec3 voxel_center(const std::array<long, 3>& c) const
    {
        return origin_ + voxel_ * Vec3(c[0] + 0.5, c[1] + 0.5, c[2] + 0.5);
    }

    std::size_t count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true)); }
    std::size_t size() const { return bits_.size(); }

private:
    Vec3 origin_ = Vec3::Zero();
    double voxel_ = 0.05;
    std::array<int, 3> dims_{0, 0, 0};
    std::vector<bool> bits_;
};

struct Scene {
    std::vector<ObjectInstance> objects;
    CameraModel camera;
    DepthMap depth;
    Mat3 gravity_rotation = Mat3::Identity();
    std::optional<OccupancyGrid> occupancy;

    const ObjectInstance* find(const std::string& id) const
    {
        for (const auto& o : objects)
            if (o.id == id) return &o;
        return nullptr;
    }

    const ObjectInstance& get(const std::string& id) const
    {
        if (const auto* o = find(id)) return *o;
        throw InvalidInput("unknown object id '" + id + "'");
    }

    void validate() const
    {
        camera.validate();
        depth.validate();
        if (depth.width != camera.width || depth.height != camera.height)
            throw InvalidInput("depth dimensions differ from camera dimensions");
        std::set<std::string> ids;
        for (const auto& o : objects) {
            if (!ids.insert(o.id).second) throw InvalidInput("duplicate object id '" + o.id + "'");
            o.box.validate();
            if (o.mask && (o.mask->width() != camera.width || o.mask->height() != camera.height))
                throw InvalidInput("mask of '" + o.id + "' does not match camera dimensions");
        }
    }
};

// ---------------------------------------------------------------------------
// Task specification

enum class Method { PlaceRelative, DirectionalMove, Stacking, BypassPlace, BypassStack };

inline const char* method_name(Method m)
{
    switch (m) {
    case Method::PlaceRelative: return "PlaceRelative";
    case Method::DirectionalMove: return "DirectionalMove";
    case Method::Stacking: return "Stacking";
    case Method::BypassPlace: return "BypassPlace";
    case Method::BypassStack: return "BypassStack";
    }
    return "?";
}

inline Method parse_method(const std::string& s)
{
    if (s == "PlaceRelative" || s == "1") return Method::PlaceRelative;
    if (s == "DirectionalMove" || s == "2") return Method::DirectionalMove;
    if (s == "Stacking" || s == "3") return Method::Stacking;
    if (s == "BypassPlace" || s == "4") return Method::BypassPlace;
    if (s == "BypassStack" || s == "5") return Method::BypassStack;
    throw InvalidInput("unknown method '" + s + "'");
}

inline bool is_bypass(Method m) { return m == Method::BypassPlace || m == Method::BypassStack; }
inline bool is_stacking(Method m) { return m == Method::Stacking || m == Method::BypassStack; }

struct TaskSpec {
    Method method = Method::PlaceRelative;
    std::string source_id;
    std::optional<std::string> reference_id;
    std::optional<std::string> via_id;
    std::optional<Direction> direction;
    std::optional<double> distance;

    void validate(const Scene& scene) const
    {
        if (!scene.find(source_id)) throw InvalidInput("task source '" + source_id + "' not in scene");
        if (reference_id && !scene.find(*reference_id))
            throw InvalidInput("task reference '" + *reference_id + "' not in scene");
        if (via_id && !scene.find(*via_id)) throw InvalidInput("task via '" + *via_id + "' not in scene");
        if (is_bypass(method) && !via_id) throw InvalidInput("bypass methods require via_id");
        if ((method == Method::PlaceRelative || method == Method::DirectionalMove) && !direction)
            throw InvalidInput("PlaceRelative/DirectionalMove require a direction");
        if (method != Method::DirectionalMove && !reference_id)
            throw InvalidInput(std::string(method_name(method)) + " requires reference_id");
        if (method == Method::BypassPlace && !direction) throw InvalidInput("BypassPlace requires a direction");
    }
};

// ---------------------------------------------------------------------------
// Operations

/// P' = P R^T for row-vector corners.
inline std::vector<Vec3> gravity_align(const std::vector<Vec3>& corners, const Mat3& gravity_rotation)
{
    std::vector<Vec3> out;
    out.reserve(corners.size());
    for (const auto& c : corners) {
        if (!c.allFinite()) throw InvalidGeometry("non-finite corner coordinate");
        out.push_back(gravity_rotation * c);
    }
    return out;
}

/// At least 4 corners, all finite.
inline bool validate_object(const std::vector<Vec3>& corners)
{
    std::size_t finite = 0;
    for (const auto& c : corners) {
        if (!c.allFinite()) return false;
        ++finite;
    }
    return finite >= 4;
}

enum class DimSource { CA1M, ScanNet };

struct BoxDims {
    double width = 0.0;
    double length = 0.0;
    double height = 0.0;
};

/// CA-1M stores [w, h, l], ScanNet/EmbodiedScan [w, l, h].
inline BoxDims normalize_box_dims(const Vec3& raw, DimSource source)
{
    if (!raw.allFinite() || (raw.array() <= 0.0).any()) throw InvalidGeometry("box dimensions must be positive");
    if (source == DimSource::CA1M) return {raw[0], raw[2], raw[1]};
    return {raw[0], raw[1], raw[2]};
}

struct SemanticDims {
    double length = 0.0;  // front face ∩ bottom face
    double width = 0.0;   // side face ∩ bottom face
    double height = 0.0;  // front face ∩ side face (vertical)
};

/// Index of the local box axis closest to world vertical.
inline int vertical_axis(const OrientedBox3& box)
{
    int best = 0;
    double best_dot = -1.0;
    for (int i = 0; i < 3; ++i) {
        const double d = std::abs(box.axis(i).dot(up_vector()));
        if (d > best_dot) {
            best_dot = d;
            best = i;
        }
    }
    return best;
}

/// semantic_dimensions
inline SemanticDims semantic_dimensions(const OrientedBox3& box, LocalAxis front_axis)
{
    box.validate();
    const int vert = vertical_axis(box);
    const int front = axis_index(front_axis);
    if (front == vert) throw InvalidGeometry("front axis cannot be the vertical axis");
    const int side = 3 - vert - front;
    const Vec3 full = 2.0 * box.half_extents;
    return {full[side], full[front], full[vert]};
}

/// Height of the box along gravity (full extent of the vertical local axis).
inline double object_height(const OrientedBox3& box) { return box.aabb().max.y() - box.aabb().min.y(); }

struct Box2d {
    double u_min = 0.0, v_min = 0.0, u_max = 0.0, v_max = 0.0;

    bool contains(double u, double v) const { return u >= u_min && u <= u_max && v >= v_min && v <= v_max; }
};

/// Stratified-uniform surface samples: per-face counts proportional to area.
inline std::vector<Vec3> sample_box_surface(const OrientedBox3& box, std::size_t n, Rng& rng)
{
    const Vec3& h = box.half_extents;
    // Faces: ±x (area ∝ hy·hz), ±y (hx·hz), ±z (hx·hy).
    const std::array<double, 3> area = {h.y() * h.z(), h.x() * h.z(), h.x() * h.y()};
    const double total = 2.0 * (area[0] + area[1] + area[2]);
    std::array<std::size_t, 6> counts{};
    std::size_t assigned = 0;
    for (int f = 0; f < 6; ++f) {
        counts[f] = static_cast<std::size_t>(std::floor(n * area[f / 2] / total));
        assigned += counts[f];
    }
    for (int f = 0; assigned < n; f = (f + 1) % 6, ++assigned) ++counts[f];

    std::vector<Vec3> pts;
    pts.reserve(n);
    for (int f = 0; f < 6; ++f) {
        const int ax = f / 2;
        const double sign = (f % 2 == 0) ? 1.0 : -1.0;
        const int a1 = (ax + 1) % 3, a2 = (ax + 2) % 3;
        for (std::size_t k = 0; k < counts[f]; ++k) {
            Vec3 local;
            local[ax] = sign * h[ax];
            local[a1] = rng.uniform(-h[a1], h[a1]);
            local[a2] = rng.uniform(-h[a2], h[a2]);
            pts.push_back(box.center + box.rotation * local);
        }
    }
    return pts;
}

/// Image rectangle of the depth-consistent visible surface.
inline std::optional<Box2d> box_to_2d(const CameraModel& camera, const DepthMap& depth, const OrientedBox3& box,
                                      std::uint64_t seed = 0, std::size_t samples = 5000, double depth_tol = 0.05)
{
    if (depth.width != camera.width || depth.height != camera.height)
        throw InvalidInput("depth dimensions differ from camera dimensions");
    Rng rng(seed);
    std::optional<Box2d> out;
    for (const Vec3& p : sample_box_surface(box, samples, rng)) {
        const auto proj = camera.try_project(p);
        if (!proj) continue;
        const auto px = camera.pixel_of(proj->u, proj->v);
        if (!px) continue;
        const double d = depth.at(px->x, px->y);
        if (!(d > 0.0) || !(d - depth_tol < proj->z && proj->z < d + depth_tol)) continue;
        if (!out) {
            out = Box2d{proj->u, proj->v, proj->u, proj->v};
        } else {
            out->u_min = std::min(out->u_min, proj->u);
            out->v_min = std::min(out->v_min, proj->v);
            out->u_max = std::max(out->u_max, proj->u);
            out->v_max = std::max(out->v_max, proj->v);
        }
    }
    if (out) {
        // Keep the rectangle inside the pixel-centre extent of the image.
        out->u_min = std::max(out->u_min, -0.5);
        out->v_min = std::max(out->v_min, -0.5);
        out->u_max = std::min(out->u_max, camera.width - 0.5);
        out->v_max = std::min(out->v_max, camera.height - 0.5);
    }
    return out;
}

/// Categories of immovable fixtures; never a moving object.
inline bool is_blocklisted(std::string category)
{
    std::transform(category.begin(), category.end(), category.begin(), [](unsigned char c) { return std::tolower(c); });
    static const std::array<const char*, 16> kBlocklist = {
        "floor", "wall", "ceiling", "countertop", "counter", "table", "desk", "shelf",
        "cabinet", "door", "window", "bed", "sofa", "stairs", "column", "ground"};
    for (const char* b : kBlocklist)
        if (category == b) return true;
    return false;
}

struct SupportParams {
    double max_gap = 0.05;          // bottom face at most this far above the support's top face
    double max_penetration = 0.01;  // tolerated interpenetration from annotation noise
    double min_footprint_overlap = 0.30;
};

/// Fraction of `a`'s horizontal (x-z) AABB footprint covered by `b`'s.
inline double footprint_overlap(const Aabb3& a, const Aabb3& b)
{
    const double ox = std::max(0.0, std::min(a.max.x(), b.max.x()) - std::max(a.min.x(), b.min.x()));
    const double oz = std::max(0.0, std::min(a.max.z(), b.max.z()) - std::max(a.min.z(), b.min.z()));
    const double area = (a.max.x() - a.min.x()) * (a.max.z() - a.min.z());
    return area > 0.0 ? ox * oz / area : 0.0;
}

/// Id of the object `obj` rests on (vertical overlap heuristic), if any.
inline std::optional<std::string> supporting_object(const Scene& scene, const ObjectInstance& obj,
                                                    const SupportParams& params = {})
{
    const Aabb3 a = obj.box.aabb();
    std::optional<std::string> best;
    double best_top = -std::numeric_limits<double>::infinity();
    for (const auto& other : scene.objects) {
        if (other.id == obj.id) continue;
        const Aabb3 b = other.box.aabb();
        const double gap = a.min.y() - b.max.y();
        if (gap > params.max_gap || gap < -params.max_penetration) continue;
        if (footprint_overlap(a, b) < params.min_footprint_overlap) continue;
        if (b.max.y() > best_top) {
            best_top = b.max.y();
            best = other.id;
        }
    }
    return best;
}

struct RoleAssignment {
    std::vector<std::string> sources;
    std::vector<std::string> vias;
    std::vector<std::string> references;
    std::vector<std::string> obstacles;
};

inline RoleAssignment assign_roles(const Scene& scene, const SupportParams& params = {})
{
    RoleAssignment r;
    for (const auto& o : scene.objects) {
        r.obstacles.push_back(o.id);
        if (!o.is_high_quality) continue;
        if (o.movable && !is_blocklisted(o.category)) {
            r.sources.push_back(o.id);
            r.vias.push_back(o.id);
        }
        if (supporting_object(scene, o, params)) r.references.push_back(o.id);
    }
    return r;
}

/// Surface occupancy from depth back-projection.
inline OccupancyGrid build_occupancy(const DepthMap& depth, const CameraModel& camera, double voxel_size)
{
    if (!(voxel_size > 0.0)) throw InvalidGeometry("voxel size must be positive");
    std::vector<Vec3> pts;
    Aabb3 bounds = Aabb3::empty();
    for (int y = 0; y < depth.height; ++y)
        for (int x = 0; x < depth.width; ++x) {
            const double d = depth.at(x, y);
            if (!(d > 0.0)) continue;
            pts.push_back(camera.backproject(x, y, d));
            bounds.extend(pts.back());
        }
    if (pts.empty()) return OccupancyGrid(Vec3::Zero(), voxel_size, {0, 0, 0});
    const Vec3 origin = (bounds.min / voxel_size).array().floor() * voxel_size;
    std::array<int, 3> dims{};
    for (int i = 0; i < 3; ++i)
        dims[i] = static_cast<int>(std::floor((bounds.max[i] - origin[i]) / voxel_size)) + 1;
    OccupancyGrid grid(origin, voxel_size, dims);
    for (const auto& p : pts) grid.mark(p);
    return grid;
}

/// Rotate a scene so that gravity points along -y. Boxes, camera extrinsics
/// and the stored rotation are all updated; the result has identity gravity.
/// Objects whose corners are not finite are dropped.
inline Scene align_to_gravity(Scene scene)
{
    const Mat3& g = scene.gravity_rotation;
    if (!is_rotation(g)) throw InvalidGeometry("gravity rotation is not a proper rotation");
    std::vector<ObjectInstance> kept;
    for (auto& o : scene.objects) {
        const auto c = o.box.corners();
        if (!validate_object(std::vector<Vec3>(c.begin(), c.end()))) continue;
        o.box.center = g * o.box.center;
        o.box.rotation = g * o.box.rotation;
        kept.push_back(std::move(o));
    }
    scene.objects = std::move(kept);
    scene.camera.rotation = scene.camera.rotation * g.transpose();
    scene.gravity_rotation = Mat3::Identity();
    scene.occupancy.reset();
    return scene;
}

}  // namespace tracespatial
