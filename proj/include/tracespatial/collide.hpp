#pragma once

#include "tracespatial/geometry.hpp"
#include "tracespatial/scene.hpp"

#include <Eigen/Eigenvalues>

#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace tracespatial {

namespace detail {

// Canonical sign: the first non-negligible component is positive.
inline Vec3 canonical_sign(Vec3 v)
{
    for (int i = 0; i < 3; ++i) {
        if (std::abs(v[i]) > 1e-12) return v[i] < 0 ? Vec3(-v) : v;
    }
    return v;
}

inline bool lex_less(const Vec3& a, const Vec3& b)
{
    for (int i = 0; i < 3; ++i) {
        if (a[i] < b[i] - 1e-12) return true;
        if (a[i] > b[i] + 1e-12) return false;
    }
    return false;
}

struct FrameFit {
    Mat3 axes;
    Vec3 lo, hi;
    double volume;
};

inline FrameFit fit_frame(std::span<const Vec3> points, const Mat3& axes, double floor_half)
{
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const auto& p : points) {
        const Vec3 l = axes.transpose() * p;
        lo = lo.cwiseMin(l);
        hi = hi.cwiseMax(l);
    }
    const Vec3 half = ((hi - lo) * 0.5).cwiseMax(floor_half);
    return {axes, lo, hi, 8.0 * half.prod()};
}

}  // namespace detail

/// PCA box. Axes sorted by descending variance, third
/// axis = first x second. When variances tie (e.g. a cube's corners) PCA
/// leaves the frame undetermined; the frame is then chosen among directions
/// spanned by point differences to minimise box volume.
inline OrientedBox3 obb_from_points(std::span<const Vec3> points, double min_half_extent = 1e-4)
{
    if (points.size() < 4) throw InvalidGeometry("need at least 4 points for an OBB");
    Vec3 mean = Vec3::Zero();
    for (const auto& p : points) {
        if (!p.allFinite()) throw InvalidGeometry("non-finite point");
        mean += p;
    }
    mean /= static_cast<double>(points.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& p : points) cov += (p - mean) * (p - mean).transpose();
    cov /= static_cast<double>(points.size());

    Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
    const Vec3 evals = solver.eigenvalues();  // ascending
    const double scale = std::max(evals[2], 0.0);
    if (scale <= 1e-18) throw InvalidGeometry("degenerate point set (all points coincide)");
    if (evals[1] <= 1e-12 * scale) throw InvalidGeometry("degenerate point set (collinear)");

    std::vector<Vec3> centered;
    centered.reserve(points.size());
    for (const auto& p : points) centered.push_back(p - mean);

    Mat3 axes;
    axes.col(0) = detail::canonical_sign(solver.eigenvectors().col(2));
    axes.col(1) = detail::canonical_sign(solver.eigenvectors().col(1));
    axes.col(2) = axes.col(0).cross(axes.col(1));
    detail::FrameFit best = detail::fit_frame(centered, axes, min_half_extent);

    const auto near_equal = [&](double a, double b) { return std::abs(a - b) <= 1e-6 * scale; };
    if (near_equal(evals[2], evals[1]) || near_equal(evals[1], evals[0])) {
        // Candidate directions from differences of the points farthest from the mean.
        std::vector<std::size_t> order(centered.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return centered[a].squaredNorm() > centered[b].squaredNorm();
        });
        const std::size_t m = std::min<std::size_t>(order.size(), 16);
        std::vector<Vec3> dirs;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j) {
                const Vec3 d = centered[order[j]] - centered[order[i]];
                if (d.norm() > 1e-9) dirs.push_back(detail::canonical_sign(d.normalized()));
            }
        for (const auto& a1 : dirs) {
            for (const auto& d : dirs) {
                Vec3 a2 = d - d.dot(a1) * a1;
                if (a2.norm() < 1e-6) continue;
                a2 = detail::canonical_sign(a2.normalized());
                Mat3 cand;
                cand.col(0) = a1;
                cand.col(1) = a2;
                cand.col(2) = a1.cross(a2);
                const auto fit = detail::fit_frame(centered, cand, min_half_extent);
                if (fit.volume < best.volume * (1.0 - 1e-9)) best = fit;
            }
        }
        // Re-sort the chosen axes by descending variance, ties lexicographic.
        std::array<int, 3> idx{0, 1, 2};
        Vec3 var;
        for (int k = 0; k < 3; ++k) var[k] = best.axes.col(k).dot(cov * best.axes.col(k));
        std::array<Vec3, 3> cols;
        for (int k = 0; k < 3; ++k) cols[k] = detail::canonical_sign(best.axes.col(k));
        std::sort(idx.begin(), idx.end(), [&](int a, int b) {
            if (!near_equal(var[a], var[b])) return var[a] > var[b];
            return detail::lex_less(cols[b], cols[a]);
        });
        Mat3 sorted;
        sorted.col(0) = cols[idx[0]];
        sorted.col(1) = cols[idx[1]];
        sorted.col(2) = sorted.col(0).cross(sorted.col(1));
        best = detail::fit_frame(centered, sorted, min_half_extent);
    }

    OrientedBox3 box;
    box.rotation = best.axes;
    box.half_extents = ((best.hi - best.lo) * 0.5).cwiseMax(min_half_extent);
    // Centre of the extent range (equals the mean for symmetric point sets).
    box.center = mean + best.axes * ((best.hi + best.lo) * 0.5);
    return box;
}

/// 15-axis separating axis test. Touching boxes intersect.
inline bool sat_intersect(const OrientedBox3& a, const OrientedBox3& b)
{
    const Vec3 t = b.center - a.center;
    std::array<Vec3, 15> axes;
    int n = 0;
    for (int i = 0; i < 3; ++i) axes[n++] = a.axis(i);
    for (int i = 0; i < 3; ++i) axes[n++] = b.axis(i);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const Vec3 c = a.axis(i).cross(b.axis(j));
            if (c.norm() < 1e-8) continue;
            axes[n++] = c.normalized();
        }
    for (int k = 0; k < n; ++k) {
        const Vec3& l = axes[k];
        double ra = 0.0, rb = 0.0;
        for (int i = 0; i < 3; ++i) {
            ra += a.half_extents[i] * std::abs(a.axis(i).dot(l));
            rb += b.half_extents[i] * std::abs(b.axis(i).dot(l));
        }
        if (std::abs(t.dot(l)) > ra + rb) return false;
    }
    return true;
}

/// `a` translated by `delta` (swept volume) against `b`. The swept volume is a
/// zonotope, so the candidate axes gain delta x (each box axis).
inline bool swept_sat_intersect(const OrientedBox3& a, const Vec3& delta, const OrientedBox3& b)
{
    const Vec3 t = b.center - (a.center + 0.5 * delta);
    std::array<Vec3, 21> axes;
    int n = 0;
    const auto push = [&](const Vec3& c) {
        if (c.norm() >= 1e-8) axes[n++] = c.normalized();
    };
    for (int i = 0; i < 3; ++i) axes[n++] = a.axis(i);
    for (int i = 0; i < 3; ++i) axes[n++] = b.axis(i);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) push(a.axis(i).cross(b.axis(j)));
    if (delta.norm() > 1e-12) {
        for (int i = 0; i < 3; ++i) push(delta.cross(a.axis(i)));
        for (int i = 0; i < 3; ++i) push(delta.cross(b.axis(i)));
    }
    for (int k = 0; k < n; ++k) {
        const Vec3& l = axes[k];
        double ra = 0.5 * std::abs(delta.dot(l)), rb = 0.0;
        for (int i = 0; i < 3; ++i) {
            ra += a.half_extents[i] * std::abs(a.axis(i).dot(l));
            rb += b.half_extents[i] * std::abs(b.axis(i).dot(l));
        }
        if (std::abs(t.dot(l)) > ra + rb) return false;
    }
    return true;
}

/// Obstacle set prepared for repeated queries against one moving box.
class CollisionWorld {
public:
    struct Entry {
        std::string id;
        OrientedBox3 box;
        Aabb3 aabb;
    };

    CollisionWorld() = default;

    CollisionWorld(std::span<const ObjectInstance> obstacles, const std::set<std::string>& exclude_ids = {})
    {
        for (const auto& o : obstacles) {
            if (exclude_ids.count(o.id)) continue;
            entries_.push_back({o.id, o.box, o.box.aabb()});
        }
    }

    void add(std::string id, const OrientedBox3& box) { entries_.push_back({std::move(id), box, box.aabb()}); }

    const std::vector<Entry>& entries() const { return entries_; }

    /// Broad phase (AABB) then narrow phase (SAT) for `moving` centred at `pose`.
    bool collides(const OrientedBox3& moving, const Vec3& pose) const
    {
        const OrientedBox3 m = moving.at(pose);
        const Aabb3 ma = m.aabb();
        for (const auto& e : entries_)
            if (e.aabb.overlaps(ma) && sat_intersect(m, e.box)) return true;
        return false;
    }

    /// Ids of obstacles hit at `pose`.
    std::vector<std::string> hits(const OrientedBox3& moving, const Vec3& pose) const
    {
        std::vector<std::string> out;
        const OrientedBox3 m = moving.at(pose);
        const Aabb3 ma = m.aabb();
        for (const auto& e : entries_)
            if (e.aabb.overlaps(ma) && sat_intersect(m, e.box)) out.push_back(e.id);
        return out;
    }

    /// Continuous sweep of the translating box from `from` to `to` (exact
    /// swept-volume SAT, so any sub-division of a free segment is free too).
    /// `step` is validated for interface compatibility with sampled sweeps.
    bool segment_collides(const OrientedBox3& moving, const Vec3& from, const Vec3& to, double step) const
    {
        if (!(step > 0.0)) throw InvalidInput("sweep step must be positive");
        const Vec3 ext = moving.aabb().max - moving.center;
        Aabb3 swept{from.cwiseMin(to) - ext, from.cwiseMax(to) + ext};
        const OrientedBox3 m = moving.at(from);
        for (const auto& e : entries_)
            if (e.aabb.overlaps(swept) && swept_sat_intersect(m, to - from, e.box)) return true;
        return false;
    }

    bool path_collides(const OrientedBox3& moving, const Path& path, double step) const
    {
        if (path.size() == 1) return collides(moving, path.front());
        for (std::size_t i = 1; i < path.size(); ++i)
            if (segment_collides(moving, path[i - 1], path[i], step)) return true;
        return false;
    }

private:
    std::vector<Entry> entries_;
};

inline bool check_collision(const OrientedBox3& moving, const Vec3& pose_center,
                            std::span<const ObjectInstance> obstacles, const std::set<std::string>& exclude_ids = {})
{
    return CollisionWorld(obstacles, exclude_ids).collides(moving, pose_center);
}

inline constexpr double kDefaultSweepStep = 0.02;

inline bool segment_collides(const OrientedBox3& moving, const Vec3& from, const Vec3& to,
                             std::span<const ObjectInstance> obstacles, const std::set<std::string>& exclude_ids = {},
                             double step = kDefaultSweepStep)
{
    return CollisionWorld(obstacles, exclude_ids).segment_collides(moving, from, to, step);
}

struct SweepOptions {
    bool keypoints_only = false;
    /// Voxels ignored during the sweep (linear indices in the grid).
    const std::unordered_set<long>* exclude_voxels = nullptr;
};

/// Translate the cloud along the trace and report the
/// largest fraction of points that land in occupied voxels at any pose.
/// Poses are offsets relative to the first trace point.
inline double sweep_fraction(std::span<const Vec3> object_points, const Path& trace, const OccupancyGrid& occupancy,
                             const SweepOptions& options = {})
{
    if (object_points.empty() || trace.empty()) return 0.0;
    const Path poses = options.keypoints_only ? trace : densify(trace, occupancy.voxel_size());
    double worst = 0.0;
    for (const auto& pose : poses) {
        const Vec3 offset = pose - trace.front();
        std::size_t hit = 0;
        for (const auto& p : object_points) {
            const long v = occupancy.voxel_index(p + offset);
            if (v < 0 || !occupancy.occupied_index(v)) continue;
            if (options.exclude_voxels && options.exclude_voxels->count(v)) continue;
            ++hit;
        }
        worst = std::max(worst, static_cast<double>(hit) / static_cast<double>(object_points.size()));
    }
    return worst;
}

}  // namespace tracespatial
