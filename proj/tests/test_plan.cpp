#include "support.hpp"

#include <gtest/gtest.h>

using namespace tracespatial;
using namespace testsupport;

namespace {

// Wall in the x = 0.5 plane with one 0.3 m square gap centred at (y, z) = (0, 0.3).
std::vector<ObjectInstance> gap_wall()
{
    const double x = 0.5, t = 0.02;
    return {object("bottom", box(Vec3(x, 0, -0.35), Vec3(t, 1.0, 0.5))),
            object("top", box(Vec3(x, 0, 0.8), Vec3(t, 1.0, 0.35))),
            object("left", box(Vec3(x, -0.6, 0.3), Vec3(t, 0.45, 0.15))),
            object("right", box(Vec3(x, 0.6, 0.3), Vec3(t, 0.45, 0.15)))};
}

PlannerParams gap_params(std::uint64_t seed)
{
    PlannerParams p;
    p.rng_seed = seed;
    p.bounds = Aabb3{Vec3(-0.2, -0.7, -0.7), Vec3(1.2, 0.7, 0.9)};
    return p;
}

}  // namespace

TEST(Endpoint, FreeRegionGivesCentroid)
{
    DestinationRegion r;
    r.centroid = Vec3(1, 5, 2);
    const auto p = sample_endpoint(r, 0.7, 0.2, [](const Vec3&) { return false; });
    ASSERT_TRUE(p);
    EXPECT_NEAR(p->x(), 1.0, 1e-12);
    EXPECT_NEAR(p->z(), 2.0, 1e-12);
    EXPECT_NEAR(p->y(), 0.7 + 0.1 + 0.01, 1e-12);
}

TEST(Endpoint, BlockedCentroidFallsToFirstRing)
{
    DestinationRegion r;
    const std::vector<ObjectInstance> post{object("post", box(Vec3::Zero(), Vec3(0.005, 1, 0.005)))};
    const OrientedBox3 moving = box(Vec3::Zero(), Vec3(0.01, 0.01, 0.01));
    const auto p = sample_endpoint(r, 0.0, 0.02, [&](const Vec3& c) { return check_collision(moving, c, post); });
    ASSERT_TRUE(p);
    EXPECT_NEAR(Vec3(p->x(), 0, p->z()).norm(), 0.03, 1e-12);
}

TEST(Endpoint, OccupiedRegionGivesNone)
{
    EXPECT_FALSE(sample_endpoint(DestinationRegion{}, 0, 0.1, [](const Vec3&) { return true; }));
}

TEST(Endpoint, RingSizes)
{
    DestinationRegion r;
    EXPECT_EQ(polar_candidates(r, 0).size(), 1u + 8 + 12 + 16 + 20 + 24);
    r.max_radius = 0.06;
    EXPECT_EQ(polar_candidates(r, 0).size(), 1u + 8 + 12);
}

TEST(Rrt, EmptySceneNearStraight)
{
    const OrientedBox3 m = box(Vec3::Zero(), Vec3(0.05, 0.05, 0.05));
    PlannerParams p;
    p.rng_seed = 1;
    const auto r = rrt_star(Vec3::Zero(), Vec3(1, 0, 0), m, CollisionWorld{}, p);
    ASSERT_TRUE(r.ok());
    EXPECT_LE(r.cost, 1.10);
    EXPECT_GE(r.cost, 1.0 - 1e-12);
    EXPECT_TRUE(r.path.front().isApprox(Vec3::Zero()));
    EXPECT_LT((r.path.back() - Vec3(1, 0, 0)).norm(), p.goal_tolerance);
    for (std::size_t i = 1; i < r.path.size(); ++i) EXPECT_LE((r.path[i] - r.path[i - 1]).norm(), p.step_size + 1e-12);
}

TEST(Rrt, GoalInsideSolidBox)
{
    const OrientedBox3 m = box(Vec3::Zero(), Vec3(0.05, 0.05, 0.05));
    const std::vector<ObjectInstance> obs{object("block", box(Vec3(1, 0, 0), Vec3(0.3, 0.3, 0.3)))};
    const auto r = rrt_star(Vec3::Zero(), Vec3(1, 0, 0), m, obs, {}, PlannerParams{});
    EXPECT_EQ(r.failure, PlanFailure::GoalInCollision);
}

TEST(Rrt, InvalidParams)
{
    PlannerParams p;
    p.rewire_radius = 0.01;
    EXPECT_THROW(p.validate(), InvalidInput);
    p = PlannerParams{};
    p.goal_bias = 1.5;
    EXPECT_THROW(rrt_star(Vec3::Zero(), Vec3(1, 0, 0), box(Vec3::Zero(), Vec3(0.1, 0.1, 0.1)), CollisionWorld{}, p),
                 InvalidInput);
}

TEST(Rrt, WallGapMatchesBfsOracle)
{
    const auto wall = gap_wall();
    const CollisionWorld world(wall);
    const OrientedBox3 m = box(Vec3::Zero(), Vec3(0.05, 0.05, 0.05));
    const auto params = gap_params(4);
    ASSERT_TRUE(bfs_feasible(Vec3::Zero(), Vec3(1, 0, 0), m, world, *params.bounds));
    const auto r = rrt_star(Vec3::Zero(), Vec3(1, 0, 0), m, world, params);
    ASSERT_TRUE(r.ok());
    EXPECT_FALSE(world.path_collides(m, r.path, params.sweep_step));
    // The crossing of the wall plane lies inside the gap.
    for (std::size_t i = 1; i < r.path.size(); ++i) {
        const Vec3 a = r.path[i - 1], b = r.path[i];
        if ((a.x() - 0.5) * (b.x() - 0.5) > 0) continue;
        const Vec3 c = a + (b - a) * ((0.5 - a.x()) / (b.x() - a.x()));
        EXPECT_LE(std::abs(c.y()), 0.15);
        EXPECT_GE(c.z(), 0.15);
        EXPECT_LE(c.z(), 0.45);
    }
}

TEST(Rrt, ClosedWallInfeasibleForBoth)
{
    auto wall = gap_wall();
    wall.push_back(object("plug", box(Vec3(0.5, 0, 0.3), Vec3(0.02, 0.16, 0.16))));
    const CollisionWorld world(wall);
    const OrientedBox3 m = box(Vec3::Zero(), Vec3(0.05, 0.05, 0.05));
    auto params = gap_params(4);
    params.max_iterations = 1500;
    EXPECT_FALSE(bfs_feasible(Vec3::Zero(), Vec3(1, 0, 0), m, world, *params.bounds));
    EXPECT_EQ(rrt_star(Vec3::Zero(), Vec3(1, 0, 0), m, world, params).failure, PlanFailure::MaxIterationsExceeded);
}

TEST(Rrt, DeterministicPerSeed)
{
    const auto wall = gap_wall();
    const CollisionWorld world(wall);
    const OrientedBox3 m = box(Vec3::Zero(), Vec3(0.05, 0.05, 0.05));
    auto params = gap_params(9);
    params.max_iterations = 1500;
    const auto a = rrt_star(Vec3::Zero(), Vec3(1, 0, 0), m, world, params);
    const auto b = rrt_star(Vec3::Zero(), Vec3(1, 0, 0), m, world, params);
    ASSERT_EQ(a.path.size(), b.path.size());
    for (std::size_t i = 0; i < a.path.size(); ++i) EXPECT_EQ(a.path[i], b.path[i]);
    EXPECT_EQ(a.cost, b.cost);
    EXPECT_EQ(a.tree_size, b.tree_size);
}

TEST(Rrt, CostNonIncreasingInBudget)
{
    const OrientedBox3 m = box(Vec3::Zero(), Vec3(0.05, 0.05, 0.05));
    const std::vector<ObjectInstance> obs{object("o", box(Vec3(0.5, 0, 0), Vec3(0.1, 0.1, 0.1)))};
    const CollisionWorld world(obs);
    double prev = std::numeric_limits<double>::infinity();
    for (int n : {500, 1000, 2000}) {
        PlannerParams p;
        p.rng_seed = 5;
        p.max_iterations = n;
        const auto r = rrt_star(Vec3::Zero(), Vec3(1, 0, 0), m, world, p);
        ASSERT_TRUE(r.ok());
        EXPECT_LE(r.cost, prev + 1e-12);
        prev = r.cost;
    }
}

TEST(Escape, FreeStartIsIdentity)
{
    const auto r = escape_start(Vec3(1, 2, 3), box(Vec3::Zero(), Vec3(0.1, 0.1, 0.1)), CollisionWorld{});
    EXPECT_EQ(r.free_point, Vec3(1, 2, 3));
    EXPECT_TRUE(r.segment.empty());
    EXPECT_EQ(r.mode, EscapeMode::None);
}

TEST(Escape, GeometricPushOutOfWall)
{
    const OrientedBox3 m = box(Vec3::Zero(), Vec3(0.05, 0.05, 0.05));
    // Wall face at x = 0.03: the box penetrates by 2 cm.
    const std::vector<ObjectInstance> wall{object("wall", box(Vec3(0.53, 0, 0), Vec3(0.5, 1, 1)))};
    const CollisionWorld world(wall);
    const auto r = escape_start(Vec3::Zero(), m, world);
    EXPECT_EQ(r.mode, EscapeMode::Geometric);
    const double moved = (r.free_point - Vec3::Zero()).norm();
    EXPECT_GE(moved, 0.02);
    EXPECT_LE(moved, 0.05);
    EXPECT_TRUE(r.direction.isApprox(Vec3(-1, 0, 0)));
    EXPECT_FALSE(world.collides(m, r.free_point));
    EXPECT_TRUE(r.segment.front().isApprox(Vec3::Zero()));
    EXPECT_TRUE(r.segment.back().isApprox(r.free_point));
}

TEST(Escape, BuriedStartFails)
{
    const OrientedBox3 m = box(Vec3::Zero(), Vec3(0.05, 0.05, 0.05));
    const std::vector<ObjectInstance> block{object("block", box(Vec3::Zero(), Vec3(1, 1, 1)))};
    EXPECT_THROW(escape_start(Vec3::Zero(), m, CollisionWorld(block)), EscapeFailed);
}

TEST(Escape, VisualPicksOpenDirection)
{
    // Camera at the origin looking along +z. A backdrop 10 cm behind the start
    // leaves the longest free rays pointing back toward the camera.
    const CameraModel cam = simple_camera(200, 200, 200);
    const Vec3 start(0, 0, 2);
    const OrientedBox3 m = box(Vec3::Zero(), Vec3(0.03, 0.03, 0.03));
    const std::vector<ObjectInstance> obs{object("pin", box(start, Vec3(0.015, 0.015, 0.015)))};
    const DepthMap depth = plane_depth(cam, Vec3::UnitZ(), 2.1);
    const CollisionWorld world(obs);
    const auto r = escape_start(start, m, world, &depth, &cam);
    EXPECT_EQ(r.mode, EscapeMode::Visual);
    EXPECT_TRUE(r.direction.isApprox(Vec3(0, 0, -1)));
    EXPECT_FALSE(world.collides(m, r.free_point));
    EXPECT_NEAR(r.free_point.z(), 1.94, 1e-9);
}

TEST(Escape, OpeningScoreBackdropLimitsBehind)
{
    const CameraModel cam = simple_camera(200, 200, 200);
    const DepthMap depth = plane_depth(cam, Vec3::UnitZ(), 2.1);
    const double behind = opening_score(Vec3(0, 0, 2), Vec3::UnitZ(), cam, depth);
    // Free while z <= 2.12: steps at 2.02 .. 2.12.
    EXPECT_NEAR(behind, 0.12, 0.021);
    EXPECT_GT(opening_score(Vec3(0, 0, 2), -Vec3::UnitZ(), cam, depth), 1.0);
}
