#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "posekit/geometry.hpp"
#include "posekit/rng.hpp"

using namespace posekit;

namespace {

CameraIntrinsics pnp_camera() {
    CameraIntrinsics k;
    k.fx = 800.0;
    k.fy = 780.0;
    k.cx = 320.0;
    k.cy = 240.0;
    k.width = 640;
    k.height = 480;
    return k;
}

std::vector<Vec3> cube_corners(double sx = 1.0, double sy = 1.4, double sz = 0.8) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 8; ++i)
        pts.push_back({(i & 1) ? sx / 2 : -sx / 2, (i & 2) ? sy / 2 : -sy / 2,
                       (i & 4) ? sz / 2 : -sz / 2});
    return pts;
}

// random object->camera pose keeping the whole cube in front of the camera
RigidTransform random_pose(Rng& rng) {
    const Vec3 axis = Vec3{rng.normal(), rng.normal(), rng.normal()}.normalized() *
                      rng.uniform(0.0, M_PI);
    return {so3_exp(axis),
            {rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(3.0, 8.0)}};
}

} // namespace

TEST_CASE("pnp recovers the identity-translation pose") {
    const CameraIntrinsics k = pnp_camera();
    const RigidTransform truth{Mat3::identity(), {0, 0, 5}};
    const auto pts3d = cube_corners();
    const auto pts2d = project_points(pts3d, truth, k);
    const RigidTransform est = solve_pnp(pts2d, pts3d, k);
    REQUIRE(rotation_geodesic(est.rotation, truth.rotation) < 1e-6);
    REQUIRE((est.translation - truth.translation).norm() < 1e-6);
}

TEST_CASE("pnp round trip over random poses") {
    const CameraIntrinsics k = pnp_camera();
    Rng rng(101);
    for (int trial = 0; trial < 100; ++trial) {
        const RigidTransform truth = random_pose(rng);
        const auto pts3d = cube_corners();
        const auto pts2d = project_points(pts3d, truth, k);
        const RigidTransform est = solve_pnp(pts2d, pts3d, k);
        REQUIRE(rotation_geodesic(est.rotation, truth.rotation) < 1e-6);
        REQUIRE((est.translation - truth.translation).norm() < 1e-6);

        // reprojection rms
        const auto back = project_points(pts3d, est, k);
        double rms = 0;
        for (size_t i = 0; i < back.size(); ++i) {
            const double dx = back[i].x - pts2d[i].x, dy = back[i].y - pts2d[i].y;
            rms += dx * dx + dy * dy;
        }
        rms = std::sqrt(rms / static_cast<double>(back.size()));
        REQUIRE(rms < 1e-6);
    }
}

TEST_CASE("pnp rejects collinear and insufficient input") {
    const CameraIntrinsics k = pnp_camera();
    std::vector<Vec3> line;
    std::vector<Vec2> px;
    for (int i = 0; i < 6; ++i) {
        line.push_back({static_cast<double>(i), 0, 0});
        px.push_back({100.0 + 10 * i, 120.0});
    }
    REQUIRE_THROWS_AS(solve_pnp(px, line, k), DegenerateError);

    const auto pts3d = cube_corners();
    const RigidTransform truth{Mat3::identity(), {0, 0, 5}};
    auto pts2d = project_points(pts3d, truth, k);
    pts2d.resize(5);
    auto small3d = pts3d;
    small3d.resize(5);
    REQUIRE_THROWS_AS(solve_pnp(pts2d, small3d, k), DegenerateError);
}

TEST_CASE("pnp with half-pixel noise stays under two degrees") {
    const CameraIntrinsics k = pnp_camera();
    Rng rng(202);
    std::vector<double> errors;
    for (int trial = 0; trial < 200; ++trial) {
        const RigidTransform truth = random_pose(rng);
        const auto pts3d = cube_corners();
        auto pts2d = project_points(pts3d, truth, k);
        for (auto& p : pts2d) {
            p.x += rng.normal() * 0.5;
            p.y += rng.normal() * 0.5;
        }
        const RigidTransform est = solve_pnp(pts2d, pts3d, k);
        errors.push_back(rad_to_deg(rotation_geodesic(est.rotation, truth.rotation)));
    }
    std::sort(errors.begin(), errors.end());
    const double p95 = errors[static_cast<size_t>(errors.size() * 95 / 100)];
    INFO("95th percentile rotation error deg: " << p95);
    REQUIRE(p95 < 2.0);
}
