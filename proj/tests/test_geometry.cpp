#include <catch2/catch_amalgamated.hpp>

#include "posekit/geometry.hpp"
#include "posekit/rng.hpp"

using namespace posekit;

namespace {

RigidTransform random_transform(Rng& rng) {
    const Vec3 axis =
        Vec3{rng.normal(), rng.normal(), rng.normal()}.normalized() * rng.uniform(0.0, 3.0);
    return {so3_exp(axis), {rng.normal(), rng.normal(), rng.normal()}};
}

CameraIntrinsics test_camera() {
    CameraIntrinsics k;
    k.fx = k.fy = 100.0;
    k.cx = k.cy = 64.0;
    k.width = k.height = 128;
    return k;
}

} // namespace

TEST_CASE("invert_transform identity and rot_z case") {
    const RigidTransform id{};
    const RigidTransform inv = invert_transform(id);
    REQUIRE(inv.rotation(0, 0) == Catch::Approx(1.0));
    REQUIRE(inv.translation.norm() == Catch::Approx(0.0).margin(1e-15));

    //  R = rot_z(90), T = (1,0,0)  ->  (rot_z(-90), (0,1,0))
    const RigidTransform t{rot_z(90.0), {1, 0, 0}};
    const RigidTransform ti = invert_transform(t);
    const Mat3 want = rot_z(-90.0);
    for (int i = 0; i < 9; ++i)
        REQUIRE(ti.rotation.m[static_cast<size_t>(i)] ==
                Catch::Approx(want.m[static_cast<size_t>(i)]).margin(1e-12));
    REQUIRE(ti.translation.x == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(ti.translation.y == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(ti.translation.z == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("compose with inverse is the identity, inversion is an involution") {
    Rng rng(31);
    for (int trial = 0; trial < 25; ++trial) {
        const RigidTransform t = random_transform(rng);
        REQUIRE(t.is_valid(1e-9));
        const RigidTransform round = compose(t, invert_transform(t));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                REQUIRE(round.rotation(i, j) == Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-9));
        REQUIRE(round.translation.norm() < 1e-9);

        const RigidTransform twice = invert_transform(invert_transform(t));
        for (int i = 0; i < 9; ++i)
            REQUIRE(twice.rotation.m[static_cast<size_t>(i)] ==
                    Catch::Approx(t.rotation.m[static_cast<size_t>(i)]).margin(1e-9));
        REQUIRE((twice.translation - t.translation).norm() < 1e-9);
    }
}

TEST_CASE("bbox corners: paper sign order and center mean") {
    Bbox3D box;
    box.center = {0, 0, 0};
    box.dims = {2, 4, 6};
    const auto corners = bbox_corners(box);
    REQUIRE(corners[0].x == Catch::Approx(1.0));
    REQUIRE(corners[0].y == Catch::Approx(2.0));
    REQUIRE(corners[0].z == Catch::Approx(3.0));
    REQUIRE(corners[1].x == Catch::Approx(-1.0)); // second corner flips x
    REQUIRE(corners[1].y == Catch::Approx(2.0));
    REQUIRE(corners[7].x == Catch::Approx(-1.0)); // last corner is (-,-,-)
    REQUIRE(corners[7].y == Catch::Approx(-2.0));
    REQUIRE(corners[7].z == Catch::Approx(-3.0));

    Bbox3D unit;
    unit.center = {1, 1, 1};
    unit.dims = {2, 2, 2};
    for (const auto& c : bbox_corners(unit)) {
        REQUIRE(std::abs(c.x - 1.0) == Catch::Approx(1.0));
        REQUIRE(std::abs(c.y - 1.0) == Catch::Approx(1.0));
        REQUIRE(std::abs(c.z - 1.0) == Catch::Approx(1.0));
    }

    Rng rng(7);
    Bbox3D rnd;
    rnd.center = {rng.normal(), rng.normal(), rng.normal()};
    rnd.dims = {rng.uniform(0.5, 2), rng.uniform(0.5, 2), rng.uniform(0.5, 2)};
    rnd.orientation = so3_exp({rng.normal(), rng.normal(), rng.normal()});
    const auto cs = bbox_corners(rnd);
    Vec3 mean{0, 0, 0};
    for (const auto& c : cs) mean = mean + c;
    mean = mean * (1.0 / 8.0);
    REQUIRE((mean - rnd.center).norm() < 1e-12);

    // edge lengths reproduce the dims: corners differing in one sign bit
    REQUIRE((cs[0] - cs[1]).norm() == Catch::Approx(rnd.dims.x));
    REQUIRE((cs[0] - cs[2]).norm() == Catch::Approx(rnd.dims.y));
    REQUIRE((cs[0] - cs[4]).norm() == Catch::Approx(rnd.dims.z));

    Bbox3D bad;
    bad.dims = {1, 0, 1};
    REQUIRE_THROWS_AS(bbox_corners(bad), ConfigError);
}

TEST_CASE("pinhole projection on and off the optical axis") {
    const CameraIntrinsics k = test_camera();
    const RigidTransform pose{}; // identity
    const auto px = project_points({{0, 0, 2}, {1, 0, 2}}, pose, k);
    REQUIRE(px[0].x == Catch::Approx(64.0));
    REQUIRE(px[0].y == Catch::Approx(64.0));
    REQUIRE(px[1].x == Catch::Approx(114.0));
    REQUIRE(px[1].y == Catch::Approx(64.0));

    REQUIRE_THROWS_AS(project_points({{0, 0, -1}}, pose, k), BehindCameraError);
    try {
        project_points({{0, 0, 2}, {0, 0, -1}}, pose, k);
        FAIL("expected BehindCameraError");
    } catch (const BehindCameraError& e) {
        REQUIRE(std::string(e.what()).find("point 1") != std::string::npos);
    }
}

TEST_CASE("backproject single pixel and constant plane") {
    const CameraIntrinsics k = test_camera();
    DepthImage d;
    d.width = k.width;
    d.height = k.height;
    d.meters.assign(static_cast<size_t>(k.width) * k.height, 0.0f);
    d.meters[static_cast<size_t>(64) * k.width + 64] = 2.0f; // pixel (64,64) == (cx,cy)
    const auto pts = backproject_depth(d, k, RigidTransform{});
    REQUIRE(pts.size() == 1);
    REQUIRE(pts[0].x == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(pts[0].y == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(pts[0].z == Catch::Approx(2.0));

    // constant-depth plane: every world point sits at the same distance
    // along the camera forward axis
    Rng rng(5);
    const RigidTransform cam_to_world = random_transform(rng);
    DepthImage plane;
    plane.width = plane.height = 16;
    plane.meters.assign(256, 3.5f);
    CameraIntrinsics k16 = k;
    k16.width = k16.height = 16;
    k16.cx = k16.cy = 8.0;
    const auto cloud = backproject_depth(plane, k16, cam_to_world);
    REQUIRE(cloud.size() == 256);
    const Vec3 fwd = cam_to_world.rotation.col(2); // camera z in world
    const Vec3 origin = cam_to_world.translation;
    for (const auto& p : cloud) REQUIRE((p - origin).dot(fwd) == Catch::Approx(3.5).margin(1e-9));
}

TEST_CASE("backproject then project returns pixel coordinates") {
    const CameraIntrinsics k = test_camera();
    Rng rng(9);
    const RigidTransform cam_to_world = random_transform(rng);
    DepthImage d;
    d.width = d.height = 32;
    d.meters.assign(1024, 0.0f);
    CameraIntrinsics k32 = k;
    k32.width = k32.height = 32;
    k32.cx = k32.cy = 16.0;
    std::vector<std::pair<int, int>> pixels;
    for (int i = 0; i < 50; ++i) {
        const int x = static_cast<int>(rng.uniform_int(32));
        const int y = static_cast<int>(rng.uniform_int(32));
        d.meters[static_cast<size_t>(y) * 32 + x] = static_cast<float>(rng.uniform(0.5, 5.0));
    }
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            if (d.meters[static_cast<size_t>(y) * 32 + x] > 0) pixels.push_back({x, y});

    const auto cloud = backproject_depth(d, k32, cam_to_world);
    REQUIRE(cloud.size() == pixels.size());
    const auto reproj = project_points(cloud, invert_transform(cam_to_world), k32);
    for (size_t i = 0; i < reproj.size(); ++i) {
        REQUIRE(reproj[i].x == Catch::Approx(pixels[i].first).margin(1e-6));
        REQUIRE(reproj[i].y == Catch::Approx(pixels[i].second).margin(1e-6));
    }
}

TEST_CASE("azimuth/elevation convention anchors") {
    // frontal view: camera on +X looking back at the object
    const Mat3 frontal = azel_to_rotation({0.0, 0.0});
    const ViewAngles a = rotation_to_azel(frontal);
    REQUIRE(a.azimuth_deg == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(a.elevation_deg == Catch::Approx(0.0).margin(1e-12));
    // the frontal camera looks along -X
    REQUIRE(frontal.row(2).x == Catch::Approx(-1.0));

    const ViewAngles turn = rotation_to_azel(azel_to_rotation({90.0, 0.0}));
    REQUIRE(turn.azimuth_deg == Catch::Approx(90.0).margin(1e-9));
    REQUIRE(turn.elevation_deg == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("azel round trip over random angles") {
    Rng rng(13);
    for (int i = 0; i < 200; ++i) {
        const ViewAngles in{rng.uniform(0.0, 360.0), rng.uniform(-89.5, 89.5)};
        const Mat3 r = azel_to_rotation(in);
        REQUIRE(RigidTransform{r, {}}.is_valid(1e-9));
        const ViewAngles out = rotation_to_azel(r);
        double daz = std::abs(out.azimuth_deg - in.azimuth_deg);
        daz = std::min(daz, 360.0 - daz);
        REQUIRE(daz < 1e-9);
        REQUIRE(out.elevation_deg == Catch::Approx(in.elevation_deg).margin(1e-9));
    }
}

TEST_CASE("gimbal convention: straight-down view has azimuth zero") {
    const ViewAngles top = rotation_to_azel(azel_to_rotation({123.0, 90.0}));
    REQUIRE(top.azimuth_deg == Catch::Approx(0.0).margin(1e-9));
    REQUIRE(top.elevation_deg == Catch::Approx(90.0).margin(1e-9));
}
