#include <catch2/catch_amalgamated.hpp>

#include "posekit/silhouette.hpp"

using namespace posekit;

namespace {

MeshModel box_mesh(double dx, double dy, double dz) {
    MeshModel m;
    add_cuboid(m, {0, 0, 0}, {dx, dy, dz});
    return m;
}

std::vector<Mask> render_gallery() {
    const CameraIntrinsics k = dmask_intrinsics();
    std::vector<Mask> gallery;
    gallery.push_back(render_silhouette(box_mesh(1, 1, 1), {0, 9}, k, kDmaskSize));
    gallery.push_back(render_silhouette(box_mesh(1, 0.4, 0.7), {30, 27}, k, kDmaskSize));
    gallery.push_back(render_silhouette(box_mesh(0.3, 1.2, 0.5), {70, 45}, k, kDmaskSize));
    gallery.push_back(render_silhouette(box_mesh(1.5, 0.2, 0.2), {120, 9}, k, kDmaskSize));
    return gallery;
}

Mask scale_whole_mask(const Mask& m, double s) {
    // scale about the canvas center with nearest-neighbor sampling
    Mask out(m.width, m.height);
    const double cx = m.width / 2.0, cy = m.height / 2.0;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            const int sx = static_cast<int>(std::lround((x + 0.5 - cx) / s + cx - 0.5));
            const int sy = static_cast<int>(std::lround((y + 0.5 - cy) / s + cy - 0.5));
            if (sx >= 0 && sx < m.width && sy >= 0 && sy < m.height)
                out.set(x, y, m.at(sx, sy) != 0);
        }
    return out;
}

} // namespace

TEST_CASE("self-match returns the entry with score exactly 1") {
    const auto gallery = render_gallery();
    for (size_t q = 0; q < gallery.size(); ++q) {
        const MatchResult r = template_match(gallery[q], gallery);
        REQUIRE(r.index == static_cast<int>(q));
        REQUIRE(r.score == 1.0);
    }
}

TEST_CASE("0.8-scaled query is recovered with a high score") {
    const auto gallery = render_gallery();
    for (size_t q = 0; q < gallery.size(); ++q) {
        const Mask query = scale_whole_mask(gallery[q], 0.8);
        const MatchResult r = template_match(query, gallery, {0.8, 1.0, 1.25});
        INFO("query " << q << " -> " << r.index << " score " << r.score);
        REQUIRE(r.index == static_cast<int>(q));
        REQUIRE(r.score >= 0.95);
    }
}

TEST_CASE("complement of the only gallery entry scores negative") {
    const auto gallery = render_gallery();
    Mask comp(gallery[0].width, gallery[0].height);
    for (int y = 0; y < comp.height; ++y)
        for (int x = 0; x < comp.width; ++x) comp.set(x, y, gallery[0].at(x, y) == 0);
    // at matched scale there is a single full-canvas alignment: exactly -1
    const MatchResult r = template_match(comp, {gallery[0]}, {1.0});
    REQUIRE(r.index == 0);
    REQUIRE(r.score == -1.0);
    // across the scale pyramid a shrunk complement can pick up weak positive
    // overlap, but never anything resembling a match
    const MatchResult multi = template_match(comp, {gallery[0]});
    REQUIRE(multi.score < 0.5);
}

TEST_CASE("empty query or gallery are errors; ties break low") {
    const auto gallery = render_gallery();
    Mask empty(kDmaskSize, kDmaskSize);
    REQUIRE_THROWS_AS(template_match(empty, gallery), ConfigError);
    REQUIRE_THROWS_AS(template_match(gallery[0], {}), ConfigError);

    // identical entries: the lower index wins
    const std::vector<Mask> dup = {gallery[1], gallery[1], gallery[1]};
    const MatchResult r = template_match(gallery[1], dup);
    REQUIRE(r.index == 0);
    REQUIRE(r.score == 1.0);
}

TEST_CASE("scale 1.0 included means an exact copy always wins outright") {
    const auto gallery = render_gallery();
    const MatchResult r = template_match(gallery[2], gallery, {1.0});
    REQUIRE(r.index == 2);
    REQUIRE(r.score == 1.0);
}
