#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "posekit/binning.hpp"
#include "posekit/errors.hpp"
#include "posekit/geometry.hpp"
#include "posekit/mask.hpp"
#include "posekit/mesh.hpp"
#include "posekit/parallel.hpp"

namespace posekit {

// D-mask rendering and retrieval conventions:
//   - masks are 128x128 with focal length 160 px, principal point at the
//     image center;
//   - the camera sits on a sphere around the mesh centroid at the distance
//     where the bounding-sphere diameter spans 80% of the image height, so
//     no orientation ever clips;
//   - rasterization is pixel-center coverage, no anti-aliasing, no depth
//     buffer for plain silhouettes.
constexpr int kDmaskSize = 128;

inline CameraIntrinsics dmask_intrinsics(int size = kDmaskSize) {
    CameraIntrinsics k;
    k.fx = k.fy = 160.0 * size / kDmaskSize;
    k.cx = k.cy = size / 2.0;
    k.width = k.height = size;
    return k;
}

// Distance that makes the bounding-sphere diameter span 80% of the image
// height under focal fy.
inline double autofit_distance(const MeshModel& mesh, const CameraIntrinsics& k) {
    const double diam = 2.0 * mesh.bounding_radius();
    if (!(diam > 0)) throw DegenerateError("autofit: mesh has zero extent");
    return k.fy * diam / (0.8 * k.height);
}

// World->camera transform for a camera on the view sphere looking at the
// mesh centroid.
inline RigidTransform viewpoint_camera(const MeshModel& mesh, const ViewAngles& view,
                                       const CameraIntrinsics& k) {
    const Mat3 r = azel_to_rotation(view);
    const double dist = autofit_distance(mesh, k);
    const Vec3 c = mesh.centroid();
    const double az = deg_to_rad(wrap_deg(view.azimuth_deg));
    const double el = deg_to_rad(view.elevation_deg);
    const Vec3 dir{std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
    const Vec3 cam_pos = c + dir * dist;
    return {r, -(r * cam_pos)};
}

namespace detail {

struct ProjectedVertex {
    double u, v, z;
};

inline std::vector<ProjectedVertex> project_vertices(const MeshModel& mesh,
                                                     const RigidTransform& world_to_cam,
                                                     const CameraIntrinsics& k) {
    std::vector<ProjectedVertex> out(mesh.vertices.size());
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3 pc = world_to_cam.apply(mesh.vertices[i]);
        if (pc.z > 1e-9) {
            out[i] = {k.fx * pc.x / pc.z + k.cx, k.fy * pc.y / pc.z + k.cy, pc.z};
        } else {
            out[i] = {0, 0, -1}; // flagged, faces touching it are skipped
        }
    }
    return out;
}

inline double edge(double ax, double ay, double bx, double by, double px, double py) {
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

} // namespace detail

// Binary silhouette of the mesh seen from the given viewpoint. A pixel is
// foreground iff its center falls inside any projected triangle.
inline Mask render_silhouette(const MeshModel& mesh, const ViewAngles& view,
                              const CameraIntrinsics& k, int out_size) {
    if (mesh.vertices.empty() || mesh.faces.empty())
        throw ConfigError("render_silhouette: empty mesh");
    CameraIntrinsics kk = k;
    kk.width = kk.height = out_size;
    kk.validate();
    const RigidTransform cam = viewpoint_camera(mesh, view, kk);
    const auto pv = detail::project_vertices(mesh, cam, kk);

    Mask m(out_size, out_size);
    for (const auto& f : mesh.faces) {
        const auto& a = pv[static_cast<size_t>(f[0])];
        const auto& b = pv[static_cast<size_t>(f[1])];
        const auto& c = pv[static_cast<size_t>(f[2])];
        if (a.z <= 0 || b.z <= 0 || c.z <= 0) continue;
        double area2 = detail::edge(a.u, a.v, b.u, b.v, c.u, c.v);
        if (area2 == 0.0) continue; // degenerate triangle
        const double flip = area2 > 0 ? 1.0 : -1.0;
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.u, b.u, c.u}) - 0.5)));
        const int x1 = std::min(out_size - 1,
                                static_cast<int>(std::ceil(std::max({a.u, b.u, c.u}) + 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.v, b.v, c.v}) - 0.5)));
        const int y1 = std::min(out_size - 1,
                                static_cast<int>(std::ceil(std::max({a.v, b.v, c.v}) + 0.5)));
        for (int y = y0; y <= y1; ++y) {
            const double py = y + 0.5;
            for (int x = x0; x <= x1; ++x) {
                const double px = x + 0.5;
                const double w0 = flip * detail::edge(b.u, b.v, c.u, c.v, px, py);
                const double w1 = flip * detail::edge(c.u, c.v, a.u, a.v, px, py);
                const double w2 = flip * detail::edge(a.u, a.v, b.u, b.v, px, py);
                if (w0 >= 0 && w1 >= 0 && w2 >= 0) m.set(x, y, true);
            }
        }
    }
    return m;
}

// Depth + camera-space normal render used by the synthetic data generator.
struct RenderedView {
    Mask mask;
    std::vector<float> depth;       // meters, 0 where background
    std::vector<float> normal_cam;  // 3 channels per pixel, camera frame
};

inline RenderedView render_geometry(const MeshModel& mesh, const ViewAngles& view,
                                    const CameraIntrinsics& k, int out_size) {
    if (mesh.vertices.empty() || mesh.faces.empty())
        throw ConfigError("render_geometry: empty mesh");
    CameraIntrinsics kk = k;
    kk.width = kk.height = out_size;
    kk.validate();
    const RigidTransform cam = viewpoint_camera(mesh, view, kk);
    const auto pv = detail::project_vertices(mesh, cam, kk);

    RenderedView rv;
    rv.mask = Mask(out_size, out_size);
    rv.depth.assign(static_cast<size_t>(out_size) * out_size, 0.0f);
    rv.normal_cam.assign(static_cast<size_t>(out_size) * out_size * 3, 0.0f);
    std::vector<double> zbuf(static_cast<size_t>(out_size) * out_size,
                             std::numeric_limits<double>::infinity());

    for (const auto& f : mesh.faces) {
        const auto& a = pv[static_cast<size_t>(f[0])];
        const auto& b = pv[static_cast<size_t>(f[1])];
        const auto& c = pv[static_cast<size_t>(f[2])];
        if (a.z <= 0 || b.z <= 0 || c.z <= 0) continue;
        double area2 = detail::edge(a.u, a.v, b.u, b.v, c.u, c.v);
        if (area2 == 0.0) continue;

        // face normal in camera space, oriented toward the camera
        const Vec3 va = cam.apply(mesh.vertices[static_cast<size_t>(f[0])]);
        const Vec3 vb = cam.apply(mesh.vertices[static_cast<size_t>(f[1])]);
        const Vec3 vc = cam.apply(mesh.vertices[static_cast<size_t>(f[2])]);
        Vec3 n = (vb - va).cross(vc - va);
        const double nn = n.norm();
        if (nn == 0.0) continue;
        n = n * (1.0 / nn);
        if (n.z > 0) n = -n;

        const double flip = area2 > 0 ? 1.0 : -1.0;
        const double inv_area = 1.0 / (flip * area2); // 1/|area2|; weights carry the flip
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.u, b.u, c.u}) - 0.5)));
        const int x1 = std::min(out_size - 1,
                                static_cast<int>(std::ceil(std::max({a.u, b.u, c.u}) + 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.v, b.v, c.v}) - 0.5)));
        const int y1 = std::min(out_size - 1,
                                static_cast<int>(std::ceil(std::max({a.v, b.v, c.v}) + 0.5)));
        for (int y = y0; y <= y1; ++y) {
            const double py = y + 0.5;
            for (int x = x0; x <= x1; ++x) {
                const double px = x + 0.5;
                const double w0 = flip * detail::edge(b.u, b.v, c.u, c.v, px, py);
                const double w1 = flip * detail::edge(c.u, c.v, a.u, a.v, px, py);
                const double w2 = flip * detail::edge(a.u, a.v, b.u, b.v, px, py);
                if (w0 < 0 || w1 < 0 || w2 < 0) continue;
                const double l0 = w0 * inv_area, l1 = w1 * inv_area, l2 = w2 * inv_area;
                // perspective-correct depth from interpolated 1/z
                const double inv_z = l0 / a.z + l1 / b.z + l2 / c.z;
                if (inv_z <= 0) continue;
                const double z = 1.0 / inv_z;
                const size_t idx = static_cast<size_t>(y) * out_size + x;
                if (z < zbuf[idx]) {
                    zbuf[idx] = z;
                    rv.mask.bits[idx] = 1;
                    rv.depth[idx] = static_cast<float>(z);
                    rv.normal_cam[3 * idx + 0] = static_cast<float>(n.x);
                    rv.normal_cam[3 * idx + 1] = static_cast<float>(n.y);
                    rv.normal_cam[3 * idx + 2] = static_cast<float>(n.z);
                }
            }
        }
    }
    return rv;
}

// ---------------------------------------------------------------------------
// D-mask sets: one silhouette per (azimuth bin center, elevation bin center).
// ---------------------------------------------------------------------------
struct DmaskSet {
    std::string mesh_id;
    int n_az = 0, n_el = 0;
    std::vector<Mask> masks; // index az * n_el + el

    const Mask& at(int az_bin, int el_bin) const {
        return masks[static_cast<size_t>(az_bin) * n_el + el_bin];
    }
};

inline DmaskSet generate_dmasks(const MeshModel& mesh, const BinSpec& az_spec,
                                const BinSpec& el_spec, int size = kDmaskSize) {
    if (!az_spec.wraparound || el_spec.wraparound)
        throw ConfigError("generate_dmasks: azimuth spec must wrap, elevation must not");
    DmaskSet set;
    set.mesh_id = mesh.id;
    set.n_az = az_spec.n_bins;
    set.n_el = el_spec.n_bins;
    set.masks.assign(static_cast<size_t>(set.n_az) * set.n_el, Mask());
    const CameraIntrinsics k = dmask_intrinsics(size);
    parallel_for(set.n_az * set.n_el, [&](int i) {
        const int az_bin = i / set.n_el;
        const int el_bin = i % set.n_el;
        const ViewAngles view{az_spec.center(az_bin), el_spec.center(el_bin)};
        try {
            set.masks[static_cast<size_t>(i)] = render_silhouette(mesh, view, k, size);
        } catch (const Error& e) {
            throw Error("dmask render failed at az=" + std::to_string(view.azimuth_deg) +
                        " el=" + std::to_string(view.elevation_deg) + ": " + e.what());
        }
    });
    return set;
}

// ---------------------------------------------------------------------------
// Template matching: normalized cross-correlation of binary images over a
// scale set, sliding the scaled query crop across the gallery canvas. All
// sums are integer so a self-match scores exactly 1.0.
// ---------------------------------------------------------------------------
namespace detail {

struct BitImage {
    int width = 0, height = 0, words_per_row = 0;
    std::vector<uint64_t> words;

    explicit BitImage(const Mask& m)
        : width(m.width), height(m.height), words_per_row((m.width + 63) / 64),
          words(static_cast<size_t>(height) * words_per_row, 0) {
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                if (m.at(x, y))
                    words[static_cast<size_t>(y) * words_per_row + (x >> 6)] |= 1ull
                                                                                << (x & 63);
    }
    const uint64_t* row(int y) const { return words.data() + static_cast<size_t>(y) * words_per_row; }
};

// query crop rows shifted right by ox, in gallery word space
struct ShiftedRows {
    int words_per_row = 0;
    std::vector<uint64_t> words;
    const uint64_t* row(int y) const { return words.data() + static_cast<size_t>(y) * words_per_row; }
};

inline ShiftedRows shift_rows(const std::vector<uint64_t>& crop_words, int crop_h,
                              int crop_words_per_row, int ox, int dst_words_per_row) {
    ShiftedRows out;
    out.words_per_row = dst_words_per_row;
    out.words.assign(static_cast<size_t>(crop_h) * dst_words_per_row, 0);
    const int word_shift = ox >> 6;
    const int bit_shift = ox & 63;
    for (int y = 0; y < crop_h; ++y) {
        const uint64_t* src = crop_words.data() + static_cast<size_t>(y) * crop_words_per_row;
        uint64_t* dst = out.words.data() + static_cast<size_t>(y) * dst_words_per_row;
        for (int w = 0; w < crop_words_per_row; ++w) {
            const uint64_t v = src[w];
            if (!v) continue;
            const int dw = w + word_shift;
            if (dw < dst_words_per_row) dst[dw] |= bit_shift ? v << bit_shift : v;
            if (bit_shift && dw + 1 < dst_words_per_row) dst[dw + 1] |= v >> (64 - bit_shift);
        }
    }
    return out;
}

// Nearest-neighbor crop scaling; pixel centers, ratio derived from the
// integer output size so a downscale/upscale pair is lossless on rectangles.
inline Mask scale_crop(const Mask& crop, double s) {
    const int ow = std::max(1, static_cast<int>(std::lround(crop.width * s)));
    const int oh = std::max(1, static_cast<int>(std::lround(crop.height * s)));
    Mask out(ow, oh);
    for (int y = 0; y < oh; ++y) {
        const int sy = std::min(crop.height - 1,
                                static_cast<int>((y + 0.5) * crop.height / oh));
        for (int x = 0; x < ow; ++x) {
            const int sx = std::min(crop.width - 1,
                                    static_cast<int>((x + 0.5) * crop.width / ow));
            out.set(x, y, crop.at(sx, sy) != 0);
        }
    }
    return out;
}

inline Mask crop_to_bbox(const Mask& m) {
    int x0, y0, x1, y1;
    if (!m.bbox(x0, y0, x1, y1)) throw ConfigError("cannot crop an empty mask");
    Mask out(x1 - x0 + 1, y1 - y0 + 1);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) out.set(x - x0, y - y0, m.at(x, y) != 0);
    return out;
}

} // namespace detail

struct MatchResult {
    int index = 0;
    double score = -1.0;
};

// Score of the query against a single gallery mask; the best correlation
// over all scales and all placements of the scaled query crop inside the
// gallery canvas.
inline double template_match_score(const Mask& query, const Mask& gallery,
                                   const std::vector<double>& scales) {
    if (query.empty_fg()) throw ConfigError("template_match: query mask is empty");
    const int gw = gallery.width, gh = gallery.height;
    const int64_t canvas = static_cast<int64_t>(gw) * gh;
    const int64_t sa = static_cast<int64_t>(gallery.count());
    const int64_t da = canvas * sa - sa * sa;
    if (da == 0) return -1.0; // constant gallery image, correlation undefined

    const detail::BitImage gbits(gallery);
    const Mask crop = detail::crop_to_bbox(query);
    double best = -1.0;

    for (double s : scales) {
        const Mask scaled = detail::scale_crop(crop, s);
        if (scaled.width > gw || scaled.height > gh) continue;
        const int64_t sb = static_cast<int64_t>(scaled.count());
        const int64_t db = canvas * sb - sb * sb;
        if (db == 0) continue;
        const detail::BitImage qbits(scaled);

        for (int ox = 0; ox + scaled.width <= gw; ++ox) {
            const detail::ShiftedRows shifted = detail::shift_rows(
                qbits.words, scaled.height, qbits.words_per_row, ox, gbits.words_per_row);
            for (int oy = 0; oy + scaled.height <= gh; ++oy) {
                int64_t sab = 0;
                for (int y = 0; y < scaled.height; ++y) {
                    const uint64_t* g = gbits.row(oy + y);
                    const uint64_t* q = shifted.row(y);
                    for (int w = 0; w < gbits.words_per_row; ++w)
                        sab += __builtin_popcountll(g[w] & q[w]);
                }
                const int64_t num = canvas * sab - sa * sb;
                double score;
                if (num == da && da == db) {
                    score = 1.0; // identical content, keep it exact
                } else {
                    score = static_cast<double>(num) /
                            std::sqrt(static_cast<double>(da) * static_cast<double>(db));
                }
                if (score > best) best = std::min(1.0, std::max(-1.0, score));
            }
        }
    }
    return best;
}

// Best gallery entry for the query; ties go to the lower index.
inline MatchResult template_match(const Mask& query, const std::vector<Mask>& gallery,
                                  const std::vector<double>& scales = {0.8, 1.0, 1.25}) {
    if (gallery.empty()) throw ConfigError("template_match: empty gallery");
    if (query.empty_fg()) throw ConfigError("template_match: query mask is empty");
    MatchResult best;
    best.index = 0;
    best.score = -std::numeric_limits<double>::infinity();
    std::vector<double> scores(gallery.size());
    parallel_for(static_cast<int>(gallery.size()), [&](int i) {
        scores[static_cast<size_t>(i)] =
            gallery[static_cast<size_t>(i)].empty_fg()
                ? -1.0
                : template_match_score(query, gallery[static_cast<size_t>(i)], scales);
    });
    for (size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] > best.score) {
            best.score = scores[i];
            best.index = static_cast<int>(i);
        }
    }
    if (!std::isfinite(best.score)) best.score = -1.0;
    return best;
}

} // namespace posekit
