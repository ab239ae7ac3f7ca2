#pragma once

#include <array>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "posekit/errors.hpp"
#include "posekit/geometry.hpp"

namespace posekit {

// Triangle mesh in object coordinates (meters). Only the OBJ subset
// `v x y z` / `f i j k` (1-indexed triangles) is understood; other line
// types are ignored.
struct MeshModel {
    std::string id;
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;

    Vec3 centroid() const {
        Vec3 c{0, 0, 0};
        for (const auto& v : vertices) c = c + v;
        const double n = static_cast<double>(vertices.size());
        return n > 0 ? c * (1.0 / n) : c;
    }

    double bounding_radius() const {
        const Vec3 c = centroid();
        double r = 0.0;
        for (const auto& v : vertices) r = std::max(r, (v - c).norm());
        return r;
    }
};

// Loader-level validation: indices in range, at least 4 vertices that do not
// all lie in one plane.
inline void validate_mesh(const MeshModel& mesh, const std::string& origin) {
    if (mesh.vertices.size() < 4)
        throw ParseError("mesh needs >= 4 vertices: " + origin);
    for (const auto& f : mesh.faces) {
        for (int idx : f) {
            if (idx < 0 || idx >= static_cast<int>(mesh.vertices.size()))
                throw ParseError("face index out of range in " + origin);
        }
    }
    Vec3 mean{0, 0, 0};
    for (const auto& v : mesh.vertices) mean = mean + v;
    mean = mean * (1.0 / static_cast<double>(mesh.vertices.size()));
    std::vector<double> cov(9, 0.0);
    for (const auto& v : mesh.vertices) {
        const Vec3 d = v - mean;
        const double a[3] = {d.x, d.y, d.z};
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) cov[static_cast<size_t>(3 * r + c)] += a[r] * a[c];
    }
    std::vector<double> evals, evecs;
    detail::jacobi_eigen_sym(cov, 3, evals, evecs);
    if (evals[2] <= 0 || evals[0] / evals[2] < 1e-12)
        throw ParseError("mesh vertices are coplanar: " + origin);
}

inline MeshModel load_mesh_obj(const std::string& path, const std::string& id = "") {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open mesh file: " + path);
    MeshModel mesh;
    mesh.id = id.empty() ? path : id;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        std::istringstream is(line);
        std::string tag;
        if (!(is >> tag)) continue;
        if (tag == "v") {
            Vec3 v;
            if (!(is >> v.x >> v.y >> v.z)) {
                throw ParseError("bad vertex at " + path + ":" + std::to_string(lineno));
            }
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::array<int, 3> idx{};
            std::string tok;
            int got = 0;
            while (is >> tok) {
                if (got == 3)
                    throw ParseError("non-triangle face at " + path + ":" + std::to_string(lineno));
                // accept "i", "i/..", "i//.." forms but use the vertex index only
                try {
                    idx[static_cast<size_t>(got)] = std::stoi(tok) - 1;
                } catch (const std::exception&) {
                    throw ParseError("bad face index at " + path + ":" + std::to_string(lineno));
                }
                ++got;
            }
            if (got != 3)
                throw ParseError("non-triangle face at " + path + ":" + std::to_string(lineno));
            mesh.faces.push_back(idx);
        }
        // anything else: ignored per the format subset
    }
    validate_mesh(mesh, path);
    return mesh;
}

inline void save_mesh_obj(const std::string& path, const MeshModel& mesh) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open for write: " + path);
    std::ostringstream os;
    os.precision(9);
    for (const auto& v : mesh.vertices) os << "v " << v.x << " " << v.y << " " << v.z << "\n";
    for (const auto& fc : mesh.faces)
        os << "f " << fc[0] + 1 << " " << fc[1] + 1 << " " << fc[2] + 1 << "\n";
    f << os.str();
    if (!f) throw IoError("write failed: " + path);
}

// Appends the 12 triangles of an axis-aligned cuboid (outward winding).
inline void add_cuboid(MeshModel& mesh, const Vec3& center, const Vec3& dims) {
    const int base = static_cast<int>(mesh.vertices.size());
    const Vec3 h = dims * 0.5;
    for (int i = 0; i < 8; ++i) {
        mesh.vertices.push_back(center + Vec3{(i & 1) ? h.x : -h.x, (i & 2) ? h.y : -h.y,
                                              (i & 4) ? h.z : -h.z});
    }
    static const int quads[6][4] = {
        {0, 1, 3, 2}, // z-
        {4, 6, 7, 5}, // z+
        {0, 4, 5, 1}, // y-
        {2, 3, 7, 6}, // y+
        {0, 2, 6, 4}, // x-
        {1, 5, 7, 3}, // x+
    };
    for (const auto& q : quads) {
        mesh.faces.push_back({base + q[0], base + q[1], base + q[2]});
        mesh.faces.push_back({base + q[0], base + q[2], base + q[3]});
    }
}

} // namespace posekit
