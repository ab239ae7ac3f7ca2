#pragma once

#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "posekit/errors.hpp"

namespace posekit {

// All geometry runs in double. Angles at the API boundary are degrees.

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        const double n = norm();
        if (n == 0.0) throw DegenerateError("cannot normalize zero vector");
        return {x / n, y / n, z / n};
    }
};

struct Mat3 {
    // row-major
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3 identity() { return Mat3{}; }
    static Mat3 zero() { return Mat3{{0, 0, 0, 0, 0, 0, 0, 0, 0}}; }
    static Mat3 from_rows(const Vec3& r0, const Vec3& r1, const Vec3& r2) {
        return Mat3{{r0.x, r0.y, r0.z, r1.x, r1.y, r1.z, r2.x, r2.y, r2.z}};
    }

    double& operator()(int r, int c) { return m[static_cast<size_t>(3 * r + c)]; }
    double operator()(int r, int c) const { return m[static_cast<size_t>(3 * r + c)]; }

    Vec3 row(int r) const { return {m[3 * r + 0u], m[3 * r + 1u], m[3 * r + 2u]}; }
    Vec3 col(int c) const { return {m[0u + c], m[3u + c], m[6u + c]}; }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
    Mat3 operator*(const Mat3& o) const {
        Mat3 r = zero();
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) {
                const double a = (*this)(i, k);
                for (int j = 0; j < 3; ++j) r(i, j) += a * o(k, j);
            }
        return r;
    }
    Mat3 transposed() const {
        return Mat3{{m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]}};
    }
    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }
};

inline double deg_to_rad(double d) { return d * M_PI / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / M_PI; }

// Wrap into [0, 360).
inline double wrap_deg(double a) {
    double w = std::fmod(a, 360.0);
    if (w < 0) w += 360.0;
    return w;
}

inline Mat3 rot_x(double deg) {
    const double c = std::cos(deg_to_rad(deg)), s = std::sin(deg_to_rad(deg));
    return Mat3{{1, 0, 0, 0, c, -s, 0, s, c}};
}
inline Mat3 rot_y(double deg) {
    const double c = std::cos(deg_to_rad(deg)), s = std::sin(deg_to_rad(deg));
    return Mat3{{c, 0, s, 0, 1, 0, -s, 0, c}};
}
inline Mat3 rot_z(double deg) {
    const double c = std::cos(deg_to_rad(deg)), s = std::sin(deg_to_rad(deg));
    return Mat3{{c, -s, 0, s, c, 0, 0, 0, 1}};
}

// Rodrigues exponential of an axis-angle vector (radians).
inline Mat3 so3_exp(const Vec3& w) {
    const double theta = w.norm();
    Mat3 K = Mat3::zero();
    K(0, 1) = -w.z; K(0, 2) = w.y;
    K(1, 0) = w.z;  K(1, 2) = -w.x;
    K(2, 0) = -w.y; K(2, 1) = w.x;
    Mat3 R = Mat3::identity();
    if (theta < 1e-12) {
        for (int i = 0; i < 9; ++i) R.m[static_cast<size_t>(i)] += K.m[static_cast<size_t>(i)];
        return R;
    }
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / (theta * theta);
    const Mat3 K2 = K * K;
    for (int i = 0; i < 9; ++i)
        R.m[static_cast<size_t>(i)] += a * K.m[static_cast<size_t>(i)] + b * K2.m[static_cast<size_t>(i)];
    return R;
}

// Geodesic distance between two rotations, radians.
inline double rotation_geodesic(const Mat3& a, const Mat3& b) {
    const Mat3 d = a.transposed() * b;
    double tr = d(0, 0) + d(1, 1) + d(2, 2);
    double c = (tr - 1.0) / 2.0;
    c = std::min(1.0, std::max(-1.0, c));
    return std::acos(c);
}

// Rigid map X -> R*X + t. Which frames it connects is up to the caller; the
// labeling pipeline uses both world->camera and camera->world instances.
struct RigidTransform {
    Mat3 rotation;
    Vec3 translation;

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

    bool is_valid(double tol = 1e-9) const {
        const Mat3 should_be_i = rotation.transposed() * rotation;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const double want = i == j ? 1.0 : 0.0;
                if (std::abs(should_be_i(i, j) - want) > tol) return false;
            }
        return std::abs(rotation.det() - 1.0) <= tol;
    }
};

inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    // (a o b)(x) = a(b(x))
    return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

// Inverse of a rigid transform: (R^T, -R^T t).
inline RigidTransform invert_transform(const RigidTransform& t) {
    const Mat3 rt = t.rotation.transposed();
    return {rt, -(rt * t.translation)};
}

struct CameraIntrinsics {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;

    void validate() const {
        if (!(fx > 0) || !(fy > 0)) throw ConfigError("intrinsics: focal lengths must be > 0");
        if (width < 1 || height < 1) throw ConfigError("intrinsics: bad image size");
        if (cx < 0 || cx >= width || cy < 0 || cy >= height)
            throw ConfigError("intrinsics: principal point outside image");
    }
};

struct Vec2 {
    double x = 0, y = 0;
};

// Oriented 3D box: center, per-axis dimensions, rotation into the world.
struct Bbox3D {
    Vec3 center;
    Vec3 dims;
    Mat3 orientation;

    void validate() const {
        if (!(dims.x > 0 && dims.y > 0 && dims.z > 0))
            throw ConfigError("bbox3d: dims must be positive");
    }
};

// The eight corners in a fixed sign order on (x,y,z) half-dims:
//   0:+++  1:-++  2:+-+  3:--+  4:++-  5:-+-  6:+--  7:---
// i.e. bit k of the index flips axis k. Corner i is center + R * offset_i.
inline std::array<Vec3, 8> bbox_corners(const Bbox3D& box) {
    box.validate();
    std::array<Vec3, 8> out;
    const Vec3 h = box.dims * 0.5;
    for (int i = 0; i < 8; ++i) {
        const Vec3 off{(i & 1) ? -h.x : h.x, (i & 2) ? -h.y : h.y, (i & 4) ? -h.z : h.z};
        out[static_cast<size_t>(i)] = box.center + box.orientation * off;
    }
    return out;
}

// Pinhole projection of world points through a world->camera transform.
// Any non-positive depth is an error naming the offending point.
inline std::vector<Vec2> project_points(const std::vector<Vec3>& points_world,
                                        const RigidTransform& world_to_camera,
                                        const CameraIntrinsics& k) {
    k.validate();
    std::vector<Vec2> out;
    out.reserve(points_world.size());
    for (size_t i = 0; i < points_world.size(); ++i) {
        const Vec3 pc = world_to_camera.apply(points_world[i]);
        if (!(pc.z > 0)) {
            std::ostringstream os;
            os << "point " << i << " behind camera (z=" << pc.z << ")";
            throw BehindCameraError(os.str());
        }
        out.push_back({k.fx * pc.x / pc.z + k.cx, k.fy * pc.y / pc.z + k.cy});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Symmetric Jacobi eigensolver, used for the DLT nullspace (12x12) and small
// covariance tests. Returns eigenvalues ascending with matching eigenvectors
// in columns.
// ---------------------------------------------------------------------------
namespace detail {

inline void jacobi_eigen_sym(std::vector<double>& a, int n, std::vector<double>& eigvals,
                             std::vector<double>& eigvecs) {
    eigvecs.assign(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) eigvecs[static_cast<size_t>(i) * n + i] = 1.0;
    auto A = [&](int r, int c) -> double& { return a[static_cast<size_t>(r) * n + c]; };
    auto V = [&](int r, int c) -> double& { return eigvecs[static_cast<size_t>(r) * n + c]; };

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
        if (off < 1e-26) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(A(p, q)) < 1e-300) continue;
                const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int i = 0; i < n; ++i) {
                    const double aip = A(i, p), aiq = A(i, q);
                    A(i, p) = c * aip - s * aiq;
                    A(i, q) = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double api = A(p, i), aqi = A(q, i);
                    A(p, i) = c * api - s * aqi;
                    A(q, i) = s * api + c * aqi;
                }
                for (int i = 0; i < n; ++i) {
                    const double vip = V(i, p), viq = V(i, q);
                    V(i, p) = c * vip - s * viq;
                    V(i, q) = s * vip + c * viq;
                }
            }
        }
    }
    eigvals.assign(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) eigvals[static_cast<size_t>(i)] = A(i, i);
    // sort ascending, permuting eigenvector columns alongside
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    std::sort(order.begin(), order.end(),
              [&](int l, int r) { return eigvals[static_cast<size_t>(l)] < eigvals[static_cast<size_t>(r)]; });
    std::vector<double> vals(static_cast<size_t>(n));
    std::vector<double> vecs(static_cast<size_t>(n) * n);
    for (int c = 0; c < n; ++c) {
        vals[static_cast<size_t>(c)] = eigvals[static_cast<size_t>(order[static_cast<size_t>(c)])];
        for (int r = 0; r < n; ++r)
            vecs[static_cast<size_t>(r) * n + c] = V(r, order[static_cast<size_t>(c)]);
    }
    eigvals = std::move(vals);
    eigvecs = std::move(vecs);
}

// Nearest rotation to M in Frobenius norm via SVD of M (through M^T M).
inline Mat3 orthonormalize_rotation(const Mat3& M) {
    std::vector<double> mtm(9);
    const Mat3 S = M.transposed() * M;
    for (int i = 0; i < 9; ++i) mtm[static_cast<size_t>(i)] = S.m[static_cast<size_t>(i)];
    std::vector<double> evals, evecs;
    jacobi_eigen_sym(mtm, 3, evals, evecs);
    // columns of Vt are eigenvectors; build U = M V diag(1/sqrt(eval))
    Mat3 V;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) V(r, c) = evecs[static_cast<size_t>(r) * 3 + c];
    Mat3 U = Mat3::zero();
    for (int c = 0; c < 3; ++c) {
        const double sv = std::sqrt(std::max(evals[static_cast<size_t>(c)], 1e-300));
        const Vec3 u = (M * V.col(c)) * (1.0 / sv);
        U(0, c) = u.x;
        U(1, c) = u.y;
        U(2, c) = u.z;
    }
    Mat3 R = U * V.transposed();
    if (R.det() < 0) {
        // flip the column of U with the smallest singular value (first)
        U(0, 0) = -U(0, 0);
        U(1, 0) = -U(1, 0);
        U(2, 0) = -U(2, 0);
        R = U * V.transposed();
    }
    return R;
}

// Solve the 6x6 normal equations by Gaussian elimination with partial pivot.
inline bool solve6(std::array<std::array<double, 7>, 6>& a, std::array<double, 6>& x) {
    for (int col = 0; col < 6; ++col) {
        int piv = col;
        for (int r = col + 1; r < 6; ++r)
            if (std::abs(a[static_cast<size_t>(r)][static_cast<size_t>(col)]) >
                std::abs(a[static_cast<size_t>(piv)][static_cast<size_t>(col)]))
                piv = r;
        if (std::abs(a[static_cast<size_t>(piv)][static_cast<size_t>(col)]) < 1e-14) return false;
        std::swap(a[static_cast<size_t>(col)], a[static_cast<size_t>(piv)]);
        for (int r = col + 1; r < 6; ++r) {
            const double f = a[static_cast<size_t>(r)][static_cast<size_t>(col)] /
                             a[static_cast<size_t>(col)][static_cast<size_t>(col)];
            for (int c = col; c < 7; ++c)
                a[static_cast<size_t>(r)][static_cast<size_t>(c)] -=
                    f * a[static_cast<size_t>(col)][static_cast<size_t>(c)];
        }
    }
    for (int r = 5; r >= 0; --r) {
        double s = a[static_cast<size_t>(r)][6];
        for (int c = r + 1; c < 6; ++c) s -= a[static_cast<size_t>(r)][static_cast<size_t>(c)] * x[static_cast<size_t>(c)];
        x[static_cast<size_t>(r)] = s / a[static_cast<size_t>(r)][static_cast<size_t>(r)];
    }
    return true;
}

} // namespace detail

// ---------------------------------------------------------------------------
// PnP: DLT initialization on normalized image coordinates followed by
// Gauss-Newton reprojection refinement. Needs >= 6 correspondences that are
// not collinear. Returns the object->camera transform.
// ---------------------------------------------------------------------------
inline RigidTransform solve_pnp(const std::vector<Vec2>& points2d,
                                const std::vector<Vec3>& points3d,
                                const CameraIntrinsics& k) {
    k.validate();
    const size_t n = points3d.size();
    if (points2d.size() != n) throw ConfigError("solve_pnp: correspondence count mismatch");
    if (n < 6) throw DegenerateError("solve_pnp: need at least 6 correspondences");

    // collinearity test on the 3D points via covariance eigenvalues
    Vec3 mean{0, 0, 0};
    for (const auto& p : points3d) mean = mean + p;
    mean = mean * (1.0 / static_cast<double>(n));
    {
        std::vector<double> cov(9, 0.0);
        for (const auto& p : points3d) {
            const Vec3 d = p - mean;
            const double v[3] = {d.x, d.y, d.z};
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) cov[static_cast<size_t>(3 * r + c)] += v[r] * v[c];
        }
        std::vector<double> evals, evecs;
        detail::jacobi_eigen_sym(cov, 3, evals, evecs);
        if (evals[2] <= 0 || evals[1] / evals[2] < 1e-10)
            throw DegenerateError("solve_pnp: 3D points are collinear");
    }

    // normalized image coordinates
    std::vector<Vec2> xn(n);
    for (size_t i = 0; i < n; ++i)
        xn[i] = {(points2d[i].x - k.cx) / k.fx, (points2d[i].y - k.cy) / k.fy};

    // 3D normalization (centroid to origin, mean radius sqrt(3))
    double scale = 0.0;
    for (const auto& p : points3d) scale += (p - mean).norm();
    scale /= static_cast<double>(n);
    if (scale < 1e-12) throw DegenerateError("solve_pnp: 3D points coincide");
    const double s3 = std::sqrt(3.0) / scale;

    // DLT rows for P = [R|t] acting on normalized 3D points
    const int cols = 12;
    std::vector<double> ata(static_cast<size_t>(cols) * cols, 0.0);
    auto accumulate_row = [&](const std::array<double, 12>& row) {
        for (int r = 0; r < cols; ++r)
            for (int c = 0; c < cols; ++c)
                ata[static_cast<size_t>(r) * cols + c] += row[static_cast<size_t>(r)] * row[static_cast<size_t>(c)];
    };
    for (size_t i = 0; i < n; ++i) {
        const Vec3 q = (points3d[i] - mean) * s3;
        const double X = q.x, Y = q.y, Z = q.z;
        const double u = xn[i].x, v = xn[i].y;
        accumulate_row({X, Y, Z, 1, 0, 0, 0, 0, -u * X, -u * Y, -u * Z, -u});
        accumulate_row({0, 0, 0, 0, X, Y, Z, 1, -v * X, -v * Y, -v * Z, -v});
    }
    std::vector<double> evals, evecs;
    detail::jacobi_eigen_sym(ata, cols, evals, evecs);
    // smallest eigenvector = flattened P with rows (p1 p2 | p3 p4-ish layout below)
    std::array<double, 12> p{};
    for (int i = 0; i < 12; ++i) p[static_cast<size_t>(i)] = evecs[static_cast<size_t>(i) * cols + 0];

    Mat3 M{{p[0], p[1], p[2], p[4], p[5], p[6], p[8], p[9], p[10]}};
    Vec3 tv{p[3], p[7], p[11]};
    if (M.det() < 0) {
        for (auto& x : M.m) x = -x;
        tv = -tv;
    }
    // scale so M becomes a rotation (unit row norms on average)
    const double norm_sum = M.row(0).norm() + M.row(1).norm() + M.row(2).norm();
    if (norm_sum < 1e-30) throw DegenerateError("solve_pnp: rank-deficient DLT system");
    const double lambda = 3.0 / norm_sum;
    for (auto& x : M.m) x *= lambda;
    tv = tv * lambda;

    Mat3 R = detail::orthonormalize_rotation(M);
    // undo the 3D normalization: X_cam = R*(s3*(X-mean)) + t
    Vec3 t = tv * (1.0 / s3) - R * mean;

    // Gauss-Newton on the normalized reprojection residuals
    bool converged = false;
    double final_cost = 0.0;
    for (int iter = 0; iter < 100 && !converged; ++iter) {
        std::array<std::array<double, 7>, 6> normal{};
        for (auto& row : normal) row.fill(0.0);
        double cost = 0.0;
        bool behind = false;
        for (size_t i = 0; i < n; ++i) {
            const Vec3 pc = R * points3d[i] + t;
            if (pc.z <= 1e-9) {
                behind = true;
                break;
            }
            const double iz = 1.0 / pc.z;
            const double rx = pc.x * iz - xn[i].x;
            const double ry = pc.y * iz - xn[i].y;
            cost += rx * rx + ry * ry;
            // omega is a left-applied rotation vector: dpc/domega = -[R*X]_x, dpc/dt = I
            const Vec3 v = R * points3d[i];
            const double dpc_dw[3][3] = {{0, v.z, -v.y}, {-v.z, 0, v.x}, {v.y, -v.x, 0}};
            double Jx[6], Jy[6];
            for (int c = 0; c < 3; ++c) {
                const double dxc = dpc_dw[0][c], dyc = dpc_dw[1][c], dzc = dpc_dw[2][c];
                Jx[c] = (dxc - pc.x * iz * dzc) * iz;
                Jy[c] = (dyc - pc.y * iz * dzc) * iz;
            }
            // translation columns
            Jx[3] = iz; Jx[4] = 0;  Jx[5] = -pc.x * iz * iz;
            Jy[3] = 0;  Jy[4] = iz; Jy[5] = -pc.y * iz * iz;
            for (int r = 0; r < 6; ++r) {
                for (int c = 0; c < 6; ++c)
                    normal[static_cast<size_t>(r)][static_cast<size_t>(c)] += Jx[r] * Jx[c] + Jy[r] * Jy[c];
                normal[static_cast<size_t>(r)][6] -= Jx[r] * rx + Jy[r] * ry;
            }
        }
        if (behind) throw SolverError("solve_pnp: refinement drove points behind the camera");
        final_cost = cost;
        std::array<double, 6> delta{};
        if (!detail::solve6(normal, delta)) {
            if (cost < 1e-16) break; // at the optimum, a singular update is fine
            throw DegenerateError("solve_pnp: singular normal equations");
        }
        const Vec3 w{delta[0], delta[1], delta[2]};
        const Vec3 dt{delta[3], delta[4], delta[5]};
        R = so3_exp(w) * R;
        t = t + dt;
        if (w.norm() + dt.norm() < 1e-14) converged = true;
    }
    if (!converged && !(final_cost < 1e-10)) {
        std::ostringstream os;
        os << "solve_pnp: no convergence, rms residual "
           << std::sqrt(final_cost / static_cast<double>(n));
        throw SolverError(os.str());
    }
    R = detail::orthonormalize_rotation(R);
    return {R, t};
}

// ---------------------------------------------------------------------------
// Depth backprojection. Depth is meters; zero or negative entries are
// invalid and skipped. Pixel (x,y) backprojects at image coordinate (x,y).
// ---------------------------------------------------------------------------
struct DepthImage {
    int width = 0, height = 0;
    std::vector<float> meters; // row-major, width*height

    float at(int x, int y) const { return meters[static_cast<size_t>(y) * width + x]; }
};

inline std::vector<Vec3> backproject_depth(const DepthImage& depth, const CameraIntrinsics& k,
                                           const RigidTransform& camera_to_world,
                                           int stride = 1) {
    k.validate();
    if (stride < 1) throw ConfigError("backproject_depth: stride must be >= 1");
    if (static_cast<size_t>(depth.width) * depth.height != depth.meters.size())
        throw ConfigError("backproject_depth: depth buffer size mismatch");
    std::vector<Vec3> out;
    for (int y = 0; y < depth.height; y += stride) {
        for (int x = 0; x < depth.width; x += stride) {
            const double d = depth.at(x, y);
            if (!(d > 0)) continue;
            const Vec3 pc{(x - k.cx) * d / k.fx, (y - k.cy) * d / k.fy, d};
            out.push_back(camera_to_world.apply(pc));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Viewing-angle convention, shared by every module:
//   - azimuth 0 = frontal view (camera on the object's +X axis), increasing
//     counter-clockwise seen from above (+X toward +Y);
//   - elevation = angle of the camera above the object's XY plane (+Z up);
//   - at |elevation| = 90 the azimuth is defined as 0.
// The rotation is object->camera for a camera looking at the object center
// with +Z-up as the up hint (OpenCV axes: x right, y down, z forward).
// ---------------------------------------------------------------------------
struct ViewAngles {
    double azimuth_deg = 0.0;   // [0, 360)
    double elevation_deg = 0.0; // [-90, 90]
};

inline Mat3 azel_to_rotation(const ViewAngles& a) {
    const double az = deg_to_rad(wrap_deg(a.azimuth_deg));
    const double el = deg_to_rad(a.elevation_deg);
    if (std::abs(a.elevation_deg) > 90.0 + 1e-12)
        throw ConfigError("azel_to_rotation: elevation out of [-90, 90]");
    // direction from object center toward the camera
    const Vec3 d{std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
    const Vec3 forward = -d; // camera z
    Vec3 up{0, 0, 1};
    if (std::abs(d.z) > 1.0 - 1e-12) up = {1, 0, 0}; // gimbal: pick a fixed hint
    const Vec3 right = forward.cross(up).normalized();
    const Vec3 down = forward.cross(right); // y axis points down in image space
    // rows are the camera basis vectors expressed in object coordinates
    return Mat3::from_rows(right, down, forward);
}

inline ViewAngles rotation_to_azel(const Mat3& object_to_camera) {
    // camera viewing direction in object coordinates is the third row
    const Vec3 f = object_to_camera.row(2);
    const Vec3 d = -f; // object->camera direction
    const double el = std::asin(std::min(1.0, std::max(-1.0, d.z)));
    double az = 0.0;
    if (std::abs(d.z) < 1.0 - 1e-12) az = std::atan2(d.y, d.x);
    ViewAngles out;
    out.azimuth_deg = wrap_deg(rad_to_deg(az));
    out.elevation_deg = rad_to_deg(el);
    return out;
}

} // namespace posekit
