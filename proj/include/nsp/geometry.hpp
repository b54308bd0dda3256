#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace nsp {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
inline Vec3 operator*(Vec3 a, double s) { return s * a; }
inline Vec3 operator/(Vec3 a, double s) { return {a.x / s, a.y / s, a.z / s}; }
inline Vec3& operator+=(Vec3& a, Vec3 b) { a = a + b; return a; }
inline Vec3& operator-=(Vec3& a, Vec3 b) { a = a - b; return a; }

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline double dist(Vec3 a, Vec3 b) { return norm(a - b); }
inline bool finite(Vec3 a) {
    return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

struct Box3 {
    Vec3 lo, hi;

    Vec3 extent() const { return hi - lo; }
    Vec3 center() const { return 0.5 * (lo + hi); }
    bool contains(Vec3 p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
               p.z >= lo.z && p.z <= hi.z;
    }
};

// Centered scaling: the box center stays fixed, each side length is
// multiplied by `factor`.
Box3 enlarge(const Box3& b, double factor);

// Axis-aligned bounding domain for field evaluation; default is the unit
// training cube.
struct Domain {
    Box3 box{{-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0}};
};

struct PointCloud {
    std::vector<Vec3> points;
    std::string source;
    // Affine map applied on ingest: stored = scale * original + offset.
    double scale = 1.0;
    Vec3 offset{0.0, 0.0, 0.0};

    size_t size() const { return points.size(); }
};

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<uint32_t, 3>> triangles;
};

struct QuadMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<uint32_t, 4>> quads;
};

double triangle_area(Vec3 a, Vec3 b, Vec3 c);
double mesh_area(const TriangleMesh& mesh);

struct CellIndex {
    int i = 0, j = 0, k = 0;
};

// Uniform cubic grid over a domain: n cells per axis, (n+1)^3 corner lattice.
struct GridSpec {
    Box3 box;
    int n = 0;
    double cell_size = 0.0;

    // Throws if the domain is not a cube (per-axis cell sizes must agree).
    static GridSpec make(const Box3& box, int n);

    uint64_t cell_count() const { return uint64_t(n) * n * n; }
    uint64_t linear(CellIndex c) const {
        return (uint64_t(c.k) * n + c.j) * n + c.i;
    }
    CellIndex unlinear(uint64_t id) const {
        int i = int(id % n), j = int((id / n) % n), k = int(id / (uint64_t(n) * n));
        return {i, j, k};
    }
    // Corner lattice has n+1 points per axis.
    uint64_t corner_linear(int i, int j, int k) const {
        uint64_t m = uint64_t(n) + 1;
        return (uint64_t(k) * m + j) * m + i;
    }
    Vec3 corner_pos(int i, int j, int k) const {
        return {box.lo.x + i * cell_size, box.lo.y + j * cell_size,
                box.lo.z + k * cell_size};
    }
};

// Cell containing p. Boundaries are lower-inclusive / upper-exclusive, except
// the last cell per axis which is upper-inclusive, so every point of the
// domain maps to exactly one cell. Throws if p lies outside the domain.
CellIndex cell_of(const GridSpec& grid, Vec3 p);

Box3 cell_box(const GridSpec& grid, CellIndex c);

struct NormalizeResult {
    PointCloud cloud;
    double scale = 1.0;  // stored = scale * original + offset
    Vec3 offset{0.0, 0.0, 0.0};
};

// Maps a cloud into `domain` shrunk by the total fraction `margin` with one
// isotropic scale: the longest cloud axis exactly spans the shrunk box and
// the cloud center lands on the domain center (margin 0.1 puts the long axis
// on [-0.9, 0.9] of the unit cube). Throws on an empty or zero-extent cloud.
NormalizeResult normalize_cloud(const PointCloud& cloud, const Domain& domain,
                                double margin = 0.1);

}  // namespace nsp
