#include "nsp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nsp {

Box3 enlarge(const Box3& b, double factor) {
    Vec3 c = b.center();
    Vec3 h = 0.5 * factor * b.extent();
    return {c - h, c + h};
}

double triangle_area(Vec3 a, Vec3 b, Vec3 c) {
    return 0.5 * norm(cross(b - a, c - a));
}

double mesh_area(const TriangleMesh& mesh) {
    double total = 0.0;
    for (const auto& t : mesh.triangles)
        total += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]],
                               mesh.vertices[t[2]]);
    return total;
}

GridSpec GridSpec::make(const Box3& box, int n) {
    if (n <= 0) throw std::invalid_argument("grid resolution must be positive");
    Vec3 e = box.extent();
    if (e.x <= 0.0 || e.y <= 0.0 || e.z <= 0.0)
        throw std::invalid_argument("grid domain has non-positive extent");
    double h = e.x / n;
    double tol = 4.0 * h * 1e-15 * n;
    if (std::abs(e.y / n - h) > tol || std::abs(e.z / n - h) > tol)
        throw std::invalid_argument("grid domain must be a cube");
    GridSpec g;
    g.box = box;
    g.n = n;
    g.cell_size = h;
    return g;
}

CellIndex cell_of(const GridSpec& grid, Vec3 p) {
    if (!grid.box.contains(p))
        throw std::invalid_argument("point outside grid domain");
    auto axis = [&](double v, double lo) {
        int i = int(std::floor((v - lo) / grid.cell_size));
        // Upper domain boundary belongs to the last cell.
        return std::clamp(i, 0, grid.n - 1);
    };
    return {axis(p.x, grid.box.lo.x), axis(p.y, grid.box.lo.y),
            axis(p.z, grid.box.lo.z)};
}

Box3 cell_box(const GridSpec& grid, CellIndex c) {
    Vec3 lo = grid.corner_pos(c.i, c.j, c.k);
    Vec3 hi = {lo.x + grid.cell_size, lo.y + grid.cell_size,
               lo.z + grid.cell_size};
    return {lo, hi};
}

NormalizeResult normalize_cloud(const PointCloud& cloud, const Domain& domain,
                                double margin) {
    if (cloud.points.empty())
        throw std::invalid_argument("cannot normalize an empty cloud");
    if (margin < 0.0 || margin >= 1.0)
        throw std::invalid_argument("margin must lie in [0, 1)");

    Vec3 lo = cloud.points[0], hi = cloud.points[0];
    for (const Vec3& p : cloud.points) {
        if (!finite(p)) throw std::invalid_argument("cloud contains non-finite point");
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    Vec3 ext = hi - lo;
    double span = std::max({ext.x, ext.y, ext.z});
    if (span <= 0.0)
        throw std::invalid_argument("cloud has zero extent, cannot normalize");

    Vec3 dext = domain.box.extent();
    // margin is the total unused fraction of the domain extent (split evenly
    // across both sides), so 0.1 maps onto [-0.9, 0.9] of the unit cube.
    double target = std::min({dext.x, dext.y, dext.z}) * (1.0 - margin);
    double scale = target / span;
    Vec3 ccenter = 0.5 * (lo + hi);
    Vec3 offset = domain.box.center() - scale * ccenter;

    NormalizeResult r;
    r.cloud = cloud;
    r.scale = scale;
    r.offset = offset;
    for (Vec3& p : r.cloud.points) p = scale * p + offset;
    r.cloud.scale = scale;
    r.cloud.offset = offset;
    return r;
}

}  // namespace nsp
