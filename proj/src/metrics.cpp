#include "nsp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "nsp/sampler.hpp"

namespace nsp {

namespace {

// Minimum possible distance from a query in (or clamped to) its home cell to
// any cell whose index differs by R along some axis: the gap spans at least
// R-1 whole cells of the smallest stride.
double ring_lower_bound(int ring, double min_cell) {
    return (ring - 1) * min_cell;
}

}  // namespace

NearestNeighborIndex::NearestNeighborIndex(std::vector<Vec3> points)
    : points_(std::move(points)) {
    if (points_.empty())
        throw std::invalid_argument("NearestNeighborIndex: empty point set");

    Vec3 lo = points_[0], hi = points_[0];
    for (const Vec3& p : points_) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    origin_ = lo;
    Vec3 ext = hi - lo;

    // Aim for a couple of points per cell; collapse degenerate axes.
    int target = std::max(
        1, int(std::floor(std::cbrt(double(points_.size()) / 2.0))));
    target = std::min(target, 128);
    nx_ = ext.x > 1e-12 ? target : 1;
    ny_ = ext.y > 1e-12 ? target : 1;
    nz_ = ext.z > 1e-12 ? target : 1;
    cell_ = {nx_ > 1 ? ext.x / nx_ : 1.0, ny_ > 1 ? ext.y / ny_ : 1.0,
             nz_ > 1 ? ext.z / nz_ : 1.0};

    const size_t ncells = size_t(nx_) * ny_ * nz_;
    auto flat = [&](int ix, int iy, int iz) {
        return (size_t(iz) * ny_ + iy) * nx_ + ix;
    };
    std::vector<uint32_t> counts(ncells, 0);
    std::vector<size_t> cell_of(points_.size());
    for (size_t i = 0; i < points_.size(); ++i) {
        const Vec3& p = points_[i];
        cell_of[i] = flat(clamp_cell(p.x, origin_.x, cell_.x, nx_),
                          clamp_cell(p.y, origin_.y, cell_.y, ny_),
                          clamp_cell(p.z, origin_.z, cell_.z, nz_));
        counts[cell_of[i]]++;
    }
    cell_start_.assign(ncells + 1, 0);
    for (size_t c = 0; c < ncells; ++c)
        cell_start_[c + 1] = cell_start_[c] + counts[c];
    order_.resize(points_.size());
    std::vector<uint32_t> cursor(cell_start_.begin(), cell_start_.end() - 1);
    for (size_t i = 0; i < points_.size(); ++i)
        order_[cursor[cell_of[i]]++] = uint32_t(i);
}

int NearestNeighborIndex::clamp_cell(double t, double lo, double extent,
                                     int n) const {
    if (n <= 1) return 0;
    int i = int(std::floor((t - lo) / extent));
    return std::clamp(i, 0, n - 1);
}

NearestNeighborIndex::Hit NearestNeighborIndex::query(Vec3 x) const {
    const int cx = clamp_cell(x.x, origin_.x, cell_.x, nx_);
    const int cy = clamp_cell(x.y, origin_.y, cell_.y, ny_);
    const int cz = clamp_cell(x.z, origin_.z, cell_.z, nz_);

    double min_cell = std::numeric_limits<double>::infinity();
    if (nx_ > 1) min_cell = std::min(min_cell, cell_.x);
    if (ny_ > 1) min_cell = std::min(min_cell, cell_.y);
    if (nz_ > 1) min_cell = std::min(min_cell, cell_.z);

    Hit best{0, std::numeric_limits<double>::infinity()};
    auto scan = [&](int ix, int iy, int iz) {
        if (ix < 0 || ix >= nx_ || iy < 0 || iy >= ny_ || iz < 0 || iz >= nz_)
            return;
        size_t c = (size_t(iz) * ny_ + iy) * nx_ + ix;
        for (uint32_t k = cell_start_[c]; k < cell_start_[c + 1]; ++k) {
            double d = dist(x, points_[order_[k]]);
            if (d < best.distance) best = {order_[k], d};
        }
    };

    const int max_ring = std::max({nx_, ny_, nz_});
    for (int r = 0; r <= max_ring; ++r) {
        if (r > 0 && best.distance <= ring_lower_bound(r, min_cell)) break;
        if (r == 0) {
            scan(cx, cy, cz);
            continue;
        }
        // The six faces of the Chebyshev shell at radius r.
        for (int ix = cx - r; ix <= cx + r; ++ix)
            for (int iy = cy - r; iy <= cy + r; ++iy) {
                scan(ix, iy, cz - r);
                scan(ix, iy, cz + r);
            }
        for (int ix = cx - r; ix <= cx + r; ++ix)
            for (int iz = cz - r + 1; iz <= cz + r - 1; ++iz) {
                scan(ix, cy - r, iz);
                scan(ix, cy + r, iz);
            }
        for (int iy = cy - r + 1; iy <= cy + r - 1; ++iy)
            for (int iz = cz - r + 1; iz <= cz + r - 1; ++iz) {
                scan(cx - r, iy, iz);
                scan(cx + r, iy, iz);
            }
    }
    return best;
}

namespace {

void directed_stats(const std::vector<Vec3>& from,
                    const NearestNeighborIndex& to, double& mean, double& mx) {
    double sum = 0.0;
    mx = 0.0;
    for (const Vec3& q : from) {
        double d = to.query(q).distance;
        sum += d;
        mx = std::max(mx, d);
    }
    mean = sum / double(from.size());
}

}  // namespace

MetricReport compare_clouds(const PointCloud& a, const PointCloud& b) {
    if (a.points.empty() || b.points.empty())
        throw std::invalid_argument("compare_clouds: empty cloud");
    NearestNeighborIndex ia(a.points), ib(b.points);
    MetricReport r;
    r.count_a = a.points.size();
    r.count_b = b.points.size();
    directed_stats(a.points, ib, r.mean_a_to_b, r.max_a_to_b);
    directed_stats(b.points, ia, r.mean_b_to_a, r.max_b_to_a);
    r.chamfer = 0.5 * (r.mean_a_to_b + r.mean_b_to_a);
    r.hausdorff = std::max(r.max_a_to_b, r.max_b_to_a);
    return r;
}

double chamfer(const PointCloud& a, const PointCloud& b) {
    return compare_clouds(a, b).chamfer;
}

double hausdorff(const PointCloud& a, const PointCloud& b) {
    return compare_clouds(a, b).hausdorff;
}

PointCloud sample_mesh_surface(const TriangleMesh& mesh, size_t count,
                               uint64_t seed) {
    if (mesh.triangles.empty())
        throw std::invalid_argument("sample_mesh_surface: empty mesh");
    if (count < 1)
        throw std::invalid_argument("sample_mesh_surface: count must be >= 1");

    std::vector<double> cdf(mesh.triangles.size());
    double total = 0.0;
    for (size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        total += triangle_area(mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                               mesh.vertices[tri[2]]);
        cdf[t] = total;
    }
    if (!(total > 0.0))
        throw std::invalid_argument("sample_mesh_surface: zero total area");

    std::mt19937_64 rng(split_seed(seed, Stream::kInit));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    PointCloud cloud;
    cloud.points.reserve(count);
    cloud.source = "mesh_samples";
    for (size_t i = 0; i < count; ++i) {
        double pick = unit(rng) * total;
        size_t t = size_t(std::lower_bound(cdf.begin(), cdf.end(), pick) -
                          cdf.begin());
        if (t >= cdf.size()) t = cdf.size() - 1;
        const auto& tri = mesh.triangles[t];
        Vec3 a = mesh.vertices[tri[0]], b = mesh.vertices[tri[1]],
             c = mesh.vertices[tri[2]];
        double u = unit(rng), v = unit(rng);
        if (u + v > 1.0) {  // fold into the triangle for uniform coverage
            u = 1.0 - u;
            v = 1.0 - v;
        }
        cloud.points.push_back(a + u * (b - a) + v * (c - a));
    }
    return cloud;
}

}  // namespace nsp
