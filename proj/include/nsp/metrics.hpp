#pragma once

// Quantitative comparison of reconstructions against references: symmetric
// Chamfer and Hausdorff distances between point clouds, area-weighted mesh
// sampling, and the grid-accelerated nearest-neighbor index behind them.

#include <cstdint>
#include <vector>

#include "nsp/geometry.hpp"

namespace nsp {

// Uniform-grid spatial index over a fixed point set.  Queries return the
// exact nearest point (identical result to an exhaustive scan); the grid
// only prunes cells that provably cannot contain a closer point.
class NearestNeighborIndex {
  public:
    // Throws std::invalid_argument on an empty cloud.
    explicit NearestNeighborIndex(std::vector<Vec3> points);

    struct Hit {
        size_t index = 0;
        double distance = 0.0;
    };
    Hit query(Vec3 x) const;

    const std::vector<Vec3>& points() const { return points_; }

  private:
    std::vector<Vec3> points_;
    Vec3 origin_{0, 0, 0};
    Vec3 cell_{1, 1, 1};  // per-axis cell extents
    int nx_ = 1, ny_ = 1, nz_ = 1;
    std::vector<uint32_t> cell_start_;  // CSR layout: per-cell ranges into order_
    std::vector<uint32_t> order_;

    int clamp_cell(double t, double lo, double extent, int n) const;
};

// Chamfer distance: half-sum of the two directed mean nearest-neighbor
// distances (unsquared).  Hausdorff: max of the two directed maxima.
struct MetricReport {
    double chamfer = 0.0;
    double hausdorff = 0.0;
    double mean_a_to_b = 0.0;
    double mean_b_to_a = 0.0;
    double max_a_to_b = 0.0;
    double max_b_to_a = 0.0;
    size_t count_a = 0;
    size_t count_b = 0;
};

// Throws std::invalid_argument when either cloud is empty.
MetricReport compare_clouds(const PointCloud& a, const PointCloud& b);
double chamfer(const PointCloud& a, const PointCloud& b);
double hausdorff(const PointCloud& a, const PointCloud& b);

// Area-weighted uniform sampling of a triangle mesh surface.  Throws
// std::invalid_argument on an empty mesh, zero count, or zero total area.
PointCloud sample_mesh_surface(const TriangleMesh& mesh, size_t count,
                               uint64_t seed);

}  // namespace nsp
