#pragma once

#include "nsp/geometry.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace nsp {

// Deterministic purpose streams derived from one master seed, so adding or
// reordering draws in one stream never shifts another.
enum class Stream : uint64_t {
    kInit = 0,
    kSurface = 1,
    kDomain = 2,
    kCorruption = 3,
    kExtraction = 4,
};

uint64_t split_seed(uint64_t master, uint64_t stream_id);
inline uint64_t split_seed(uint64_t master, Stream s) {
    return split_seed(master, uint64_t(s));
}

struct SamplerConfig {
    uint64_t seed = 0;
    int surface_batch = 20000;
    int domain_batch = 20000;
};

// Draws training batches. Surface batches sample the cloud uniformly with
// replacement, except when the cloud is no larger than the batch, in which
// case the whole cloud is returned once per epoch. Domain batches are uniform
// over the box.
class BatchSampler {
  public:
    BatchSampler(const PointCloud& cloud, const Domain& domain,
                 const SamplerConfig& config);

    std::vector<Vec3> surface_batch();
    std::vector<Vec3> domain_batch();

  private:
    const PointCloud& cloud_;
    Domain domain_;
    SamplerConfig config_;
    std::mt19937_64 surface_rng_;
    std::mt19937_64 domain_rng_;
};

// Adds iid Gaussian noise (sigma per coordinate) to every point.
PointCloud add_gaussian_noise(const PointCloud& cloud, double sigma, uint64_t seed);

// Keeps round(keep_fraction * n) points, chosen uniformly without
// replacement, in their original order.
PointCloud subsample(const PointCloud& cloud, double keep_fraction, uint64_t seed);

}  // namespace nsp
