#include "nsp/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nsp {

uint64_t split_seed(uint64_t master, uint64_t stream_id) {
    // splitmix64 over the master seed offset by the stream index.
    uint64_t z = master + (stream_id + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

BatchSampler::BatchSampler(const PointCloud& cloud, const Domain& domain,
                           const SamplerConfig& config)
    : cloud_(cloud),
      domain_(domain),
      config_(config),
      surface_rng_(split_seed(config.seed, Stream::kSurface)),
      domain_rng_(split_seed(config.seed, Stream::kDomain)) {
    if (cloud.points.empty())
        throw std::invalid_argument("sampler needs a nonempty cloud");
    if (config.surface_batch <= 0 || config.domain_batch <= 0)
        throw std::invalid_argument("batch sizes must be positive");
}

std::vector<Vec3> BatchSampler::surface_batch() {
    size_t n = cloud_.points.size();
    if (n <= size_t(config_.surface_batch)) return cloud_.points;
    std::uniform_int_distribution<size_t> pick(0, n - 1);
    std::vector<Vec3> out(config_.surface_batch);
    for (Vec3& p : out) p = cloud_.points[pick(surface_rng_)];
    return out;
}

std::vector<Vec3> BatchSampler::domain_batch() {
    std::uniform_real_distribution<double> ux(domain_.box.lo.x, domain_.box.hi.x);
    std::uniform_real_distribution<double> uy(domain_.box.lo.y, domain_.box.hi.y);
    std::uniform_real_distribution<double> uz(domain_.box.lo.z, domain_.box.hi.z);
    std::vector<Vec3> out(config_.domain_batch);
    for (Vec3& p : out) {
        p.x = ux(domain_rng_);
        p.y = uy(domain_rng_);
        p.z = uz(domain_rng_);
    }
    return out;
}

PointCloud add_gaussian_noise(const PointCloud& cloud, double sigma, uint64_t seed) {
    if (sigma < 0.0) throw std::invalid_argument("noise sigma must be nonnegative");
    PointCloud out = cloud;
    std::mt19937_64 rng(split_seed(seed, Stream::kCorruption));
    std::normal_distribution<double> g(0.0, sigma);
    for (Vec3& p : out.points) {
        p.x += g(rng);
        p.y += g(rng);
        p.z += g(rng);
    }
    return out;
}

PointCloud subsample(const PointCloud& cloud, double keep_fraction, uint64_t seed) {
    if (keep_fraction <= 0.0 || keep_fraction > 1.0)
        throw std::invalid_argument("keep fraction must lie in (0, 1]");
    size_t n = cloud.points.size();
    size_t k = size_t(std::llround(keep_fraction * double(n)));
    if (k == 0) k = 1;
    if (k > n) k = n;

    // Partial Fisher-Yates over the index set, then restore original order.
    std::vector<uint32_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = uint32_t(i);
    std::mt19937_64 rng(split_seed(seed, Stream::kCorruption));
    for (size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());

    PointCloud out;
    out.source = cloud.source;
    out.scale = cloud.scale;
    out.offset = cloud.offset;
    out.points.reserve(k);
    for (uint32_t i : idx) out.points.push_back(cloud.points[i]);
    return out;
}

}  // namespace nsp
