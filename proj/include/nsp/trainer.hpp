#pragma once

// Optimization loop: Adam with a staircase learning-rate decay, fresh sample
// batches each epoch, per-epoch loss logging, and checkpointing.  A
// non-finite loss or gradient aborts and preserves the last good parameters.

#include <cstdint>
#include <string>
#include <vector>

#include "nsp/field.hpp"
#include "nsp/geometry.hpp"
#include "nsp/losses.hpp"
#include "nsp/sampler.hpp"

namespace nsp {

struct TrainConfig {
    int epochs = 60000;
    double lr0 = 1e-3;
    double decay_factor = 0.99;  // lr multiplier applied every decay_every epochs
    int decay_every = 2000;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    LossWeights weights;
    SamplerConfig sampler;       // sampler.seed also seeds the weight init
    double guard_eps = 1e-12;
    size_t chunk = 128;          // points recorded per tape pass
    int checkpoint_every = 0;    // epochs between checkpoints; 0 = final only
    std::string out_dir;         // empty = keep everything in memory
    int progress_every = 0;      // stdout progress cadence; 0 = silent

    void validate() const;  // throws std::invalid_argument
};

// lr(e) = lr0 * decay_factor^floor(e / decay_every); non-increasing in e.
double lr_at(const TrainConfig& cfg, int epoch);

struct AdamState {
    std::vector<double> m, v;  // first/second moment estimates
    int64_t t = 0;             // completed steps

    explicit AdamState(size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// Standard bias-corrected Adam update, in place.  Throws
// std::invalid_argument on shape mismatch or non-finite gradients.
void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

struct TrainLogRow {
    int epoch = 0;
    double lr = 0.0;
    LossBreakdown loss;  // evaluated on this epoch's batches, before the step
};

struct TrainResult {
    Parameters params;  // final, or last good when aborted
    std::vector<TrainLogRow> log;
    bool aborted = false;
    int abort_epoch = -1;
    std::string abort_reason;
};

// Full training run.  The cloud must lie inside the domain (normalize
// first).  Deterministic for a fixed (model, config) on one thread: reruns
// produce bit-identical logs and parameters.
TrainResult train(const PointCloud& cloud, const MlpConfig& model,
                  const TrainConfig& cfg);

// CSV schema: a comment header naming the optimizer constants, then
// "epoch,lr,manifold,gm,sp,ma,total,eikonal" rows at full precision.
std::string format_train_log(const std::vector<TrainLogRow>& log,
                             const TrainConfig& cfg);
void write_train_log(const std::string& path,
                     const std::vector<TrainLogRow>& log,
                     const TrainConfig& cfg);

}  // namespace nsp
