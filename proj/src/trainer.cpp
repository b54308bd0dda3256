#include "nsp/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "nsp/autodiff.hpp"

namespace nsp {

void TrainConfig::validate() const {
    auto bad = [](const std::string& what) {
        throw std::invalid_argument("invalid train config: " + what);
    };
    if (epochs < 0) bad("epochs must be >= 0");
    if (!(lr0 > 0.0) || !std::isfinite(lr0)) bad("lr0 must be positive");
    if (!(decay_factor > 0.0) || decay_factor > 1.0)
        bad("decay_factor must lie in (0, 1]");
    if (decay_every < 1) bad("decay_every must be >= 1");
    if (!(adam_beta1 >= 0.0) || adam_beta1 >= 1.0) bad("beta1 must lie in [0, 1)");
    if (!(adam_beta2 >= 0.0) || adam_beta2 >= 1.0) bad("beta2 must lie in [0, 1)");
    if (!(adam_eps > 0.0)) bad("adam eps must be positive");
    if (chunk < 1) bad("chunk must be >= 1");
    if (checkpoint_every < 0) bad("checkpoint_every must be >= 0");
    if (progress_every < 0) bad("progress_every must be >= 0");
    if (!(guard_eps > 0.0)) bad("guard_eps must be positive");
}

double lr_at(const TrainConfig& cfg, int epoch) {
    if (epoch < 0) throw std::invalid_argument("lr_at: negative epoch");
    return cfg.lr0 * std::pow(cfg.decay_factor, epoch / cfg.decay_every);
}

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, double lr, double beta1, double beta2,
               double eps) {
    if (params.size() != grads.size() || params.size() != state.m.size() ||
        params.size() != state.v.size())
        throw std::invalid_argument("adam_step: mismatched sizes");
    if (!(lr > 0.0)) throw std::invalid_argument("adam_step: lr must be positive");
    for (double g : grads)
        if (!std::isfinite(g))
            throw std::invalid_argument("adam_step: non-finite gradient");

    state.t += 1;
    const double c1 = 1.0 - std::pow(beta1, double(state.t));
    const double c2 = 1.0 - std::pow(beta2, double(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
        double mhat = state.m[i] / c1;
        double vhat = state.v[i] / c2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

namespace {

std::string checkpoint_name(const std::string& dir, const std::string& stem) {
    return dir + "/" + stem + ".bin";
}

// One full gradient evaluation: fresh batches, chunked tape passes, fixed
// chunk order so the floating-point reduction is reproducible.
struct EpochEval {
    LossBreakdown loss;
    std::vector<double> grads;
};

EpochEval evaluate_epoch(ad::Tape& tape, ad::Tape::Mark mark,
                         FieldRecorder& rec, const std::vector<double>& params,
                         const std::vector<Vec3>& surface,
                         const std::vector<Vec3>& domain,
                         const TrainConfig& cfg) {
    EpochEval out;
    out.grads.assign(params.size(), 0.0);
    tape.set_param_values(params.data(), params.size());
    tape.set_frozen(params);  // snapshot for the detached outer distance

    const size_t bs = surface.size(), bd = domain.size();
    const LossWeights& w = cfg.weights;

    auto accumulate = [&](ad::Var seed) {
        tape.backward(seed);
        for (size_t i = 0; i < params.size(); ++i)
            out.grads[i] += tape.adjoint(ad::Var{uint32_t(i)});
    };

    for (size_t at = 0; at < bs; at += cfg.chunk) {
        size_t n = std::min(cfg.chunk, bs - at);
        tape.reset(mark);
        TapedSurfaceSums s = record_surface_sums(tape, rec, surface.data() + at,
                                                 n, cfg.guard_eps);
        accumulate(tape.mul_const(s.manifold_sum, 1.0 / double(bs)));
        out.loss.manifold += s.manifold_value / double(bs);
    }

    for (size_t at = 0; at < bd; at += cfg.chunk) {
        size_t n = std::min(cfg.chunk, bd - at);
        tape.reset(mark);
        TapedDomainSums d = record_domain_sums(tape, rec, domain.data() + at, n,
                                               w.delta_eps, cfg.guard_eps);
        ad::Var weighted = tape.add(
            tape.add(tape.mul_const(d.gm_sum, w.lambda_gm / double(bd)),
                     tape.mul_const(d.sp_sum, w.lambda_sp / double(bd))),
            tape.mul_const(d.ma_sum, w.lambda_ma / double(bd)));
        accumulate(weighted);
        out.loss.gm += d.gm_value / double(bd);
        out.loss.sp += d.sp_value / double(bd);
        out.loss.ma += d.ma_value / double(bd);
        out.loss.eikonal += d.eikonal_sum / double(bd);
    }

    out.loss.total = out.loss.manifold + w.lambda_gm * out.loss.gm +
                     w.lambda_sp * out.loss.sp + w.lambda_ma * out.loss.ma;
    return out;
}

}  // namespace

TrainResult train(const PointCloud& cloud, const MlpConfig& model,
                  const TrainConfig& cfg) {
    cfg.validate();
    model.validate();
    if (cloud.points.empty())
        throw std::invalid_argument("train: empty point cloud");
    Domain domain;
    for (const Vec3& p : cloud.points)
        if (!domain.box.contains(p))
            throw std::invalid_argument(
                "train: cloud extends outside the domain; normalize it first");

    const bool writing = !cfg.out_dir.empty();
    if (writing) std::filesystem::create_directories(cfg.out_dir);

    TrainResult result;
    result.params = init_params(model, split_seed(cfg.sampler.seed, Stream::kInit));
    std::vector<double>& theta = result.params.data;

    BatchSampler sampler(cloud, domain, cfg.sampler);
    AdamState adam(theta.size());

    ad::Tape tape;
    tape.alloc_params(theta.data(), theta.size());
    const ad::Tape::Mark mark = tape.mark();
    FieldRecorder rec(tape, model, 0);

    std::ofstream log_stream;
    if (writing) {
        log_stream.open(cfg.out_dir + "/train_log.csv");
        TrainConfig header_only = cfg;
        log_stream << format_train_log({}, header_only);
    }

    auto log_row = [&](const TrainLogRow& row) {
        result.log.push_back(row);
        if (log_stream.is_open()) {
            char buf[256];
            std::snprintf(buf, sizeof(buf),
                          "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                          row.epoch, row.lr, row.loss.manifold, row.loss.gm,
                          row.loss.sp, row.loss.ma, row.loss.total,
                          row.loss.eikonal);
            log_stream << buf;
            log_stream.flush();
        }
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(cfg, epoch);
        std::vector<Vec3> surface = sampler.surface_batch();
        std::vector<Vec3> domain_pts = sampler.domain_batch();

        try {
            EpochEval eval = evaluate_epoch(tape, mark, rec, theta, surface,
                                            domain_pts, cfg);
            if (!eval.loss.finite()) {
                result.aborted = true;
                result.abort_epoch = epoch;
                result.abort_reason = "non-finite loss";
                break;
            }
            log_row({epoch, lr, eval.loss});
            adam_step(theta, eval.grads, adam, lr, cfg.adam_beta1,
                      cfg.adam_beta2, cfg.adam_eps);
        } catch (const std::exception& e) {
            result.aborted = true;
            result.abort_epoch = epoch;
            result.abort_reason = e.what();
            break;
        }

        if (cfg.progress_every > 0 &&
            ((epoch + 1) % cfg.progress_every == 0 || epoch + 1 == cfg.epochs)) {
            const LossBreakdown& l = result.log.back().loss;
            std::printf("epoch %d/%d lr=%.4g total=%.6g eikonal=%.4g\n",
                        epoch + 1, cfg.epochs, lr, l.total, l.eikonal);
            std::fflush(stdout);
        }
        if (writing && cfg.checkpoint_every > 0 &&
            (epoch + 1) % cfg.checkpoint_every == 0) {
            char stem[32];
            std::snprintf(stem, sizeof(stem), "checkpoint_%06d", epoch + 1);
            save_checkpoint(checkpoint_name(cfg.out_dir, stem), result.params,
                            cfg.sampler.seed, epoch + 1);
        }
    }

    if (writing) {
        int64_t done = result.aborted ? result.abort_epoch : cfg.epochs;
        save_checkpoint(checkpoint_name(cfg.out_dir, "checkpoint_final"),
                        result.params, cfg.sampler.seed, done);
    }
    return result;
}

std::string format_train_log(const std::vector<TrainLogRow>& log,
                             const TrainConfig& cfg) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "# adam beta1=%g beta2=%g eps=%g lr0=%g decay=%g/%d\n",
                  cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.lr0,
                  cfg.decay_factor, cfg.decay_every);
    out += buf;
    out += "epoch,lr,manifold,gm,sp,ma,total,eikonal\n";
    for (const TrainLogRow& row : log) {
        std::snprintf(buf, sizeof(buf),
                      "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      row.epoch, row.lr, row.loss.manifold, row.loss.gm,
                      row.loss.sp, row.loss.ma, row.loss.total,
                      row.loss.eikonal);
        out += buf;
    }
    return out;
}

void write_train_log(const std::string& path,
                     const std::vector<TrainLogRow>& log,
                     const TrainConfig& cfg) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open log file: " + path);
    f << format_train_log(log, cfg);
}

}  // namespace nsp
