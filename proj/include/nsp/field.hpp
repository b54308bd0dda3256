#pragma once

#include "nsp/autodiff.hpp"
#include "nsp/geometry.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace nsp {

// Vector field F(x) ~ d(x) * grad d(x) represented by an MLP with softplus
// activations and one skip connection that concatenates the raw input onto
// the designated hidden layer's input.
struct MlpConfig {
    int depth = 6;       // number of hidden layers
    int width = 512;
    int skip_layer = 3;  // 1-based hidden layer receiving [h; x]
    double softplus_beta = 100.0;

    void validate() const;
    bool operator==(const MlpConfig&) const = default;
};

// Flat parameter vector. Layout, in order: for each hidden layer l = 1..depth,
// W_l row-major (width x in_l) then b_l (width), where in_1 = 3,
// in_l = width, and the skip layer's input is widened by 3 (rows end with the
// three coefficients applied to x). Then the output W (3 x width) and b (3).
struct Parameters {
    MlpConfig config;
    std::vector<double> data;
};

size_t param_count(const MlpConfig& config);

// Fan-in-scaled uniform weights, zero hidden biases, and a small positive
// output bias so F is nonzero almost everywhere at initialization.
Parameters init_params(const MlpConfig& config, uint64_t seed);

struct MddResult {
    double d = 0.0;
    Vec3 G{0, 0, 1};
    bool guard_active = false;
};

// Magnitude-direction split d = |F|, G = F/d. At or below the guard the
// direction falls back to +z and the flag is raised.
MddResult mdd(Vec3 F, double guard_eps = 1e-12);

struct FieldEval {
    Vec3 F;
    double d = 0.0;
    Vec3 G{0, 0, 1};
    Vec3 grad_d{0, 0, 0};  // chain rule J^T G with the guarded direction
    bool guard_active = false;
};

Vec3 forward(const Parameters& params, Vec3 x);
FieldEval eval_field(const Parameters& params, Vec3 x, double guard_eps = 1e-12);

// J[i][j] = dF_i/dx_j from one forward-mode pass.
std::array<std::array<double, 3>, 3> jacobian(const Parameters& params, Vec3 x);

// Batched value pass for lattice sweeps: fills d_out (always) and F_out
// (when non-null) for n points.
void forward_batch(const Parameters& params, const Vec3* pts, size_t n,
                   double* d_out, Vec3* F_out);

// ---------------------------------------------------------------------------
// Tape recording. The recorder assumes the tape's parameter leaves hold this
// field's flat vector at indices [param_base, param_base + count).
// ---------------------------------------------------------------------------

struct TapedField {
    std::array<ad::TVar, 3> F;       // tangents populated when requested
    ad::Var d;
    std::array<ad::Var, 3> G;
    std::array<ad::Var, 3> grad_d;   // invalid unless tangents were recorded
    bool guard_active = false;
};

class FieldRecorder {
  public:
    FieldRecorder(ad::Tape& tape, const MlpConfig& config, uint32_t param_base = 0);

    // Records one evaluation at x. with_tangents additionally tapes the
    // forward-mode input derivatives, making grad_d available as tape nodes.
    TapedField record(Vec3 x, bool with_tangents, double guard_eps = 1e-12);

    // Distance of the frozen field (tape.set_frozen must hold a parameter
    // snapshot in this field's layout) evaluated at a taped 3-vector.
    // Gradient flows into y's ancestry only.
    ad::Var record_frozen_distance(std::array<ad::Var, 3> y, double guard_eps = 1e-12);

  private:
    ad::Tape& tape_;
    MlpConfig config_;
    uint32_t base_;
    std::vector<uint32_t> w_off_, b_off_, in_dim_;
    uint32_t out_w_off_ = 0, out_b_off_ = 0;
};

// ---------------------------------------------------------------------------
// Uniform closures over a field (trained or analytic) used by extraction,
// metrics, and loss evaluation on injected stand-ins.
// ---------------------------------------------------------------------------

struct FieldView {
    std::function<double(Vec3)> distance;
    std::function<Vec3(Vec3)> pull;  // the raw vector F(x)
    std::function<FieldEval(Vec3)> eval;
    // Optional bulk pass filling d_out (always) and F_out (when non-null).
    // Callers fall back to looping the per-point closures when unset.
    std::function<void(const Vec3*, size_t, double*, Vec3*)> eval_many;
};

// Bulk evaluation through eval_many when available, else a per-point loop.
void field_values(const FieldView& view, const Vec3* pts, size_t n,
                  double* d_out, Vec3* F_out);

FieldView make_field_view(const Parameters& params, double guard_eps = 1e-12);

// ---------------------------------------------------------------------------
// Checkpoints: versioned little-endian binary record of the architecture,
// flat parameters, seed, and epoch. Round-trips bit-exactly.
// ---------------------------------------------------------------------------

struct Checkpoint {
    Parameters params;
    uint64_t seed = 0;
    int64_t epoch = 0;
};

void save_checkpoint(const std::string& path, const Parameters& params,
                     uint64_t seed, int64_t epoch);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace nsp
