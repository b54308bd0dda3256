#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace nsp::ad {

// ---------------------------------------------------------------------------
// Forward mode: value plus three input tangents, plain doubles, no recording.
// Carries d/dx, d/dy, d/dz through arithmetic so one pass yields a full
// input Jacobian row per output.
// ---------------------------------------------------------------------------

struct Dual3 {
    double v = 0.0;
    std::array<double, 3> t{0.0, 0.0, 0.0};

    static Dual3 input(double value, int axis) {
        Dual3 d;
        d.v = value;
        d.t[axis] = 1.0;
        return d;
    }
    static Dual3 constant(double value) { return Dual3{value, {0, 0, 0}}; }
};

inline Dual3 operator+(const Dual3& a, const Dual3& b) {
    return {a.v + b.v, {a.t[0] + b.t[0], a.t[1] + b.t[1], a.t[2] + b.t[2]}};
}
inline Dual3 operator-(const Dual3& a, const Dual3& b) {
    return {a.v - b.v, {a.t[0] - b.t[0], a.t[1] - b.t[1], a.t[2] - b.t[2]}};
}
inline Dual3 operator*(const Dual3& a, const Dual3& b) {
    return {a.v * b.v,
            {a.v * b.t[0] + b.v * a.t[0], a.v * b.t[1] + b.v * a.t[1],
             a.v * b.t[2] + b.v * a.t[2]}};
}
inline Dual3 operator*(double s, const Dual3& a) {
    return {s * a.v, {s * a.t[0], s * a.t[1], s * a.t[2]}};
}
inline Dual3 operator/(const Dual3& a, const Dual3& b) {
    double inv = 1.0 / b.v;
    double q = a.v * inv;
    return {q,
            {(a.t[0] - q * b.t[0]) * inv, (a.t[1] - q * b.t[1]) * inv,
             (a.t[2] - q * b.t[2]) * inv}};
}
inline Dual3 tanh(const Dual3& a) {
    double th = std::tanh(a.v);
    double d = 1.0 - th * th;
    return {th, {d * a.t[0], d * a.t[1], d * a.t[2]}};
}
// softplus_beta(x) = log(1 + exp(beta x)) / beta, evaluated overflow-safe.
inline double softplus_value(double x, double beta) {
    double bx = beta * x;
    if (bx > 30.0) return x;  // log1p(exp(bx))/beta == x to double precision
    return std::log1p(std::exp(bx)) / beta;
}
inline double logistic_value(double x, double beta) {
    return 1.0 / (1.0 + std::exp(-beta * x));
}
inline Dual3 softplus(const Dual3& a, double beta) {
    double s = logistic_value(a.v, beta);
    return {softplus_value(a.v, beta), {s * a.t[0], s * a.t[1], s * a.t[2]}};
}
inline Dual3 square(const Dual3& a) {
    double d = 2.0 * a.v;
    return {a.v * a.v, {d * a.t[0], d * a.t[1], d * a.t[2]}};
}
inline Dual3 sqrt(const Dual3& a) {
    double r = std::sqrt(a.v);
    double d = r > 0.0 ? 0.5 / r : 0.0;
    return {r, {d * a.t[0], d * a.t[1], d * a.t[2]}};
}
// Subgradient 0 at the kink.
inline Dual3 abs(const Dual3& a) {
    double s = a.v > 0.0 ? 1.0 : (a.v < 0.0 ? -1.0 : 0.0);
    return {std::fabs(a.v), {s * a.t[0], s * a.t[1], s * a.t[2]}};
}
// Euclidean norm of (x,y,z); tangents are zeroed when the norm is at or
// below the guard to avoid division blow-up.
inline Dual3 norm3_guarded(const Dual3& x, const Dual3& y, const Dual3& z,
                           double eps) {
    double v = std::sqrt(x.v * x.v + y.v * y.v + z.v * z.v);
    Dual3 r;
    r.v = v;
    if (v > eps) {
        for (int k = 0; k < 3; ++k)
            r.t[k] = (x.v * x.t[k] + y.v * y.t[k] + z.v * z.t[k]) / v;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Reverse mode: an append-only tape of elementary operations in topological
// order (operands always precede results). Parameters are leaf nodes at
// indices [0, param_count); one backward sweep from a scalar yields the full
// parameter gradient. Forward-over-reverse falls out of recording the
// forward-mode tangent arithmetic itself as tape nodes, so scalars built
// from input derivatives stay differentiable with respect to parameters.
// ---------------------------------------------------------------------------

struct Var {
    uint32_t i = UINT32_MAX;
    bool valid() const { return i != UINT32_MAX; }
};

enum class Op : uint8_t {
    Leaf,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    AddC,
    MulC,
    Neg,
    Copy,
    Tanh,
    Softplus,  // aux const = beta
    Logistic,  // aux const = beta, value = 1/(1+exp(-beta x))
    Sqrt,
    Square,
    Abs,
    Dot,           // sum val[a+i]*val[b+i], i<n
    Affine,        // dot + val[c]
    FrozenDot,     // sum frozen[a+i]*val[b+i]; frozen side carries no grad
    FrozenAffine,  // frozen dot + frozen[c]
    Norm3G,        // norm of val[a..a+2], aux const = guard eps
};

const char* op_name(Op op);

class TapeError : public std::runtime_error {
  public:
    TapeError(const std::string& what, size_t node, Op op)
        : std::runtime_error(what), node_index(node), node_op(op) {}
    size_t node_index;
    Op node_op;
};

using GradientVector = std::vector<double>;

class Tape {
  public:
    struct Mark {
        size_t nodes = 0;
        size_t consts = 0;
    };

    // Parameter leaves must be allocated first and exactly once.
    Var alloc_params(const double* p, size_t n);
    void set_param_values(const double* p, size_t n);
    size_t param_count() const { return n_params_; }

    Var constant(double v);

    Var add(Var a, Var b) { return emit(Op::Add, a.i, b.i); }
    Var sub(Var a, Var b) { return emit(Op::Sub, a.i, b.i); }
    Var mul(Var a, Var b) { return emit(Op::Mul, a.i, b.i); }
    Var div(Var a, Var b) { return emit(Op::Div, a.i, b.i); }
    Var add_const(Var a, double c) { return emit(Op::AddC, a.i, const_slot(c)); }
    Var mul_const(Var a, double c) { return emit(Op::MulC, a.i, const_slot(c)); }
    Var neg(Var a) { return emit(Op::Neg, a.i); }
    Var copy(Var a) { return emit(Op::Copy, a.i); }
    Var tanh(Var a) { return emit(Op::Tanh, a.i); }
    Var softplus(Var a, double beta) {
        return emit(Op::Softplus, a.i, const_slot(beta));
    }
    Var logistic(Var a, double beta) {
        return emit(Op::Logistic, a.i, const_slot(beta));
    }
    Var sqrt(Var a) { return emit(Op::Sqrt, a.i); }
    Var square(Var a) { return emit(Op::Square, a.i); }
    Var abs(Var a) { return emit(Op::Abs, a.i); }

    // Span operations require contiguous operand ranges; recording order is
    // the caller's tool for arranging that.
    Var dot(Var a0, Var b0, uint32_t n) { return emit(Op::Dot, a0.i, b0.i, 0, n); }
    Var affine(Var w0, Var x0, uint32_t n, Var bias) {
        return emit(Op::Affine, w0.i, x0.i, bias.i, n);
    }

    // Frozen-coefficient variants read one side from an immutable snapshot
    // held by the tape; gradient flows only through the node-span side.
    void set_frozen(std::vector<double> values) { frozen_ = std::move(values); }
    const std::vector<double>& frozen() const { return frozen_; }
    Var frozen_dot(uint32_t frozen_off, Var x0, uint32_t n) {
        return emit(Op::FrozenDot, frozen_off, x0.i, 0, n);
    }
    Var frozen_affine(uint32_t frozen_w, Var x0, uint32_t n, uint32_t frozen_b) {
        return emit(Op::FrozenAffine, frozen_w, x0.i, frozen_b, n);
    }

    // Norm of three components with a derivative guard: below eps the local
    // partials are zero. Operands are recopied if not already contiguous.
    Var norm3_guarded(Var x, Var y, Var z, double eps);

    double value(Var v) const { return val_[v.i]; }
    size_t size() const { return val_.size(); }

    // Reverse sweep seeded with d(seed)/d(seed) = 1. Fills the adjoint
    // buffer; rerunning on the same recording gives bit-identical results.
    void backward(Var seed);
    double adjoint(Var v) const { return adj_[v.i]; }
    GradientVector grad_params() const;

    // Recomputes every non-leaf value from the recorded operations.
    void replay();

    Mark mark() const { return {val_.size(), consts_.size()}; }
    void reset(Mark m);

    void reserve(size_t nodes) {
        val_.reserve(nodes);
        rec_.reserve(nodes);
    }

  private:
    struct Rec {
        uint32_t a = 0, b = 0, c = 0, n = 0;
        Op op = Op::Leaf;
    };

    Var emit(Op op, uint32_t a, uint32_t b = 0, uint32_t c = 0, uint32_t n = 0);
    double eval(const Rec& r, size_t index) const;
    uint32_t const_slot(double v);

    std::vector<double> val_;
    std::vector<double> adj_;
    std::vector<Rec> rec_;
    std::vector<double> consts_;
    std::unordered_map<uint64_t, uint32_t> const_index_;
    std::vector<double> frozen_;
    size_t n_params_ = 0;
};

// Gradient of a recorded scalar with respect to the parameter leaves.
GradientVector grad_params(Tape& tape, Var loss);

// Same sweep, named for the mixed case: `loss` was built from taped
// forward-mode tangents, so the result contains d2/dtheta dx terms.
GradientVector grad_params_of_input_grad(Tape& tape, Var loss);

// 3x3 input Jacobian of a vector field in one forward-mode pass.
// J[i][j] = dF_i/dx_j.
using DualField = std::function<std::array<Dual3, 3>(const std::array<Dual3, 3>&)>;
std::array<std::array<double, 3>, 3> input_jacobian(const DualField& f,
                                                    const std::array<double, 3>& x);

// ---------------------------------------------------------------------------
// Taped forward-mode scalar: value and tangents are tape nodes, so the
// tangent arithmetic is itself recorded and parameter gradients flow through
// expressions that use input derivatives.
// ---------------------------------------------------------------------------

struct TVar {
    Var v;
    std::array<Var, 3> t{};  // invalid Var means structurally zero tangent

    static TVar constant(Tape& tape, double value) {
        TVar r;
        r.v = tape.constant(value);
        return r;
    }
    // Input coordinate: tangent along `axis` is the constant 1, represented
    // structurally (no node needed).
    static TVar input(Tape& tape, double value, int axis);
};

TVar tv_add(Tape& tape, const TVar& a, const TVar& b);
TVar tv_sub(Tape& tape, const TVar& a, const TVar& b);
TVar tv_mul(Tape& tape, const TVar& a, const TVar& b);
TVar tv_div(Tape& tape, const TVar& a, const TVar& b);
TVar tv_softplus(Tape& tape, const TVar& a, double beta);
TVar tv_tanh(Tape& tape, const TVar& a);
TVar tv_square(Tape& tape, const TVar& a);
TVar tv_abs(Tape& tape, const TVar& a);
TVar tv_norm3_guarded(Tape& tape, const TVar& x, const TVar& y, const TVar& z,
                      double eps);

}  // namespace nsp::ad
