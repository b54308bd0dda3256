#include "nsp/autodiff.hpp"

#include <cstring>

namespace nsp::ad {

const char* op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::Const: return "const";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Div: return "div";
        case Op::AddC: return "add_const";
        case Op::MulC: return "mul_const";
        case Op::Neg: return "neg";
        case Op::Copy: return "copy";
        case Op::Tanh: return "tanh";
        case Op::Softplus: return "softplus";
        case Op::Logistic: return "logistic";
        case Op::Sqrt: return "sqrt";
        case Op::Square: return "square";
        case Op::Abs: return "abs";
        case Op::Dot: return "dot";
        case Op::Affine: return "affine";
        case Op::FrozenDot: return "frozen_dot";
        case Op::FrozenAffine: return "frozen_affine";
        case Op::Norm3G: return "norm3_guarded";
    }
    return "?";
}

Var Tape::alloc_params(const double* p, size_t n) {
    if (!val_.empty())
        throw TapeError("parameters must be the first tape nodes", val_.size(), Op::Leaf);
    n_params_ = n;
    val_.assign(p, p + n);
    rec_.assign(n, Rec{0, 0, 0, 0, Op::Leaf});
    for (size_t i = 0; i < n; ++i)
        if (!std::isfinite(p[i])) throw TapeError("non-finite parameter", i, Op::Leaf);
    return Var{0};
}

void Tape::set_param_values(const double* p, size_t n) {
    if (n != n_params_)
        throw TapeError("parameter count mismatch", 0, Op::Leaf);
    std::memcpy(val_.data(), p, n * sizeof(double));
}

Var Tape::constant(double v) {
    if (!std::isfinite(v)) throw TapeError("non-finite constant", val_.size(), Op::Const);
    return emit(Op::Const, const_slot(v));
}

uint32_t Tape::const_slot(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    auto it = const_index_.find(bits);
    if (it != const_index_.end()) return it->second;
    uint32_t idx = uint32_t(consts_.size());
    consts_.push_back(v);
    const_index_.emplace(bits, idx);
    return idx;
}

double Tape::eval(const Rec& r, size_t index) const {
    switch (r.op) {
        case Op::Leaf:
        case Op::Const:
            return r.op == Op::Const ? consts_[r.a] : val_[index];
        case Op::Add: return val_[r.a] + val_[r.b];
        case Op::Sub: return val_[r.a] - val_[r.b];
        case Op::Mul: return val_[r.a] * val_[r.b];
        case Op::Div: return val_[r.a] / val_[r.b];
        case Op::AddC: return val_[r.a] + consts_[r.b];
        case Op::MulC: return val_[r.a] * consts_[r.b];
        case Op::Neg: return -val_[r.a];
        case Op::Copy: return val_[r.a];
        case Op::Tanh: return std::tanh(val_[r.a]);
        case Op::Softplus: return softplus_value(val_[r.a], consts_[r.b]);
        case Op::Logistic: return logistic_value(val_[r.a], consts_[r.b]);
        case Op::Sqrt: return std::sqrt(val_[r.a]);
        case Op::Square: return val_[r.a] * val_[r.a];
        case Op::Abs: return std::fabs(val_[r.a]);
        case Op::Dot: {
            const double* a = val_.data() + r.a;
            const double* b = val_.data() + r.b;
            double s = 0.0;
            for (uint32_t i = 0; i < r.n; ++i) s += a[i] * b[i];
            return s;
        }
        case Op::Affine: {
            const double* a = val_.data() + r.a;
            const double* b = val_.data() + r.b;
            double s = 0.0;
            for (uint32_t i = 0; i < r.n; ++i) s += a[i] * b[i];
            return s + val_[r.c];
        }
        case Op::FrozenDot: {
            const double* a = frozen_.data() + r.a;
            const double* b = val_.data() + r.b;
            double s = 0.0;
            for (uint32_t i = 0; i < r.n; ++i) s += a[i] * b[i];
            return s;
        }
        case Op::FrozenAffine: {
            const double* a = frozen_.data() + r.a;
            const double* b = val_.data() + r.b;
            double s = 0.0;
            for (uint32_t i = 0; i < r.n; ++i) s += a[i] * b[i];
            return s + frozen_[r.c];
        }
        case Op::Norm3G: {
            double x = val_[r.a], y = val_[r.a + 1], z = val_[r.a + 2];
            return std::sqrt(x * x + y * y + z * z);
        }
    }
    return 0.0;
}

Var Tape::emit(Op op, uint32_t a, uint32_t b, uint32_t c, uint32_t n) {
    size_t idx = val_.size();
    if (idx >= UINT32_MAX) throw TapeError("tape full", idx, op);
    Rec r{a, b, c, n, op};
    double v = eval(r, idx);
    if (!std::isfinite(v))
        throw TapeError(std::string("non-finite value from op '") + op_name(op) +
                            "' at node " + std::to_string(idx),
                        idx, op);
    val_.push_back(v);
    rec_.push_back(r);
    return Var{uint32_t(idx)};
}

Var Tape::norm3_guarded(Var x, Var y, Var z, double eps) {
    if (y.i != x.i + 1 || z.i != x.i + 2) {
        Var cx = copy(x);
        copy(y);
        copy(z);
        x = cx;
    }
    return emit(Op::Norm3G, x.i, const_slot(eps));
}

void Tape::backward(Var seed) {
    if (!seed.valid() || seed.i >= val_.size())
        throw TapeError("backward seed is not on the tape", seed.i, Op::Leaf);
    adj_.assign(val_.size(), 0.0);
    adj_[seed.i] = 1.0;
    for (size_t i = seed.i + 1; i-- > n_params_;) {
        double g = adj_[i];
        if (g == 0.0) continue;
        const Rec& r = rec_[i];
        switch (r.op) {
            case Op::Leaf:
            case Op::Const:
                break;
            case Op::Add:
                adj_[r.a] += g;
                adj_[r.b] += g;
                break;
            case Op::Sub:
                adj_[r.a] += g;
                adj_[r.b] -= g;
                break;
            case Op::Mul:
                adj_[r.a] += g * val_[r.b];
                adj_[r.b] += g * val_[r.a];
                break;
            case Op::Div:
                adj_[r.a] += g / val_[r.b];
                adj_[r.b] -= g * val_[i] / val_[r.b];
                break;
            case Op::AddC:
                adj_[r.a] += g;
                break;
            case Op::MulC:
                adj_[r.a] += g * consts_[r.b];
                break;
            case Op::Neg:
                adj_[r.a] -= g;
                break;
            case Op::Copy:
                adj_[r.a] += g;
                break;
            case Op::Tanh: {
                double v = val_[i];
                adj_[r.a] += g * (1.0 - v * v);
                break;
            }
            case Op::Softplus: {
                // logistic(beta x) recovered from the node's own value:
                // exp(beta*softplus) = 1 + exp(beta x).
                double s = 1.0 - std::exp(-consts_[r.b] * val_[i]);
                adj_[r.a] += g * s;
                break;
            }
            case Op::Logistic: {
                double s = val_[i];
                adj_[r.a] += g * consts_[r.b] * s * (1.0 - s);
                break;
            }
            case Op::Sqrt: {
                double v = val_[i];
                if (v > 0.0) adj_[r.a] += g * 0.5 / v;
                break;
            }
            case Op::Square:
                adj_[r.a] += g * 2.0 * val_[r.a];
                break;
            case Op::Abs: {
                double v = val_[r.a];
                adj_[r.a] += v > 0.0 ? g : (v < 0.0 ? -g : 0.0);
                break;
            }
            case Op::Dot: {
                const double* a = val_.data() + r.a;
                const double* b = val_.data() + r.b;
                double* ga = adj_.data() + r.a;
                double* gb = adj_.data() + r.b;
                for (uint32_t k = 0; k < r.n; ++k) {
                    ga[k] += g * b[k];
                    gb[k] += g * a[k];
                }
                break;
            }
            case Op::Affine: {
                const double* a = val_.data() + r.a;
                const double* b = val_.data() + r.b;
                double* ga = adj_.data() + r.a;
                double* gb = adj_.data() + r.b;
                for (uint32_t k = 0; k < r.n; ++k) {
                    ga[k] += g * b[k];
                    gb[k] += g * a[k];
                }
                adj_[r.c] += g;
                break;
            }
            case Op::FrozenDot:
            case Op::FrozenAffine: {
                const double* a = frozen_.data() + r.a;
                double* gb = adj_.data() + r.b;
                for (uint32_t k = 0; k < r.n; ++k) gb[k] += g * a[k];
                break;
            }
            case Op::Norm3G: {
                double v = val_[i];
                if (v > consts_[r.b]) {
                    double inv = g / v;
                    adj_[r.a] += inv * val_[r.a];
                    adj_[r.a + 1] += inv * val_[r.a + 1];
                    adj_[r.a + 2] += inv * val_[r.a + 2];
                }
                break;
            }
        }
    }
    for (size_t i = 0; i <= seed.i; ++i)
        if (!std::isfinite(adj_[i]))
            throw TapeError(std::string("non-finite adjoint at node ") +
                                std::to_string(i) + " (op '" +
                                op_name(rec_[i].op) + "')",
                            i, rec_[i].op);
}

GradientVector Tape::grad_params() const {
    return GradientVector(adj_.begin(), adj_.begin() + n_params_);
}

void Tape::replay() {
    for (size_t i = n_params_; i < rec_.size(); ++i) {
        if (rec_[i].op == Op::Leaf) continue;
        val_[i] = eval(rec_[i], i);
    }
}

void Tape::reset(Mark m) {
    if (m.nodes < n_params_)
        throw TapeError("cannot reset past the parameter block", m.nodes, Op::Leaf);
    val_.resize(m.nodes);
    rec_.resize(m.nodes);
    if (m.consts < consts_.size()) {
        for (auto it = const_index_.begin(); it != const_index_.end();) {
            if (it->second >= m.consts)
                it = const_index_.erase(it);
            else
                ++it;
        }
        consts_.resize(m.consts);
    }
    adj_.clear();
}

GradientVector grad_params(Tape& tape, Var loss) {
    tape.backward(loss);
    return tape.grad_params();
}

GradientVector grad_params_of_input_grad(Tape& tape, Var loss) {
    return grad_params(tape, loss);
}

std::array<std::array<double, 3>, 3> input_jacobian(const DualField& f,
                                                    const std::array<double, 3>& x) {
    std::array<Dual3, 3> in{Dual3::input(x[0], 0), Dual3::input(x[1], 1),
                            Dual3::input(x[2], 2)};
    std::array<Dual3, 3> out = f(in);
    std::array<std::array<double, 3>, 3> J{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) J[i][j] = out[i].t[j];
    return J;
}

// --- taped forward-mode tangents --------------------------------------------

TVar TVar::input(Tape& tape, double value, int axis) {
    TVar r;
    r.v = tape.constant(value);
    r.t[axis] = tape.constant(1.0);
    return r;
}

TVar tv_add(Tape& tape, const TVar& a, const TVar& b) {
    TVar r;
    r.v = tape.add(a.v, b.v);
    for (int k = 0; k < 3; ++k) {
        if (a.t[k].valid() && b.t[k].valid())
            r.t[k] = tape.add(a.t[k], b.t[k]);
        else if (a.t[k].valid())
            r.t[k] = a.t[k];
        else if (b.t[k].valid())
            r.t[k] = b.t[k];
    }
    return r;
}

TVar tv_sub(Tape& tape, const TVar& a, const TVar& b) {
    TVar r;
    r.v = tape.sub(a.v, b.v);
    for (int k = 0; k < 3; ++k) {
        if (a.t[k].valid() && b.t[k].valid())
            r.t[k] = tape.sub(a.t[k], b.t[k]);
        else if (a.t[k].valid())
            r.t[k] = a.t[k];
        else if (b.t[k].valid())
            r.t[k] = tape.neg(b.t[k]);
    }
    return r;
}

TVar tv_mul(Tape& tape, const TVar& a, const TVar& b) {
    TVar r;
    r.v = tape.mul(a.v, b.v);
    for (int k = 0; k < 3; ++k) {
        Var ta = a.t[k].valid() ? tape.mul(a.t[k], b.v) : Var{};
        Var tb = b.t[k].valid() ? tape.mul(b.t[k], a.v) : Var{};
        if (ta.valid() && tb.valid())
            r.t[k] = tape.add(ta, tb);
        else if (ta.valid())
            r.t[k] = ta;
        else if (tb.valid())
            r.t[k] = tb;
    }
    return r;
}

TVar tv_div(Tape& tape, const TVar& a, const TVar& b) {
    TVar r;
    r.v = tape.div(a.v, b.v);
    for (int k = 0; k < 3; ++k) {
        // (a/b)' = (a' - (a/b) b') / b
        Var num;
        if (a.t[k].valid() && b.t[k].valid())
            num = tape.sub(a.t[k], tape.mul(r.v, b.t[k]));
        else if (a.t[k].valid())
            num = a.t[k];
        else if (b.t[k].valid())
            num = tape.neg(tape.mul(r.v, b.t[k]));
        if (num.valid()) r.t[k] = tape.div(num, b.v);
    }
    return r;
}

TVar tv_softplus(Tape& tape, const TVar& a, double beta) {
    TVar r;
    r.v = tape.softplus(a.v, beta);
    bool any = a.t[0].valid() || a.t[1].valid() || a.t[2].valid();
    if (any) {
        Var s = tape.logistic(a.v, beta);
        for (int k = 0; k < 3; ++k)
            if (a.t[k].valid()) r.t[k] = tape.mul(s, a.t[k]);
    }
    return r;
}

TVar tv_tanh(Tape& tape, const TVar& a) {
    TVar r;
    r.v = tape.tanh(a.v);
    bool any = a.t[0].valid() || a.t[1].valid() || a.t[2].valid();
    if (any) {
        Var d = tape.add_const(tape.neg(tape.square(r.v)), 1.0);
        for (int k = 0; k < 3; ++k)
            if (a.t[k].valid()) r.t[k] = tape.mul(d, a.t[k]);
    }
    return r;
}

TVar tv_square(Tape& tape, const TVar& a) {
    TVar r;
    r.v = tape.square(a.v);
    bool any = a.t[0].valid() || a.t[1].valid() || a.t[2].valid();
    if (any) {
        Var d = tape.mul_const(a.v, 2.0);
        for (int k = 0; k < 3; ++k)
            if (a.t[k].valid()) r.t[k] = tape.mul(d, a.t[k]);
    }
    return r;
}

TVar tv_abs(Tape& tape, const TVar& a) {
    TVar r;
    r.v = tape.abs(a.v);
    double v = tape.value(a.v);
    for (int k = 0; k < 3; ++k) {
        if (!a.t[k].valid()) continue;
        if (v > 0.0)
            r.t[k] = a.t[k];
        else if (v < 0.0)
            r.t[k] = tape.neg(a.t[k]);
        // subgradient 0 at the kink: structural zero tangent
    }
    return r;
}

TVar tv_norm3_guarded(Tape& tape, const TVar& x, const TVar& y, const TVar& z,
                      double eps) {
    TVar r;
    r.v = tape.norm3_guarded(x.v, y.v, z.v, eps);
    if (tape.value(r.v) <= eps) return r;
    for (int k = 0; k < 3; ++k) {
        Var acc;
        const TVar* comps[3] = {&x, &y, &z};
        for (const TVar* c : comps) {
            if (!c->t[k].valid()) continue;
            Var term = tape.mul(c->v, c->t[k]);
            acc = acc.valid() ? tape.add(acc, term) : term;
        }
        if (acc.valid()) r.t[k] = tape.div(acc, r.v);
    }
    return r;
}

}  // namespace nsp::ad
