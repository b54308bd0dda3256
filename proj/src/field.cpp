#include "nsp/field.hpp"

#include <cstring>
#include <memory>
#include <fstream>
#include <random>
#include <stdexcept>

namespace nsp {

void MlpConfig::validate() const {
    if (depth <= 0) throw std::invalid_argument("mlp depth must be positive");
    if (width <= 0) throw std::invalid_argument("mlp width must be positive");
    if (skip_layer <= 0 || skip_layer > depth)
        throw std::invalid_argument("skip layer must name a hidden layer");
    if (softplus_beta <= 0.0)
        throw std::invalid_argument("softplus beta must be positive");
}

namespace {

struct Layout {
    std::vector<size_t> w_off, b_off, in;
    size_t out_w = 0, out_b = 0, total = 0;

    explicit Layout(const MlpConfig& c) {
        c.validate();
        size_t off = 0;
        for (int l = 1; l <= c.depth; ++l) {
            size_t in_dim =
                size_t(l == 1 ? 3 : c.width) + (l == c.skip_layer ? 3 : 0);
            in.push_back(in_dim);
            w_off.push_back(off);
            off += size_t(c.width) * in_dim;
            b_off.push_back(off);
            off += size_t(c.width);
        }
        out_w = off;
        off += 3 * size_t(c.width);
        out_b = off;
        off += 3;
        total = off;
    }
};

constexpr double kOutputBias = 0.05;

// Layout construction allocates; cache it for the hot per-point paths.
const Layout& layout_for(const MlpConfig& c) {
    thread_local MlpConfig cached_cfg;
    thread_local std::unique_ptr<Layout> cached;
    if (!cached || !(cached_cfg == c)) {
        cached = std::make_unique<Layout>(c);
        cached_cfg = c;
    }
    return *cached;
}

}  // namespace

size_t param_count(const MlpConfig& config) { return Layout(config).total; }

Parameters init_params(const MlpConfig& config, uint64_t seed) {
    Layout lay(config);
    Parameters p;
    p.config = config;
    p.data.assign(lay.total, 0.0);
    std::mt19937_64 rng(seed);
    for (int l = 0; l < config.depth; ++l) {
        double bound = std::sqrt(6.0 / double(lay.in[l]));
        std::uniform_real_distribution<double> u(-bound, bound);
        size_t nw = size_t(config.width) * lay.in[l];
        for (size_t i = 0; i < nw; ++i) p.data[lay.w_off[l] + i] = u(rng);
        // hidden biases stay zero
    }
    double bound = std::sqrt(6.0 / double(config.width));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (size_t i = 0; i < 3 * size_t(config.width); ++i)
        p.data[lay.out_w + i] = u(rng);
    for (int i = 0; i < 3; ++i) p.data[lay.out_b + i] = kOutputBias;
    return p;
}

MddResult mdd(Vec3 F, double guard_eps) {
    MddResult r;
    r.d = norm(F);
    if (r.d > guard_eps) {
        r.G = F / r.d;
    } else {
        r.G = {0, 0, 1};
        r.guard_active = true;
    }
    return r;
}

// --- plain and dual forward passes ------------------------------------------

namespace {

template <typename T>
struct Num;
template <>
struct Num<double> {
    static double constant(double v) { return v; }
    static double softplus(double x, double b) { return ad::softplus_value(x, b); }
};
template <>
struct Num<ad::Dual3> {
    static ad::Dual3 constant(double v) { return ad::Dual3::constant(v); }
    static ad::Dual3 softplus(const ad::Dual3& x, double b) {
        return ad::softplus(x, b);
    }
};

template <typename T>
void dense_forward(const Parameters& p, const T x[3], T F[3]) {
    const MlpConfig& c = p.config;
    const Layout& lay = layout_for(c);
    const double* w = p.data.data();
    static thread_local std::vector<T> bufa, bufb;
    bufa.resize(c.width);
    bufb.resize(c.width);
    T* cur = bufa.data();
    T* nxt = bufb.data();
    const T* src = x;

    for (int l = 0; l < c.depth; ++l) {
        size_t in_main = size_t(l == 0 ? 3 : c.width);
        size_t in_dim = lay.in[l];
        bool skip = (l + 1 == c.skip_layer);
        for (int j = 0; j < c.width; ++j) {
            const double* row = w + lay.w_off[l] + size_t(j) * in_dim;
            T acc = Num<T>::constant(w[lay.b_off[l] + j]);
            for (size_t i = 0; i < in_main; ++i) acc = acc + row[i] * src[i];
            if (skip)
                for (int i = 0; i < 3; ++i) acc = acc + row[in_main + i] * x[i];
            nxt[j] = Num<T>::softplus(acc, c.softplus_beta);
        }
        std::swap(cur, nxt);
        src = cur;
    }
    for (int i = 0; i < 3; ++i) {
        const double* row = w + lay.out_w + size_t(i) * c.width;
        T acc = Num<T>::constant(w[lay.out_b + i]);
        for (int j = 0; j < c.width; ++j) acc = acc + row[j] * src[j];
        F[i] = acc;
    }
}

}  // namespace

Vec3 forward(const Parameters& params, Vec3 x) {
    double in[3] = {x.x, x.y, x.z};
    double F[3];
    dense_forward<double>(params, in, F);
    return {F[0], F[1], F[2]};
}

namespace {

void dual_pass(const Parameters& params, Vec3 x, ad::Dual3 F[3]) {
    ad::Dual3 in[3] = {ad::Dual3::input(x.x, 0), ad::Dual3::input(x.y, 1),
                       ad::Dual3::input(x.z, 2)};
    dense_forward<ad::Dual3>(params, in, F);
}

}  // namespace

FieldEval eval_field(const Parameters& params, Vec3 x, double guard_eps) {
    ad::Dual3 F[3];
    dual_pass(params, x, F);
    FieldEval e;
    e.F = {F[0].v, F[1].v, F[2].v};
    MddResult m = mdd(e.F, guard_eps);
    e.d = m.d;
    e.G = m.G;
    e.guard_active = m.guard_active;
    for (int k = 0; k < 3; ++k)
        e.grad_d[k] = m.G.x * F[0].t[k] + m.G.y * F[1].t[k] + m.G.z * F[2].t[k];
    return e;
}

std::array<std::array<double, 3>, 3> jacobian(const Parameters& params, Vec3 x) {
    ad::Dual3 F[3];
    dual_pass(params, x, F);
    std::array<std::array<double, 3>, 3> J{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) J[i][j] = F[i].t[j];
    return J;
}

void forward_batch(const Parameters& params, const Vec3* pts, size_t n,
                   double* d_out, Vec3* F_out) {
    const MlpConfig& c = params.config;
    const Layout& lay = layout_for(c);
    const double* w = params.data.data();
    constexpr size_t B = 32;
    std::vector<double> a(size_t(c.width) * B), zbuf(size_t(c.width) * B),
        xrows(3 * B);

    for (size_t i0 = 0; i0 < n; i0 += B) {
        size_t m = std::min(B, n - i0);
        for (size_t b = 0; b < m; ++b) {
            xrows[0 * B + b] = pts[i0 + b].x;
            xrows[1 * B + b] = pts[i0 + b].y;
            xrows[2 * B + b] = pts[i0 + b].z;
        }
        const double* src = xrows.data();
        for (int l = 0; l < c.depth; ++l) {
            size_t in_main = size_t(l == 0 ? 3 : c.width);
            size_t in_dim = lay.in[l];
            bool skip = (l + 1 == c.skip_layer);
            for (int j = 0; j < c.width; ++j) {
                const double* row = w + lay.w_off[l] + size_t(j) * in_dim;
                double* z = zbuf.data() + size_t(j) * B;
                double bj = w[lay.b_off[l] + j];
                for (size_t b = 0; b < m; ++b) z[b] = bj;
                for (size_t i = 0; i < in_main; ++i) {
                    double wi = row[i];
                    const double* s = src + i * B;
                    for (size_t b = 0; b < m; ++b) z[b] += wi * s[b];
                }
                if (skip)
                    for (int i = 0; i < 3; ++i) {
                        double wi = row[in_main + i];
                        const double* s = xrows.data() + size_t(i) * B;
                        for (size_t b = 0; b < m; ++b) z[b] += wi * s[b];
                    }
                for (size_t b = 0; b < m; ++b)
                    z[b] = ad::softplus_value(z[b], c.softplus_beta);
            }
            std::swap(a, zbuf);
            src = a.data();
        }
        for (size_t b = 0; b < m; ++b) {
            double F[3];
            for (int i = 0; i < 3; ++i) {
                const double* row = w + lay.out_w + size_t(i) * c.width;
                double acc = w[lay.out_b + i];
                for (int j = 0; j < c.width; ++j) acc += row[j] * a[size_t(j) * B + b];
                F[i] = acc;
            }
            if (F_out) F_out[i0 + b] = {F[0], F[1], F[2]};
            d_out[i0 + b] = std::sqrt(F[0] * F[0] + F[1] * F[1] + F[2] * F[2]);
        }
    }
}

// --- tape recording ----------------------------------------------------------

FieldRecorder::FieldRecorder(ad::Tape& tape, const MlpConfig& config,
                             uint32_t param_base)
    : tape_(tape), config_(config), base_(param_base) {
    Layout lay(config);
    for (int l = 0; l < config.depth; ++l) {
        w_off_.push_back(uint32_t(lay.w_off[l]));
        b_off_.push_back(uint32_t(lay.b_off[l]));
        in_dim_.push_back(uint32_t(lay.in[l]));
    }
    out_w_off_ = uint32_t(lay.out_w);
    out_b_off_ = uint32_t(lay.out_b);
}

TapedField FieldRecorder::record(Vec3 x, bool with_tangents, double guard_eps) {
    using ad::Var;
    const uint32_t W = uint32_t(config_.width);
    const double beta = config_.softplus_beta;
    constexpr uint32_t NONE = UINT32_MAX;

    Var x0 = tape_.constant(x.x);
    tape_.constant(x.y);
    tape_.constant(x.z);

    uint32_t prev_v = x0.i;
    std::array<uint32_t, 3> prev_t{NONE, NONE, NONE};

    for (int l = 1; l <= config_.depth; ++l) {
        const uint32_t wo = base_ + w_off_[l - 1];
        const uint32_t bo = base_ + b_off_[l - 1];
        const uint32_t in_dim = in_dim_[l - 1];
        const uint32_t in_main = (l == 1) ? 3 : W;
        const bool skip = (l == config_.skip_layer);

        // z values, one contiguous row.
        uint32_t zv;
        if (!skip) {
            zv = tape_.affine(Var{wo}, Var{prev_v}, in_main, Var{bo}).i;
            for (uint32_t j = 1; j < W; ++j)
                tape_.affine(Var{wo + j * in_dim}, Var{prev_v}, in_main, Var{bo + j});
        } else {
            uint32_t m1 = tape_.affine(Var{wo}, Var{prev_v}, in_main, Var{bo}).i;
            for (uint32_t j = 1; j < W; ++j)
                tape_.affine(Var{wo + j * in_dim}, Var{prev_v}, in_main, Var{bo + j});
            uint32_t m2 = tape_.dot(Var{wo + in_main}, Var{x0.i}, 3).i;
            for (uint32_t j = 1; j < W; ++j)
                tape_.dot(Var{wo + j * in_dim + in_main}, Var{x0.i}, 3);
            zv = tape_.add(Var{m1}, Var{m2}).i;
            for (uint32_t j = 1; j < W; ++j)
                tape_.add(Var{m1 + j}, Var{m2 + j});
        }

        // z tangents per axis, each a contiguous row. For the first layer the
        // tangent of the affine part is the weight entry itself (the input
        // one-hot needs no dot), so that case is folded into the activation
        // product below and zt stays unset.
        std::array<uint32_t, 3> zt{NONE, NONE, NONE};
        bool first_layer_struct = false;
        if (with_tangents) {
            if (l == 1) {
                if (!skip) {
                    first_layer_struct = true;
                } else {
                    // [x; x]: tangent is the sum of the two weight columns.
                    for (int k = 0; k < 3; ++k) {
                        zt[k] = tape_.add(Var{wo + uint32_t(k)},
                                          Var{wo + in_main + uint32_t(k)}).i;
                        for (uint32_t j = 1; j < W; ++j)
                            tape_.add(Var{wo + j * in_dim + uint32_t(k)},
                                      Var{wo + j * in_dim + in_main + uint32_t(k)});
                    }
                }
            } else {
                for (int k = 0; k < 3; ++k) {
                    uint32_t dots = tape_.dot(Var{wo}, Var{prev_t[k]}, in_main).i;
                    for (uint32_t j = 1; j < W; ++j)
                        tape_.dot(Var{wo + j * in_dim}, Var{prev_t[k]}, in_main);
                    if (!skip) {
                        zt[k] = dots;
                    } else {
                        zt[k] = tape_.add(Var{dots}, Var{wo + in_main + uint32_t(k)}).i;
                        for (uint32_t j = 1; j < W; ++j)
                            tape_.add(Var{dots + j},
                                      Var{wo + j * in_dim + in_main + uint32_t(k)});
                    }
                }
            }
        }

        // activations
        uint32_t srow = NONE;
        if (with_tangents) {
            srow = tape_.logistic(Var{zv}, beta).i;
            for (uint32_t j = 1; j < W; ++j) tape_.logistic(Var{zv + j}, beta);
        }
        uint32_t av = tape_.softplus(Var{zv}, beta).i;
        for (uint32_t j = 1; j < W; ++j) tape_.softplus(Var{zv + j}, beta);

        std::array<uint32_t, 3> at{NONE, NONE, NONE};
        if (with_tangents) {
            for (int k = 0; k < 3; ++k) {
                auto tangent_src = [&](uint32_t j) -> Var {
                    if (first_layer_struct) return Var{wo + j * in_dim + uint32_t(k)};
                    return Var{zt[k] + j};
                };
                at[k] = tape_.mul(Var{srow}, tangent_src(0)).i;
                for (uint32_t j = 1; j < W; ++j)
                    tape_.mul(Var{srow + j}, tangent_src(j));
            }
        }

        prev_v = av;
        prev_t = at;
    }

    // output layer
    const uint32_t owo = base_ + out_w_off_, obo = base_ + out_b_off_;
    uint32_t Fv = tape_.affine(Var{owo}, Var{prev_v}, W, Var{obo}).i;
    for (uint32_t i = 1; i < 3; ++i)
        tape_.affine(Var{owo + i * W}, Var{prev_v}, W, Var{obo + i});
    std::array<uint32_t, 3> Ft{NONE, NONE, NONE};
    if (with_tangents) {
        for (int k = 0; k < 3; ++k) {
            Ft[k] = tape_.dot(Var{owo}, Var{prev_t[k]}, W).i;
            for (uint32_t i = 1; i < 3; ++i)
                tape_.dot(Var{owo + i * W}, Var{prev_t[k]}, W);
        }
    }

    TapedField out;
    for (int i = 0; i < 3; ++i) {
        out.F[i].v = Var{Fv + uint32_t(i)};
        if (with_tangents)
            for (int k = 0; k < 3; ++k) out.F[i].t[k] = Var{Ft[k] + uint32_t(i)};
    }
    out.d = tape_.norm3_guarded(out.F[0].v, out.F[1].v, out.F[2].v, guard_eps);
    out.guard_active = !(tape_.value(out.d) > guard_eps);
    if (!out.guard_active) {
        for (int i = 0; i < 3; ++i) out.G[i] = tape_.div(out.F[i].v, out.d);
    } else {
        out.G[0] = tape_.constant(0.0);
        out.G[1] = tape_.constant(0.0);
        out.G[2] = tape_.constant(1.0);
    }
    if (with_tangents) {
        for (int k = 0; k < 3; ++k) {
            ad::Var acc = tape_.mul(out.G[0], out.F[0].t[k]);
            acc = tape_.add(acc, tape_.mul(out.G[1], out.F[1].t[k]));
            acc = tape_.add(acc, tape_.mul(out.G[2], out.F[2].t[k]));
            out.grad_d[k] = acc;
        }
    }
    return out;
}

ad::Var FieldRecorder::record_frozen_distance(std::array<ad::Var, 3> y,
                                              double guard_eps) {
    using ad::Var;
    if (tape_.frozen().size() < param_count(config_))
        throw std::logic_error("frozen parameter snapshot not set");
    if (y[1].i != y[0].i + 1 || y[2].i != y[0].i + 2) {
        Var c0 = tape_.copy(y[0]);
        tape_.copy(y[1]);
        tape_.copy(y[2]);
        y = {c0, Var{c0.i + 1}, Var{c0.i + 2}};
    }
    const uint32_t W = uint32_t(config_.width);
    const double beta = config_.softplus_beta;

    uint32_t prev = y[0].i;
    for (int l = 1; l <= config_.depth; ++l) {
        const uint32_t wo = w_off_[l - 1];
        const uint32_t bo = b_off_[l - 1];
        const uint32_t in_dim = in_dim_[l - 1];
        const uint32_t in_main = (l == 1) ? 3 : W;
        const bool skip = (l == config_.skip_layer);

        uint32_t zv;
        if (!skip) {
            zv = tape_.frozen_affine(wo, Var{prev}, in_main, bo).i;
            for (uint32_t j = 1; j < W; ++j)
                tape_.frozen_affine(wo + j * in_dim, Var{prev}, in_main, bo + j);
        } else {
            uint32_t m1 = tape_.frozen_affine(wo, Var{prev}, in_main, bo).i;
            for (uint32_t j = 1; j < W; ++j)
                tape_.frozen_affine(wo + j * in_dim, Var{prev}, in_main, bo + j);
            uint32_t m2 = tape_.frozen_dot(wo + in_main, Var{y[0].i}, 3).i;
            for (uint32_t j = 1; j < W; ++j)
                tape_.frozen_dot(wo + j * in_dim + in_main, Var{y[0].i}, 3);
            zv = tape_.add(Var{m1}, Var{m2}).i;
            for (uint32_t j = 1; j < W; ++j) tape_.add(Var{m1 + j}, Var{m2 + j});
        }
        uint32_t av = tape_.softplus(Var{zv}, beta).i;
        for (uint32_t j = 1; j < W; ++j) tape_.softplus(Var{zv + j}, beta);
        prev = av;
    }
    uint32_t F0 = tape_.frozen_affine(out_w_off_, Var{prev}, W, out_b_off_).i;
    for (uint32_t i = 1; i < 3; ++i)
        tape_.frozen_affine(out_w_off_ + i * W, Var{prev}, W, out_b_off_ + i);
    return tape_.norm3_guarded(Var{F0}, Var{F0 + 1}, Var{F0 + 2}, guard_eps);
}

FieldView make_field_view(const Parameters& params, double guard_eps) {
    FieldView v;
    v.distance = [params](Vec3 x) { return norm(forward(params, x)); };
    v.pull = [params](Vec3 x) { return forward(params, x); };
    v.eval = [params, guard_eps](Vec3 x) {
        return eval_field(params, x, guard_eps);
    };
    v.eval_many = [params](const Vec3* pts, size_t n, double* d_out,
                           Vec3* F_out) {
        forward_batch(params, pts, n, d_out, F_out);
    };
    return v;
}

void field_values(const FieldView& view, const Vec3* pts, size_t n,
                  double* d_out, Vec3* F_out) {
    if (view.eval_many) {
        view.eval_many(pts, n, d_out, F_out);
        return;
    }
    for (size_t i = 0; i < n; ++i) {
        Vec3 F = view.pull(pts[i]);
        d_out[i] = norm(F);
        if (F_out) F_out[i] = F;
    }
}

// --- checkpoints ---------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'N', 'S', 'P', 'F', 'L', 'D', '0', '1'};

template <typename T>
void put(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
void get(std::ifstream& f, T& v) {
    f.read(reinterpret_cast<char*>(&v), sizeof v);
}
}  // namespace

void save_checkpoint(const std::string& path, const Parameters& params,
                     uint64_t seed, int64_t epoch) {
    if (params.data.size() != param_count(params.config))
        throw std::invalid_argument("parameter vector does not match config");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    f.write(kMagic, sizeof kMagic);
    put(f, int32_t(params.config.depth));
    put(f, int32_t(params.config.width));
    put(f, int32_t(params.config.skip_layer));
    put(f, params.config.softplus_beta);
    put(f, seed);
    put(f, epoch);
    put(f, uint64_t(params.data.size()));
    f.write(reinterpret_cast<const char*>(params.data.data()),
            std::streamsize(params.data.size() * sizeof(double)));
    if (!f) throw std::runtime_error("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    f.read(magic, sizeof magic);
    if (!f || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw std::runtime_error("not a field checkpoint: " + path);
    Checkpoint c;
    int32_t depth, width, skip;
    get(f, depth);
    get(f, width);
    get(f, skip);
    get(f, c.params.config.softplus_beta);
    c.params.config.depth = depth;
    c.params.config.width = width;
    c.params.config.skip_layer = skip;
    get(f, c.seed);
    get(f, c.epoch);
    uint64_t count = 0;
    get(f, count);
    if (!f || count != param_count(c.params.config))
        throw std::runtime_error("checkpoint parameter count mismatch: " + path);
    c.params.data.resize(count);
    f.read(reinterpret_cast<char*>(c.params.data.data()),
           std::streamsize(count * sizeof(double)));
    if (!f) throw std::runtime_error("truncated checkpoint: " + path);
    return c;
}

}  // namespace nsp
