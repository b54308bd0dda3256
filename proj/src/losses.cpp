#include "nsp/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace nsp {

bool LossBreakdown::finite() const {
    return std::isfinite(manifold) && std::isfinite(gm) && std::isfinite(sp) &&
           std::isfinite(ma) && std::isfinite(total) && std::isfinite(eikonal);
}

double delta_eps(double x, double eps) {
    double th = std::tanh(x / eps);
    return 1.0 - th * th;
}

namespace {
void require_nonempty(size_t n, const char* which) {
    if (n == 0) throw std::invalid_argument(std::string(which) + ": empty batch");
}
}  // namespace

double manifold_loss_value(const FieldView& f, const std::vector<Vec3>& pts) {
    require_nonempty(pts.size(), "manifold loss");
    double acc = 0.0;
    for (const Vec3& p : pts) acc += std::fabs(f.eval(p).d);
    return acc / double(pts.size());
}

double gradient_matching_loss_value(const FieldView& f, const std::vector<Vec3>& pts) {
    require_nonempty(pts.size(), "gradient-matching loss");
    double acc = 0.0;
    for (const Vec3& p : pts) {
        FieldEval e = f.eval(p);
        acc += dot(e.grad_d - e.G, e.grad_d - e.G);
    }
    return acc / double(pts.size());
}

double shortest_path_loss_value(const FieldView& f, const std::vector<Vec3>& pts) {
    require_nonempty(pts.size(), "shortest-path loss");
    double acc = 0.0;
    for (const Vec3& p : pts) {
        Vec3 y = p - f.pull(p);
        double dh = f.distance(y);
        acc += dh * dh;
    }
    return acc / double(pts.size());
}

double minimal_area_loss_value(const FieldView& f, const std::vector<Vec3>& pts,
                               double eps) {
    require_nonempty(pts.size(), "minimal-area loss");
    double acc = 0.0;
    for (const Vec3& p : pts) acc += delta_eps(f.eval(p).d, eps);
    return acc / double(pts.size());
}

double eikonal_residual(const FieldView& f, const std::vector<Vec3>& pts) {
    require_nonempty(pts.size(), "eikonal residual");
    double acc = 0.0;
    for (const Vec3& p : pts) acc += std::fabs(norm(f.eval(p).grad_d) - 1.0);
    return acc / double(pts.size());
}

LossBreakdown total_loss_value(const FieldView& f,
                               const std::vector<Vec3>& surface_pts,
                               const std::vector<Vec3>& domain_pts,
                               const LossWeights& w) {
    LossBreakdown b;
    b.manifold = manifold_loss_value(f, surface_pts);
    b.gm = gradient_matching_loss_value(f, domain_pts);
    b.sp = shortest_path_loss_value(f, domain_pts);
    b.ma = minimal_area_loss_value(f, domain_pts, w.delta_eps);
    b.total = b.manifold + w.lambda_gm * b.gm + w.lambda_sp * b.sp +
              w.lambda_ma * b.ma;
    b.eikonal = eikonal_residual(f, domain_pts);
    return b;
}

// --- taped -------------------------------------------------------------------

TapedSurfaceSums record_surface_sums(ad::Tape& tape, FieldRecorder& rec,
                                     const Vec3* pts, size_t n, double guard_eps) {
    require_nonempty(n, "manifold loss");
    TapedSurfaceSums out;
    ad::Var acc;
    for (size_t i = 0; i < n; ++i) {
        TapedField f = rec.record(pts[i], false, guard_eps);
        ad::Var term = tape.abs(f.d);
        acc = acc.valid() ? tape.add(acc, term) : term;
    }
    out.manifold_sum = acc;
    out.manifold_value = tape.value(acc);
    return out;
}

TapedDomainSums record_domain_sums(ad::Tape& tape, FieldRecorder& rec,
                                   const Vec3* pts, size_t n, double deps,
                                   double guard_eps) {
    require_nonempty(n, "domain losses");
    if (deps <= 0.0) throw std::invalid_argument("delta_eps must be positive");
    TapedDomainSums out;
    ad::Var gm_acc, sp_acc, ma_acc;
    for (size_t i = 0; i < n; ++i) {
        const Vec3& x = pts[i];
        TapedField f = rec.record(x, true, guard_eps);

        // || grad d - G ||^2
        ad::Var gm_term;
        {
            ad::Var dx = tape.sub(f.grad_d[0], f.G[0]);
            ad::Var dy = tape.sub(f.grad_d[1], f.G[1]);
            ad::Var dz = tape.sub(f.grad_d[2], f.G[2]);
            gm_term = tape.add(tape.add(tape.square(dx), tape.square(dy)),
                               tape.square(dz));
        }

        // dhat(x - F(x))^2 with the outer distance frozen
        ad::Var sp_term;
        {
            std::array<ad::Var, 3> y;
            y[0] = tape.sub(tape.constant(x.x), f.F[0].v);
            y[1] = tape.sub(tape.constant(x.y), f.F[1].v);
            y[2] = tape.sub(tape.constant(x.z), f.F[2].v);
            ad::Var dh = rec.record_frozen_distance(y, guard_eps);
            sp_term = tape.square(dh);
        }

        // 1 - tanh^2(d / eps)
        ad::Var ma_term;
        {
            ad::Var th = tape.tanh(tape.mul_const(f.d, 1.0 / deps));
            ma_term = tape.add_const(tape.neg(tape.square(th)), 1.0);
        }

        gm_acc = gm_acc.valid() ? tape.add(gm_acc, gm_term) : gm_term;
        sp_acc = sp_acc.valid() ? tape.add(sp_acc, sp_term) : sp_term;
        ma_acc = ma_acc.valid() ? tape.add(ma_acc, ma_term) : ma_term;

        double gx = tape.value(f.grad_d[0]), gy = tape.value(f.grad_d[1]),
               gz = tape.value(f.grad_d[2]);
        out.eikonal_sum += std::fabs(std::sqrt(gx * gx + gy * gy + gz * gz) - 1.0);
    }
    out.gm_sum = gm_acc;
    out.sp_sum = sp_acc;
    out.ma_sum = ma_acc;
    out.gm_value = tape.value(gm_acc);
    out.sp_value = tape.value(sp_acc);
    out.ma_value = tape.value(ma_acc);
    return out;
}

TapedLoss record_total_loss(ad::Tape& tape, FieldRecorder& rec,
                            const std::vector<Vec3>& surface_pts,
                            const std::vector<Vec3>& domain_pts,
                            const LossWeights& w, double guard_eps) {
    TapedSurfaceSums s =
        record_surface_sums(tape, rec, surface_pts.data(), surface_pts.size(),
                            guard_eps);
    TapedDomainSums d =
        record_domain_sums(tape, rec, domain_pts.data(), domain_pts.size(),
                           w.delta_eps, guard_eps);

    double ns = double(surface_pts.size()), nd = double(domain_pts.size());
    TapedLoss out;
    out.manifold = tape.mul_const(s.manifold_sum, 1.0 / ns);
    out.gm = tape.mul_const(d.gm_sum, 1.0 / nd);
    out.sp = tape.mul_const(d.sp_sum, 1.0 / nd);
    out.ma = tape.mul_const(d.ma_sum, 1.0 / nd);
    ad::Var total = out.manifold;
    total = tape.add(total, tape.mul_const(out.gm, w.lambda_gm));
    total = tape.add(total, tape.mul_const(out.sp, w.lambda_sp));
    total = tape.add(total, tape.mul_const(out.ma, w.lambda_ma));
    out.total = total;

    out.values.manifold = tape.value(out.manifold);
    out.values.gm = tape.value(out.gm);
    out.values.sp = tape.value(out.sp);
    out.values.ma = tape.value(out.ma);
    out.values.total = tape.value(out.total);
    out.values.eikonal = d.eikonal_sum / nd;
    return out;
}

}  // namespace nsp
