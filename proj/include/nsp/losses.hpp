#pragma once

#include "nsp/autodiff.hpp"
#include "nsp/field.hpp"
#include "nsp/geometry.hpp"

#include <vector>

namespace nsp {

struct LossWeights {
    double lambda_gm = 0.06;
    double lambda_sp = 0.01;
    double lambda_ma = 0.0;  // surface-area penalty weight, chosen per dataset
    double delta_eps = 0.01;
};

struct LossBreakdown {
    double manifold = 0.0;
    double gm = 0.0;
    double sp = 0.0;
    double ma = 0.0;
    double total = 0.0;
    double eikonal = 0.0;  // diagnostic: mean | |grad d| - 1 |, not optimized

    bool finite() const;
};

// Smoothed surface indicator 1 - tanh^2(x / eps): 1 at the zero set, decaying
// within a band of width ~eps.
double delta_eps(double x, double eps);

// ---------------------------------------------------------------------------
// Value-level evaluation over any field view (trained or analytic stand-in).
// Plain Monte Carlo means over the given batches, no volume factors.
// ---------------------------------------------------------------------------

double manifold_loss_value(const FieldView& f, const std::vector<Vec3>& surface_pts);
double gradient_matching_loss_value(const FieldView& f, const std::vector<Vec3>& domain_pts);
double shortest_path_loss_value(const FieldView& f, const std::vector<Vec3>& domain_pts);
double minimal_area_loss_value(const FieldView& f, const std::vector<Vec3>& domain_pts,
                               double eps);
double eikonal_residual(const FieldView& f, const std::vector<Vec3>& domain_pts);

LossBreakdown total_loss_value(const FieldView& f,
                               const std::vector<Vec3>& surface_pts,
                               const std::vector<Vec3>& domain_pts,
                               const LossWeights& w);

// ---------------------------------------------------------------------------
// Taped recording for training. The tape must already hold the field's
// parameters as leaves; for the shortest-path term the tape's frozen snapshot
// must hold the same values (the outer distance is a frozen function, so its
// gradient path runs only through the pulled point).
// ---------------------------------------------------------------------------

// Sum over points of |d|; divide by the full batch size for the mean.
struct TapedSurfaceSums {
    ad::Var manifold_sum;
    double manifold_value = 0.0;
};
TapedSurfaceSums record_surface_sums(ad::Tape& tape, FieldRecorder& rec,
                                     const Vec3* pts, size_t n,
                                     double guard_eps = 1e-12);

// Sums over points of the three domain terms, plus the eikonal diagnostic
// accumulated from recorded values.
struct TapedDomainSums {
    ad::Var gm_sum, sp_sum, ma_sum;
    double gm_value = 0.0, sp_value = 0.0, ma_value = 0.0;
    double eikonal_sum = 0.0;
};
TapedDomainSums record_domain_sums(ad::Tape& tape, FieldRecorder& rec,
                                   const Vec3* pts, size_t n, double delta_eps,
                                   double guard_eps = 1e-12);

// One-tape combination over full batches: total = manifold + lambda_gm gm +
// lambda_sp sp + lambda_ma ma, each term a Monte Carlo mean.
struct TapedLoss {
    ad::Var total, manifold, gm, sp, ma;
    LossBreakdown values;
};
TapedLoss record_total_loss(ad::Tape& tape, FieldRecorder& rec,
                            const std::vector<Vec3>& surface_pts,
                            const std::vector<Vec3>& domain_pts,
                            const LossWeights& w, double guard_eps = 1e-12);

}  // namespace nsp
