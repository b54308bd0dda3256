#include "doctest.h"
#include "nsp/losses.hpp"
#include "nsp/oracle.hpp"

#include <cmath>
#include <random>

using namespace nsp;

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec3 random_in_domain(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    return {u(rng), u(rng), u(rng)};
}

// True when x is far enough from the distance field's kinks (the surface
// itself and equidistant loci) for central differences to be trustworthy.
bool smooth_at(const AnalyticShape& s, Vec3 x) {
    double d = exact_distance(s, x);
    if (d < 0.05) return false;
    double rho = std::hypot(x.x, x.y);
    switch (s.tag) {
        case ShapeTag::kPlane:
            return true;
        case ShapeTag::kSphere:
            return norm(x) > 0.1;
        case ShapeTag::kHemisphere:
            return norm(x) > 0.1 && !(x.z < 0.05 && rho < 0.1);
        case ShapeTag::kPartialCylinder: {
            if (rho < 0.1) return false;
            double phi = std::atan2(x.y, x.x);
            if (phi < 0) phi += 2 * kPi;
            if (phi > s.theta_max &&
                std::fabs(2 * phi - (s.theta_max + 2 * kPi)) < 0.1)
                return false;  // near the angular-gap bisector
            return true;
        }
    }
    return false;
}

std::vector<AnalyticShape> all_shapes() {
    return {AnalyticShape::plane(), AnalyticShape::sphere(),
            AnalyticShape::hemisphere(), AnalyticShape::partial_cylinder()};
}

}  // namespace

TEST_SUITE_BEGIN("oracle");

TEST_CASE("closed-form distances at hand-computed points") {
    auto sph = AnalyticShape::sphere(0.6);
    CHECK(exact_distance(sph, {1, 0, 0}) == doctest::Approx(0.4).epsilon(1e-12));
    ExactField f = exact_field(sph, {1, 0, 0});
    CHECK(f.F.x == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(f.F.y == doctest::Approx(0.0));
    CHECK(f.F.z == doctest::Approx(0.0));
    CHECK_FALSE(f.equidistant);

    // Below a hemisphere the nearest points are the rim circle.
    auto hemi = AnalyticShape::hemisphere(0.6);
    CHECK(exact_distance(hemi, {0, 0, -0.6}) ==
          doctest::Approx(0.6 * std::sqrt(2.0)).epsilon(1e-12));
    CHECK(exact_field(hemi, {0, 0, -0.6}).equidistant);

    // Axis point inside the cylinder shell.
    auto cyl = AnalyticShape::partial_cylinder();
    CHECK(exact_distance(cyl, {0, 0, 0}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(exact_field(cyl, {0, 0, 0}).equidistant);

    auto pl = AnalyticShape::plane();
    CHECK(exact_distance(pl, {0.3, -0.2, 0.7}) ==
          doctest::Approx(0.7).epsilon(1e-12));
    CHECK(exact_distance(pl, {2.0, 0, 0}) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("shape parameter validation") {
    CHECK_THROWS(AnalyticShape::sphere(0.0));
    CHECK_THROWS(AnalyticShape::sphere(-1.0));
    CHECK_THROWS(AnalyticShape::plane(0.0));
    AnalyticShape bad = AnalyticShape::partial_cylinder();
    bad.theta_max = 7.0;  // > 2*pi
    CHECK_THROWS(bad.validate());
    bad = AnalyticShape::partial_cylinder();
    bad.half_height = 0.0;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("brute force scan at hand-computed points") {
    PointCloud single;
    single.points = {{0, 0, 0}};
    auto r = brute_force_distance(single, {3, 4, 0});
    CHECK(r.distance == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(dist(r.nearest, {0, 0, 0}) == 0.0);

    PointCloud cloud;
    cloud.points = {{0.1, 0.2, 0.3}, {-0.5, 0, 0}, {0.9, 0.9, 0.9}};
    auto m = brute_force_distance(cloud, {-0.5, 0, 0});
    CHECK(m.distance == 0.0);
    CHECK(dist(m.nearest, {-0.5, 0, 0}) == 0.0);

    PointCloud empty;
    CHECK_THROWS(brute_force_distance(empty, {0, 0, 0}));
}

TEST_CASE("closed forms agree with brute force over dense samplings") {
    struct Case {
        AnalyticShape shape;
        size_t samples;
        double slack;  // sampling resolution allowance
    };
    std::vector<Case> cases = {
        {AnalyticShape::plane(), 200000, 0.025},
        {AnalyticShape::sphere(), 200000, 0.025},
        {AnalyticShape::hemisphere(), 1000000, 0.01},
        {AnalyticShape::partial_cylinder(), 200000, 0.02},
    };
    std::mt19937_64 rng(404);
    for (const Case& c : cases) {
        CAPTURE(c.shape.name());
        PointCloud samples = sample_shape(c.shape, c.samples, 1);
        for (int q = 0; q < 100; ++q) {
            Vec3 x = random_in_domain(rng);
            double exact = exact_distance(c.shape, x);
            double brute = brute_force_distance(samples, x).distance;
            // Samples lie on the shape, so they can never beat the true
            // minimum; with dense coverage they cannot exceed it by much.
            CHECK(brute >= exact - 1e-12);
            CHECK(brute - exact < c.slack);
        }
    }
}

TEST_CASE("field invariants at random queries") {
    std::mt19937_64 rng(77);
    for (const AnalyticShape& s : all_shapes()) {
        CAPTURE(s.name());
        for (int q = 0; q < 500; ++q) {
            Vec3 x = random_in_domain(rng);
            ExactField f = exact_field(s, x);
            CHECK(f.distance >= 0.0);
            // The field length is the distance.
            CHECK(std::fabs(norm(f.F) - f.distance) <= 1e-12);
            // Walking the field back lands on the shape.
            Vec3 p = x - f.F;
            CHECK(exact_distance(s, p) <= 1e-9);
        }
    }
}

TEST_CASE("distance is 1-Lipschitz") {
    std::mt19937_64 rng(78);
    for (const AnalyticShape& s : all_shapes()) {
        CAPTURE(s.name());
        for (int q = 0; q < 2000; ++q) {
            Vec3 a = random_in_domain(rng), b = random_in_domain(rng);
            CHECK(std::fabs(exact_distance(s, a) - exact_distance(s, b)) <=
                  dist(a, b) + 1e-12);
        }
    }
}

TEST_CASE("analytic gradient matches finite differences of the distance") {
    std::mt19937_64 rng(79);
    const double h = 1e-5;
    for (const AnalyticShape& s : all_shapes()) {
        CAPTURE(s.name());
        FieldView view = make_analytic_view(s);
        int tested = 0;
        while (tested < 200) {
            Vec3 x = random_in_domain(rng);
            if (!smooth_at(s, x)) continue;
            ++tested;
            FieldEval e = view.eval(x);
            double fd[3];
            for (int k = 0; k < 3; ++k) {
                Vec3 hi = x, lo = x;
                (&hi.x)[k] += h;
                (&lo.x)[k] -= h;
                fd[k] = (exact_distance(s, hi) - exact_distance(s, lo)) / (2 * h);
            }
            CHECK(std::fabs(e.grad_d.x - fd[0]) < 1e-6);
            CHECK(std::fabs(e.grad_d.y - fd[1]) < 1e-6);
            CHECK(std::fabs(e.grad_d.z - fd[2]) < 1e-6);
        }
    }
}

TEST_CASE("equidistant loci are flagged and their neighbors are not") {
    auto sph = AnalyticShape::sphere(0.6);
    CHECK(exact_field(sph, {0, 0, 0}).equidistant);
    CHECK_FALSE(exact_field(sph, {0.01, 0, 0}).equidistant);

    auto hemi = AnalyticShape::hemisphere(0.6);
    CHECK(exact_field(hemi, {0, 0, -0.3}).equidistant);
    CHECK_FALSE(exact_field(hemi, {0.01, 0, -0.3}).equidistant);
    CHECK(exact_field(hemi, {0, 0, 0}).equidistant);  // center of the rim disk

    auto cyl = AnalyticShape::partial_cylinder();
    CHECK(exact_field(cyl, {0, 0, 0.2}).equidistant);
    CHECK(exact_field(cyl, {0, 0, 0.9}).equidistant);  // above the axis

    // The angular gap spans (3*pi/2, 2*pi); its bisector plane at 7*pi/4 is
    // equidistant to both straight edges.
    double mid = 1.75 * kPi;
    Vec3 on_mid{0.8 * std::cos(mid), 0.8 * std::sin(mid), 0.0};
    CHECK(exact_field(cyl, on_mid).equidistant);

    double off = mid + 0.05;
    Vec3 off_mid{0.8 * std::cos(off), 0.8 * std::sin(off), 0.0};
    ExactField f = exact_field(cyl, off_mid);
    CHECK_FALSE(f.equidistant);
    // Past the bisector toward angle 2*pi, the nearest edge is at angle 0.
    Vec3 p = off_mid - f.F;
    CHECK(p.x == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(std::fabs(p.y) < 1e-9);
}

TEST_CASE("distance is continuous across case boundaries") {
    auto hemi = AnalyticShape::hemisphere(0.6);
    std::mt19937_64 rng(80);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int q = 0; q < 200; ++q) {
        double rho = 0.05 + 0.9 * u(rng), phi = 2 * kPi * u(rng);
        Vec3 above{rho * std::cos(phi), rho * std::sin(phi), 1e-9};
        Vec3 below{rho * std::cos(phi), rho * std::sin(phi), -1e-9};
        CHECK(std::fabs(exact_distance(hemi, above) -
                        exact_distance(hemi, below)) < 1e-8);
    }
    auto cyl = AnalyticShape::partial_cylinder();
    for (int q = 0; q < 200; ++q) {
        double rho = 0.05 + 0.9 * u(rng), z = 1.8 * u(rng) - 0.9;
        Vec3 in{rho * std::cos(1e-9), rho * std::sin(1e-9), z};
        Vec3 out{rho * std::cos(-1e-9), rho * std::sin(-1e-9), z};
        CHECK(std::fabs(exact_distance(cyl, in) - exact_distance(cyl, out)) <
              1e-8);
    }
}

TEST_CASE("surface sampling is on-shape, exact-count, and reproducible") {
    for (const AnalyticShape& s : all_shapes()) {
        CAPTURE(s.name());
        PointCloud cloud = sample_shape(s, 5000, 42);
        REQUIRE(cloud.points.size() == 5000);
        for (const Vec3& p : cloud.points) CHECK(exact_distance(s, p) <= 1e-9);
        PointCloud again = sample_shape(s, 5000, 42);
        for (size_t i = 0; i < cloud.points.size(); ++i)
            CHECK(dist(cloud.points[i], again.points[i]) == 0.0);
    }
    CHECK_THROWS(sample_shape(AnalyticShape::sphere(), 0, 1));
}

TEST_CASE("hemisphere sampling is area-uniform in height") {
    // Area-uniform sphere-cap sampling makes z uniform on [0, r]; compare the
    // empirical CDF against that law with a Kolmogorov-Smirnov statistic.
    const size_t n = 20000;
    PointCloud cloud = sample_shape(AnalyticShape::hemisphere(0.6), n, 9);
    std::vector<double> z;
    z.reserve(n);
    for (const Vec3& p : cloud.points) {
        CHECK(p.z >= 0.0);
        z.push_back(p.z / 0.6);
    }
    std::sort(z.begin(), z.end());
    double d_stat = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double lo = double(i) / n, hi = double(i + 1) / n;
        d_stat = std::max({d_stat, std::fabs(z[i] - lo), std::fabs(z[i] - hi)});
    }
    CHECK(d_stat < 2.0 / std::sqrt(double(n)));  // far beyond the 0.1% critical value
}

TEST_CASE("partial cylinder sampling avoids the angular gap") {
    PointCloud cloud = sample_shape(AnalyticShape::partial_cylinder(), 20000, 3);
    int bins[6] = {0};
    for (const Vec3& p : cloud.points) {
        double phi = std::atan2(p.y, p.x);
        if (phi < 0) phi += 2 * kPi;
        CHECK(phi <= 1.5 * kPi + 1e-9);
        CHECK(std::fabs(p.z) <= 0.5);
        int b = std::min(5, int(phi / (1.5 * kPi) * 6));
        bins[b]++;
    }
    double mean = 20000.0 / 6, sd = std::sqrt(20000.0 * (1.0 / 6) * (5.0 / 6));
    for (int b : bins) CHECK(std::fabs(b - mean) < 4 * sd);
}

TEST_CASE("analytic view satisfies the learned-field evaluation contract") {
    std::mt19937_64 rng(81);
    for (const AnalyticShape& s : all_shapes()) {
        CAPTURE(s.name());
        FieldView view = make_analytic_view(s);
        std::vector<Vec3> pts;
        for (int q = 0; q < 200; ++q) pts.push_back(random_in_domain(rng));
        for (const Vec3& x : pts) {
            FieldEval e = view.eval(x);
            CHECK(e.d == view.distance(x));
            CHECK(dist(e.F, view.pull(x)) == 0.0);
            if (!e.guard_active) CHECK(std::fabs(norm(e.G) - 1.0) < 1e-12);
            CHECK(dist(e.grad_d, e.G) == 0.0);
        }
        // An exact distance field has zero gradient-matching loss and unit
        // gradient norm everywhere it is defined.
        CHECK(gradient_matching_loss_value(view, pts) == 0.0);
        CHECK(eikonal_residual(view, pts) < 1e-12);
        // Points on the shape have zero manifold loss.
        PointCloud on = sample_shape(s, 500, 12);
        CHECK(manifold_loss_value(view, on.points) < 1e-9);
    }
}

TEST_SUITE_END();
