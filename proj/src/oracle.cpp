#include "nsp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "nsp/sampler.hpp"

namespace nsp {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_finite(Vec3 x) {
    if (!finite(x)) throw std::invalid_argument("query point is not finite");
}

// Nearest point on the square patch z=0, |x|,|y| <= h.  The patch is convex,
// so the nearest point is the coordinate-wise clamp and is always unique.
NearestResult nearest_plane(const AnalyticShape& s, Vec3 x) {
    NearestResult r;
    r.point = {std::clamp(x.x, -s.half_extent, s.half_extent),
               std::clamp(x.y, -s.half_extent, s.half_extent), 0.0};
    r.distance = dist(x, r.point);
    return r;
}

NearestResult nearest_sphere(const AnalyticShape& s, Vec3 x, double tol) {
    NearestResult r;
    double n = norm(x);
    if (n <= tol) {
        // Center: every surface point is nearest.
        r.point = {s.radius, 0, 0};
        r.equidistant = true;
    } else {
        r.point = (s.radius / n) * x;
    }
    r.distance = dist(x, r.point);
    return r;
}

// Case split for the cap z >= 0 (rim included):
//  - query in the upper half space: the radial projection onto the full
//    sphere lands in the cap and realizes the minimum;
//  - query below the equator plane: the distance to a cap point at polar
//    angle psi decreases monotonically toward the rim (d/dpsi of the squared
//    distance is 2r(z sin(psi) - rho cos(psi)) <= 0 for z < 0), so the
//    nearest point is on the rim circle.
NearestResult nearest_hemisphere(const AnalyticShape& s, Vec3 x, double tol) {
    NearestResult r;
    if (x.z >= 0.0) {
        double n = norm(x);
        if (n <= tol) {
            r.point = {0, 0, s.radius};
            r.equidistant = true;
        } else {
            r.point = (s.radius / n) * x;
        }
    } else {
        double rho = std::hypot(x.x, x.y);
        if (rho <= tol) {
            // Negative axis: the whole rim is equidistant.
            r.point = {s.radius, 0, 0};
            r.equidistant = true;
        } else {
            r.point = {s.radius * x.x / rho, s.radius * x.y / rho, 0.0};
        }
    }
    r.distance = dist(x, r.point);
    return r;
}

// The squared distance to the shell point (r cos t, r sin t, z) separates
// into an angular term rho^2 + r^2 - 2 rho r cos(phi - t), minimized by the
// in-range angle nearest to phi, and a height term (x_z - z)^2, minimized by
// clamping.  Queries in the angular gap have two edge candidates; queries on
// the axis are equidistant to the whole arc.
NearestResult nearest_partial_cylinder(const AnalyticShape& s, Vec3 x,
                                       double tol) {
    NearestResult r;
    const double zc = std::clamp(x.z, -s.half_height, s.half_height);
    const double rho = std::hypot(x.x, x.y);
    if (rho <= tol) {
        r.point = {s.radius, 0.0, zc};
        r.equidistant = true;
        r.distance = dist(x, r.point);
        return r;
    }
    double phi = std::atan2(x.y, x.x);
    if (phi < 0.0) phi += 2.0 * kPi;
    if (phi <= s.theta_max) {
        r.point = {s.radius * x.x / rho, s.radius * x.y / rho, zc};
        r.distance = dist(x, r.point);
        return r;
    }
    // Angular gap: compare the two boundary edges.
    Vec3 p_hi{s.radius * std::cos(s.theta_max), s.radius * std::sin(s.theta_max),
              zc};
    Vec3 p_lo{s.radius, 0.0, zc};
    double d_hi = dist(x, p_hi), d_lo = dist(x, p_lo);
    if (d_hi <= d_lo) {
        r.point = p_hi;
        r.distance = d_hi;
    } else {
        r.point = p_lo;
        r.distance = d_lo;
    }
    if (std::fabs(d_hi - d_lo) < tol && dist(p_hi, p_lo) > tol)
        r.equidistant = true;
    return r;
}

}  // namespace

AnalyticShape AnalyticShape::plane(double half_extent) {
    AnalyticShape s;
    s.tag = ShapeTag::kPlane;
    s.half_extent = half_extent;
    s.validate();
    return s;
}

AnalyticShape AnalyticShape::sphere(double radius) {
    AnalyticShape s;
    s.tag = ShapeTag::kSphere;
    s.radius = radius;
    s.validate();
    return s;
}

AnalyticShape AnalyticShape::hemisphere(double radius) {
    AnalyticShape s;
    s.tag = ShapeTag::kHemisphere;
    s.radius = radius;
    s.validate();
    return s;
}

AnalyticShape AnalyticShape::partial_cylinder() {
    AnalyticShape s;
    s.tag = ShapeTag::kPartialCylinder;
    s.radius = 0.5;
    s.theta_max = 1.5 * kPi;
    s.half_height = 0.5;
    s.validate();
    return s;
}

void AnalyticShape::validate() const {
    auto bad = [](const std::string& what) {
        throw std::invalid_argument("invalid shape parameter: " + what);
    };
    switch (tag) {
        case ShapeTag::kPlane:
            if (!(half_extent > 0.0) || !std::isfinite(half_extent))
                bad("plane half_extent must be positive");
            break;
        case ShapeTag::kSphere:
        case ShapeTag::kHemisphere:
            if (!(radius > 0.0) || !std::isfinite(radius))
                bad("radius must be positive");
            break;
        case ShapeTag::kPartialCylinder:
            if (!(radius > 0.0) || !std::isfinite(radius))
                bad("radius must be positive");
            if (!(theta_max > 0.0) || theta_max > 2.0 * kPi)
                bad("theta_max must lie in (0, 2*pi]");
            if (!(half_height > 0.0) || !std::isfinite(half_height))
                bad("half_height must be positive");
            break;
    }
}

const char* AnalyticShape::name() const {
    switch (tag) {
        case ShapeTag::kPlane: return "plane";
        case ShapeTag::kSphere: return "sphere";
        case ShapeTag::kHemisphere: return "hemisphere";
        case ShapeTag::kPartialCylinder: return "partial_cylinder";
    }
    return "unknown";
}

NearestResult nearest_on_shape(const AnalyticShape& shape, Vec3 x, double tol) {
    shape.validate();
    require_finite(x);
    switch (shape.tag) {
        case ShapeTag::kPlane: return nearest_plane(shape, x);
        case ShapeTag::kSphere: return nearest_sphere(shape, x, tol);
        case ShapeTag::kHemisphere: return nearest_hemisphere(shape, x, tol);
        case ShapeTag::kPartialCylinder:
            return nearest_partial_cylinder(shape, x, tol);
    }
    throw std::logic_error("unreachable shape tag");
}

double exact_distance(const AnalyticShape& shape, Vec3 x) {
    return nearest_on_shape(shape, x).distance;
}

ExactField exact_field(const AnalyticShape& shape, Vec3 x, double tol) {
    NearestResult n = nearest_on_shape(shape, x, tol);
    return ExactField{x - n.point, n.distance, n.equidistant};
}

BruteForceResult brute_force_distance(const PointCloud& cloud, Vec3 x) {
    if (cloud.points.empty())
        throw std::invalid_argument("brute_force_distance: empty cloud");
    require_finite(x);
    BruteForceResult best;
    best.distance = std::numeric_limits<double>::infinity();
    for (const Vec3& p : cloud.points) {
        double d = dist(x, p);
        if (d < best.distance) {
            best.distance = d;
            best.nearest = p;
        }
    }
    return best;
}

PointCloud sample_shape(const AnalyticShape& shape, size_t count,
                        uint64_t seed) {
    shape.validate();
    if (count < 1) throw std::invalid_argument("sample_shape: count must be >= 1");
    std::mt19937_64 rng(split_seed(seed, Stream::kInit));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    PointCloud cloud;
    cloud.points.reserve(count);
    cloud.source = shape.name();
    for (size_t i = 0; i < count; ++i) {
        switch (shape.tag) {
            case ShapeTag::kPlane: {
                double h = shape.half_extent;
                cloud.points.push_back(
                    {(2.0 * unit(rng) - 1.0) * h, (2.0 * unit(rng) - 1.0) * h, 0.0});
                break;
            }
            case ShapeTag::kSphere:
            case ShapeTag::kHemisphere: {
                // Area-uniform on a sphere: height is uniform over its range.
                double r = shape.radius;
                double z_lo = (shape.tag == ShapeTag::kHemisphere) ? 0.0 : -r;
                double z = z_lo + unit(rng) * (r - z_lo);
                double phi = 2.0 * kPi * unit(rng);
                double rho = std::sqrt(std::max(0.0, r * r - z * z));
                cloud.points.push_back({rho * std::cos(phi), rho * std::sin(phi), z});
                break;
            }
            case ShapeTag::kPartialCylinder: {
                double t = shape.theta_max * unit(rng);
                double z = (2.0 * unit(rng) - 1.0) * shape.half_height;
                cloud.points.push_back(
                    {shape.radius * std::cos(t), shape.radius * std::sin(t), z});
                break;
            }
        }
    }
    return cloud;
}

FieldView make_analytic_view(const AnalyticShape& shape, double guard_eps) {
    shape.validate();
    FieldView view;
    view.distance = [shape](Vec3 x) { return exact_distance(shape, x); };
    view.pull = [shape](Vec3 x) { return exact_field(shape, x).F; };
    view.eval = [shape, guard_eps](Vec3 x) {
        ExactField f = exact_field(shape, x);
        FieldEval e;
        e.F = f.F;
        e.d = f.distance;
        if (f.distance > guard_eps) {
            e.G = (1.0 / f.distance) * f.F;
        } else {
            e.G = {0, 0, 1};
            e.guard_active = true;
        }
        // For an exact distance field the distance gradient is the unit
        // direction away from the nearest point.
        e.grad_d = e.G;
        return e;
    };
    return view;
}

}  // namespace nsp
