#pragma once

// Ground-truth distance fields for simple analytic surfaces, plus a
// brute-force nearest-point scan over arbitrary point clouds.  These provide
// independent references against which learned fields, extraction, and
// metrics are validated.

#include <cstdint>

#include "nsp/field.hpp"
#include "nsp/geometry.hpp"

namespace nsp {

enum class ShapeTag { kPlane, kSphere, kHemisphere, kPartialCylinder };

// An analytic surface (a 2-manifold with boundary, not a solid):
//   plane            square patch z = 0, |x| <= half_extent, |y| <= half_extent
//   sphere           full sphere of `radius` centered at the origin
//   hemisphere       upper cap z >= 0 of that sphere, rim circle included
//   partial_cylinder lateral shell x = r cos(t), y = r sin(t), t in
//                    [0, theta_max], z in [-half_height, half_height]
struct AnalyticShape {
    ShapeTag tag = ShapeTag::kSphere;
    double radius = 0.6;       // sphere / hemisphere / cylinder radius
    double half_extent = 1.0;  // plane patch half side length
    double theta_max = 0.0;    // cylinder angular extent, radians
    double half_height = 0.0;  // cylinder half height

    static AnalyticShape plane(double half_extent = 1.0);
    static AnalyticShape sphere(double radius = 0.6);
    static AnalyticShape hemisphere(double radius = 0.6);
    // Three-quarter cylinder shell: r = 0.5, t in [0, 3*pi/2], |z| <= 0.5.
    static AnalyticShape partial_cylinder();

    // Throws std::invalid_argument when a parameter is outside its validity
    // range (radius/extents positive, theta_max in (0, 2*pi]).
    void validate() const;

    const char* name() const;
};

// Nearest point on the shape.  `equidistant` is set when several nearest
// points exist within `tol`: candidates farther than `tol` apart in location
// yet closer than `tol` in distance (continua such as a symmetry axis are
// flagged the same way).  The returned point is then one deterministic
// representative; `distance` is always the true minimum.
struct NearestResult {
    Vec3 point{0, 0, 0};
    double distance = 0.0;
    bool equidistant = false;
};

NearestResult nearest_on_shape(const AnalyticShape& shape, Vec3 x,
                               double tol = 1e-9);

// Unsigned distance from x to the shape (valid even at equidistant points).
double exact_distance(const AnalyticShape& shape, Vec3 x);

// The displacement field the network is trained to approximate:
// F(x) = x - nearest(x), so |F| = distance and x - F lies on the shape.
struct ExactField {
    Vec3 F{0, 0, 0};
    double distance = 0.0;
    bool equidistant = false;
};

ExactField exact_field(const AnalyticShape& shape, Vec3 x, double tol = 1e-9);

// Exhaustive nearest-point scan; the definitional reference for accelerated
// lookups.  Throws std::invalid_argument on an empty cloud.
struct BruteForceResult {
    double distance = 0.0;
    Vec3 nearest{0, 0, 0};
};

BruteForceResult brute_force_distance(const PointCloud& cloud, Vec3 x);

// Area-uniform random samples on the shape.  count >= 1.
PointCloud sample_shape(const AnalyticShape& shape, size_t count,
                        uint64_t seed);

// Wraps the analytic field in the same evaluation interface the learned
// model exposes, for driving extraction and losses with exact inputs.
FieldView make_analytic_view(const AnalyticShape& shape,
                             double guard_eps = 1e-12);

}  // namespace nsp
