#include "doctest.h"
#include "nsp/metrics.hpp"
#include "nsp/oracle.hpp"

#include <cmath>
#include <random>

using namespace nsp;

namespace {

PointCloud random_cloud(size_t n, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    PointCloud c;
    for (size_t i = 0; i < n; ++i) c.points.push_back({u(rng), u(rng), u(rng)});
    return c;
}

// Exhaustive double-loop references.
double chamfer_slow(const PointCloud& a, const PointCloud& b) {
    auto directed = [](const PointCloud& f, const PointCloud& t) {
        double sum = 0;
        for (const Vec3& q : f.points)
            sum += brute_force_distance(t, q).distance;
        return sum / double(f.points.size());
    };
    return 0.5 * (directed(a, b) + directed(b, a));
}

double hausdorff_slow(const PointCloud& a, const PointCloud& b) {
    auto directed = [](const PointCloud& f, const PointCloud& t) {
        double mx = 0;
        for (const Vec3& q : f.points)
            mx = std::max(mx, brute_force_distance(t, q).distance);
        return mx;
    };
    return std::max(directed(a, b), directed(b, a));
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("grid index returns the exact nearest point") {
    std::mt19937_64 rng(21);

    SUBCASE("uniform cloud") {
        PointCloud cloud = random_cloud(20000, rng);
        NearestNeighborIndex idx(cloud.points);
        for (int q = 0; q < 10000; ++q) {
            Vec3 x = random_cloud(1, rng, 1.5).points[0];
            auto fast = idx.query(x);
            auto slow = brute_force_distance(cloud, x);
            CHECK(fast.distance == slow.distance);
        }
    }
    SUBCASE("clustered cloud with empty regions") {
        PointCloud cloud;
        std::normal_distribution<double> g(0.0, 0.02);
        for (int c = 0; c < 5; ++c) {
            Vec3 center = random_cloud(1, rng).points[0];
            for (int i = 0; i < 2000; ++i)
                cloud.points.push_back(center + Vec3{g(rng), g(rng), g(rng)});
        }
        NearestNeighborIndex idx(cloud.points);
        for (int q = 0; q < 2000; ++q) {
            Vec3 x = random_cloud(1, rng, 2.0).points[0];
            CHECK(idx.query(x).distance ==
                  brute_force_distance(cloud, x).distance);
        }
    }
    SUBCASE("degenerate geometry") {
        std::vector<Vec3> one = {{0.5, -0.25, 0.125}};
        NearestNeighborIndex idx1(one);
        CHECK(idx1.query({0.5, -0.25, 0.125}).distance == 0.0);
        CHECK(idx1.query({1.5, -0.25, 0.125}).distance == doctest::Approx(1.0));

        // All points on a line (two axes collapse).
        std::vector<Vec3> line;
        for (int i = 0; i < 100; ++i) line.push_back({i * 0.01, 0.25, 0.25});
        NearestNeighborIndex idx2(line);
        PointCloud line_cloud;
        line_cloud.points = line;
        for (int q = 0; q < 500; ++q) {
            Vec3 x = random_cloud(1, rng).points[0];
            CHECK(idx2.query(x).distance ==
                  brute_force_distance(line_cloud, x).distance);
        }

        // All points identical.
        std::vector<Vec3> same(50, Vec3{0.1, 0.2, 0.3});
        NearestNeighborIndex idx3(same);
        CHECK(idx3.query({1, 1, 1}).distance ==
              doctest::Approx(dist({1, 1, 1}, {0.1, 0.2, 0.3})));

        CHECK_THROWS(NearestNeighborIndex({}));
    }
}

TEST_CASE("distances at hand-computed clouds") {
    PointCloud a, b;
    a.points = {{0, 0, 0}};
    b.points = {{1, 0, 0}};
    CHECK(chamfer(a, b) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(hausdorff(a, b) == doctest::Approx(1.0).epsilon(1e-15));

    CHECK(chamfer(a, a) == 0.0);
    CHECK(hausdorff(a, a) == 0.0);

    PointCloud c, d;
    c.points = {{0, 0, 0}, {2, 0, 0}};
    d.points = {{0, 0, 0}};
    CHECK(hausdorff(c, d) == doctest::Approx(2.0).epsilon(1e-15));
    // Directed means: c->d is (0+2)/2 = 1, d->c is 0.
    CHECK(chamfer(c, d) == doctest::Approx(0.5).epsilon(1e-15));

    PointCloud empty;
    CHECK_THROWS(chamfer(a, empty));
    CHECK_THROWS(hausdorff(empty, a));
}

TEST_CASE("accelerated metrics agree with the double-loop reference") {
    std::mt19937_64 rng(22);
    for (int rep = 0; rep < 5; ++rep) {
        PointCloud a = random_cloud(100, rng);
        PointCloud b = random_cloud(100, rng);
        CHECK(std::fabs(chamfer(a, b) - chamfer_slow(a, b)) <= 1e-12);
        CHECK(std::fabs(hausdorff(a, b) - hausdorff_slow(a, b)) <= 1e-12);
    }
}

TEST_CASE("metric symmetry and ordering properties") {
    std::mt19937_64 rng(23);
    for (int rep = 0; rep < 10; ++rep) {
        PointCloud a = random_cloud(200, rng);
        PointCloud b = random_cloud(150, rng);
        MetricReport ab = compare_clouds(a, b);
        MetricReport ba = compare_clouds(b, a);
        CHECK(ab.chamfer == ba.chamfer);
        CHECK(ab.hausdorff == ba.hausdorff);
        CHECK(ab.chamfer >= 0.0);
        // Each directed mean is below its directed max, so the half-sum of
        // means is below the max of maxes.
        CHECK(ab.chamfer <= ab.hausdorff + 1e-15);
        CHECK(ab.hausdorff >= ab.max_a_to_b);
        CHECK(ab.hausdorff >= ab.max_b_to_a);
        CHECK(ab.count_a == 200);
        CHECK(ab.count_b == 150);
    }
}

TEST_CASE("mesh sampling stays on the surface and respects areas") {
    TriangleMesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 1}, {4, 1, 1},
                     {1, 3, 1}};
    mesh.triangles = {{0, 1, 2}};

    SUBCASE("single triangle: samples are inside it") {
        PointCloud s = sample_mesh_surface(mesh, 2000, 5);
        REQUIRE(s.points.size() == 2000);
        for (const Vec3& p : s.points) {
            CHECK(p.z == 0.0);
            CHECK(p.x >= -1e-12);
            CHECK(p.y >= -1e-12);
            CHECK(p.x + p.y <= 1.0 + 1e-12);
        }
    }
    SUBCASE("area-weighted selection across triangles") {
        // Second triangle has 6x the area of the first (legs 3,2 vs 1,1).
        mesh.triangles.push_back({3, 4, 5});
        double a0 = triangle_area(mesh.vertices[0], mesh.vertices[1],
                                  mesh.vertices[2]);
        double a1 = triangle_area(mesh.vertices[3], mesh.vertices[4],
                                  mesh.vertices[5]);
        double frac = a1 / (a0 + a1);
        const size_t n = 40000;
        PointCloud s = sample_mesh_surface(mesh, n, 6);
        size_t on_second = 0;
        for (const Vec3& p : s.points)
            if (p.z == 1.0) ++on_second;
        double sd = std::sqrt(double(n) * frac * (1 - frac));
        CHECK(std::fabs(double(on_second) - frac * n) < 4 * sd);
    }
    SUBCASE("deterministic per seed") {
        PointCloud s1 = sample_mesh_surface(mesh, 100, 9);
        PointCloud s2 = sample_mesh_surface(mesh, 100, 9);
        for (size_t i = 0; i < s1.points.size(); ++i)
            CHECK(dist(s1.points[i], s2.points[i]) == 0.0);
    }
    SUBCASE("rejects degenerate input") {
        TriangleMesh empty;
        CHECK_THROWS(sample_mesh_surface(empty, 10, 1));
        TriangleMesh flat;
        flat.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
        flat.triangles = {{0, 1, 2}};
        CHECK_THROWS(sample_mesh_surface(flat, 10, 1));
        CHECK_THROWS(sample_mesh_surface(mesh, 0, 1));
    }
}

TEST_CASE("chamfer between dense samplings of the same shape is small") {
    // Two independent samplings of one surface should be metrically close;
    // against a different surface the distance is large.
    PointCloud s1 = sample_shape(AnalyticShape::sphere(0.6), 20000, 1);
    PointCloud s2 = sample_shape(AnalyticShape::sphere(0.6), 20000, 2);
    CHECK(chamfer(s1, s2) < 0.01);

    PointCloud small = sample_shape(AnalyticShape::sphere(0.3), 20000, 3);
    CHECK(chamfer(s1, small) > 0.25);
    CHECK(hausdorff(s1, small) >= 0.3 - 0.05);
}

TEST_SUITE_END();
