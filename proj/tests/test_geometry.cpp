#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "segame/geometry.hpp"

using namespace segame;

namespace {

ConvexPolygon unit_square() {
    return polygon_from_vertices({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
}

ConvexPolygon random_polygon(std::mt19937_64& rng) {
    for (;;) {
        const std::size_t n = 5 + uniform_index(rng, 6);
        const double radius = uniform_in(rng, 2.0, 15.0);
        const Vec2 center{uniform_in(rng, -20.0, 20.0), uniform_in(rng, -20.0, 20.0)};
        std::vector<Vec2> pts;
        for (std::size_t i = 0; i < n; ++i) {
            const double ang = uniform_in(rng, 0.0, 2.0 * M_PI);
            const double r = radius * std::sqrt(uniform01(rng));
            pts.push_back(center + Vec2{r * std::cos(ang), r * std::sin(ang)});
        }
        try {
            return convex_hull_polygon(pts);
        } catch (const DegenerateInput&) {
        }
    }
}

} // namespace

TEST_CASE("polygon_from_vertices: axis-aligned unit square") {
    const ConvexPolygon p = unit_square();
    REQUIRE(p.halfspaces.size() == 4);
    const Vec2 normals[4] = {{0, -1}, {1, 0}, {0, 1}, {-1, 0}};
    const double offsets[4] = {0, 1, 1, 0};
    for (int k = 0; k < 4; ++k) {
        CHECK(p.halfspaces[k].a.x == doctest::Approx(normals[k].x).epsilon(1e-12));
        CHECK(p.halfspaces[k].a.y == doctest::Approx(normals[k].y).epsilon(1e-12));
        CHECK(p.halfspaces[k].b == doctest::Approx(offsets[k]).epsilon(1e-12));
    }
}

TEST_CASE("polygon_from_vertices: right triangle hypotenuse") {
    const ConvexPolygon p = polygon_from_vertices({{0, 0}, {2, 0}, {0, 2}});
    REQUIRE(p.halfspaces.size() == 3);
    // hypotenuse is edge 1 for this CCW ordering
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(p.halfspaces[1].a.x == doctest::Approx(inv_sqrt2).epsilon(1e-12));
    CHECK(p.halfspaces[1].a.y == doctest::Approx(inv_sqrt2).epsilon(1e-12));
    CHECK(p.halfspaces[1].b == doctest::Approx(2.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("polygon_from_vertices: rejects degenerate and non-convex input") {
    CHECK_THROWS_AS(polygon_from_vertices({{0, 0}, {1, 0}, {2, 0}}), DegenerateInput);
    CHECK_THROWS_AS(polygon_from_vertices({{0, 0}, {1, 0}}), DegenerateInput);
    CHECK_THROWS_AS(polygon_from_vertices({{0, 0}, {0, 0}, {0, 0}, {1, 0}}), DegenerateInput);
    CHECK_THROWS_AS(
        polygon_from_vertices({{0, 0}, {2, 0}, {1, 0.5}, {2, 2}, {0, 2}}), NonConvexInput);
}

TEST_CASE("polygon invariants hold on random hulls") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const ConvexPolygon p = random_polygon(rng);
        for (const HalfSpace& h : p.halfspaces)
            CHECK(h.a.norm() == doctest::Approx(1.0).epsilon(1e-12));
        for (const Vec2& v : p.vertices)
            for (const HalfSpace& h : p.halfspaces) CHECK(h.a.dot(v) <= h.b + 1e-9);
        for (std::size_t i = 0; i < p.vertices.size(); ++i) {
            const Vec2 mid =
                (p.vertices[i] + p.vertices[(i + 1) % p.vertices.size()]) * 0.5;
            int active = 0;
            for (const HalfSpace& h : p.halfspaces)
                if (std::abs(h.a.dot(mid) - h.b) < 1e-9) ++active;
            CHECK(active == 1);
        }
    }
}

TEST_CASE("signed_distance on the unit square") {
    const ConvexPolygon p = unit_square();
    CHECK(signed_distance(p, {0.5, 0.5}) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(signed_distance(p, {0.5, 0.0}) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(signed_distance(p, {2.0, 0.5}) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("lse_residual on the unit square") {
    const ConvexPolygon p = unit_square();
    CHECK(std::abs(lse_residual(p, {0.5, 0.0}, 0.01)) < 1e-12);
    CHECK(lse_residual(p, {0.0, 0.0}, 0.01) ==
          doctest::Approx(-0.01 * std::log(2.0)).epsilon(1e-12));
    CHECK(lse_residual(p, {0.5, 0.5}, 0.01) ==
          doctest::Approx(0.4861370563888011).epsilon(1e-12));
}

TEST_CASE("lse_residual never overflows") {
    const ConvexPolygon p = unit_square();
    CHECK(std::isfinite(lse_residual(p, {1e6, 1e6}, 1e-4)));
    CHECK(std::isfinite(lse_residual(p, {-1e6, 0.5}, 1e-4)));
    CHECK(lse_residual(p, {1e6, 0.5}, 1e-4) == doctest::Approx(-(1e6 - 1.0)).epsilon(1e-9));
}

TEST_CASE("lse_gradient on the unit square") {
    const ConvexPolygon p = unit_square();
    const Vec2 g_edge = lse_gradient(p, {0.5, 0.0}, 0.01);
    CHECK(g_edge.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(g_edge.y == doctest::Approx(1.0).epsilon(1e-12));
    const Vec2 g_corner = lse_gradient(p, {0.0, 0.0}, 0.01);
    CHECK(g_corner.x == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(g_corner.y == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("lse_gradient matches central finite differences") {
    std::mt19937_64 rng(23);
    int checked = 0;
    while (checked < 100) {
        const ConvexPolygon p = random_polygon(rng);
        const Vec2 z{uniform_in(rng, -40.0, 40.0), uniform_in(rng, -40.0, 40.0)};
        const double eps = uniform_in(rng, 0.02, 0.5);
        const double h = 1e-6;
        const Vec2 g = lse_gradient(p, z, eps);
        const double fdx =
            (lse_residual(p, {z.x + h, z.y}, eps) - lse_residual(p, {z.x - h, z.y}, eps)) /
            (2 * h);
        const double fdy =
            (lse_residual(p, {z.x, z.y + h}, eps) - lse_residual(p, {z.x, z.y - h}, eps)) /
            (2 * h);
        const double num = std::hypot(g.x - fdx, g.y - fdy);
        const double den = std::max(std::hypot(fdx, fdy), 1e-8);
        CHECK(num / den < 1e-5);
        CHECK(g.norm() <= 1.0 + 1e-12);
        ++checked;
    }
}

TEST_CASE("lse_residual approaches -signed_distance as eps shrinks") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const ConvexPolygon p = random_polygon(rng);
        const double bound_scale = std::log(static_cast<double>(p.edge_count()));
        double prev_max = std::numeric_limits<double>::infinity();
        for (const double eps : {0.5, 0.1, 0.01}) {
            double max_err = 0.0;
            for (int i = 0; i < 1000; ++i) {
                const Vec2 z{uniform_in(rng, -40.0, 40.0), uniform_in(rng, -40.0, 40.0)};
                const double err = std::abs(lse_residual(p, z, eps) + signed_distance(p, z));
                max_err = std::max(max_err, err);
                CHECK(err <= eps * bound_scale + 1e-12);
            }
            CHECK(max_err <= prev_max + 1e-12);
            prev_max = max_err;
        }
    }
}

TEST_CASE("project_to_perimeter examples and tie-breaks") {
    const ConvexPolygon p = unit_square();
    const Vec2 a = project_to_perimeter(p, {0.5, -1.0});
    CHECK(a.x == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(a.y == doctest::Approx(0.0).epsilon(1e-12));
    // center is equidistant to every edge; lowest edge index wins
    const Vec2 b = project_to_perimeter(p, {0.5, 0.5});
    CHECK(b.x == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(b.y == doctest::Approx(0.0).epsilon(1e-12));
    const Vec2 c = project_to_perimeter(p, {2.0, 2.0});
    CHECK(c.x == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c.y == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("project_to_perimeter is idempotent") {
    std::mt19937_64 rng(47);
    for (int trial = 0; trial < 20; ++trial) {
        const ConvexPolygon p = random_polygon(rng);
        for (int i = 0; i < 50; ++i) {
            const Vec2 z{uniform_in(rng, -40.0, 40.0), uniform_in(rng, -40.0, 40.0)};
            const Vec2 once = project_to_perimeter(p, z);
            const Vec2 twice = project_to_perimeter(p, once);
            CHECK(distance(once, twice) < 1e-12);
            CHECK(std::abs(signed_distance(p, once)) < 1e-9);
        }
    }
}

TEST_CASE("perimeter_point examples and boundary property") {
    const ConvexPolygon p = unit_square();
    CHECK(distance(perimeter_point(p, 0.0), {0, 0}) < 1e-12);
    CHECK(distance(perimeter_point(p, 0.25), {1, 0}) < 1e-12);
    CHECK(distance(perimeter_point(p, 0.125), {0.5, 0}) < 1e-12);

    std::mt19937_64 rng(59);
    for (int trial = 0; trial < 10; ++trial) {
        const ConvexPolygon q = random_polygon(rng);
        for (int i = 0; i < 100; ++i)
            CHECK(std::abs(signed_distance(q, perimeter_point(q, uniform01(rng)))) < 1e-12);
    }
}

TEST_CASE("segment_clear uses exact clipping") {
    const ConvexPolygon p = unit_square();
    CHECK_FALSE(segment_clear(p, {-1, 0.5}, {2, 0.5}, 0.0));
    CHECK(segment_clear(p, {-1, 2}, {2, 2}, 0.5));
    CHECK_FALSE(segment_clear(p, {-1, 1.4}, {2, 1.4}, 0.5));
    // grazing the boundary counts as clear at zero clearance
    CHECK(segment_clear(p, {-1, 1}, {2, 1}, 0.0));
    // short segment far away, clipped minimum at an endpoint
    CHECK(segment_clear(p, {5, 0.5}, {6, 0.5}, 3.9));
}
