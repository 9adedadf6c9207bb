#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "segame/errors.hpp"
#include "segame/vec2.hpp"

namespace segame {

/// One half-space a·x <= b with `a` a unit outward normal.
struct HalfSpace {
    Vec2 a;
    double b = 0.0;
};

/// Convex building obstacle stored both as a CCW vertex loop and as the
/// intersection of unit-normal half-spaces, so max_k(a_k·x - b_k) is a true
/// signed distance on each edge's normal fan.
class ConvexPolygon {
  public:
    std::vector<Vec2> vertices;    // counterclockwise
    std::vector<HalfSpace> halfspaces; // one per edge, same order

    std::size_t edge_count() const { return halfspaces.size(); }

    double perimeter() const {
        double p = 0.0;
        for (std::size_t i = 0; i < vertices.size(); ++i)
            p += distance(vertices[i], vertices[(i + 1) % vertices.size()]);
        return p;
    }

    Vec2 centroid() const {
        Vec2 c{0.0, 0.0};
        for (const Vec2& v : vertices) c += v;
        return c / static_cast<double>(vertices.size());
    }
};

struct SmoothingParams {
    double epsilon = 0.05;  // LSE smoothing, map units
    double clearance = 0.5; // attacker obstacle margin, map units
};

inline ConvexPolygon polygon_from_vertices(std::vector<Vec2> pts) {
    // drop consecutive duplicates (and a repeated closing point)
    std::vector<Vec2> v;
    for (const Vec2& p : pts) {
        if (v.empty() || distance(v.back(), p) > 1e-12) v.push_back(p);
    }
    while (v.size() > 1 && distance(v.front(), v.back()) <= 1e-12) v.pop_back();
    if (v.size() < 3) throw DegenerateInput("polygon needs at least 3 distinct vertices");

    // orientation from the signed area; normalize to CCW
    double area2 = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Vec2& p = v[i];
        const Vec2& q = v[(i + 1) % v.size()];
        area2 += p.cross(q);
    }
    if (std::abs(area2) < 1e-12) throw DegenerateInput("polygon vertices are collinear");
    if (area2 < 0.0) std::reverse(v.begin(), v.end());

    // strict convexity: every consecutive turn is a strict left turn
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Vec2 e0 = v[(i + 1) % v.size()] - v[i];
        const Vec2 e1 = v[(i + 2) % v.size()] - v[(i + 1) % v.size()];
        const double c = e0.cross(e1);
        if (std::abs(c) < 1e-12) throw DegenerateInput("three collinear vertices");
        if (c < 0.0) throw NonConvexInput("vertex loop is not convex");
    }

    ConvexPolygon poly;
    poly.vertices = std::move(v);
    poly.halfspaces.reserve(poly.vertices.size());
    for (std::size_t i = 0; i < poly.vertices.size(); ++i) {
        const Vec2& p = poly.vertices[i];
        const Vec2& q = poly.vertices[(i + 1) % poly.vertices.size()];
        const Vec2 e = q - p;
        const Vec2 n = Vec2{e.y, -e.x}.normalized(); // outward for CCW loop
        poly.halfspaces.push_back({n, n.dot(p)});
    }
    return poly;
}

/// max_k(a_k·p - b_k): negative inside, zero on the boundary, positive outside.
inline double signed_distance(const ConvexPolygon& poly, const Vec2& p) {
    double m = -std::numeric_limits<double>::infinity();
    for (const HalfSpace& h : poly.halfspaces) m = std::max(m, h.a.dot(p) - h.b);
    return m;
}

// exp((v-m)/eps) underflows to irrelevance below this shifted argument
inline constexpr double kLseCutoff = -40.0;

/// Smooth boundary residual R(p) = -eps * ln sum_k exp((a_k·p - b_k)/eps).
/// R ~ -signed_distance; the max-shift keeps every input overflow-free.
inline double lse_residual(const ConvexPolygon& poly, const Vec2& p, double eps) {
    double m = -std::numeric_limits<double>::infinity();
    for (const HalfSpace& h : poly.halfspaces) m = std::max(m, h.a.dot(p) - h.b);
    double s = 0.0;
    for (const HalfSpace& h : poly.halfspaces) {
        const double e = (h.a.dot(p) - h.b - m) / eps;
        if (e > kLseCutoff) s += std::exp(e);
    }
    return -m - eps * std::log(s);
}

/// Gradient of lse_residual: -sum_k a_k w_k with softmax weights w_k.
inline Vec2 lse_gradient(const ConvexPolygon& poly, const Vec2& p, double eps) {
    double m = -std::numeric_limits<double>::infinity();
    for (const HalfSpace& h : poly.halfspaces) m = std::max(m, h.a.dot(p) - h.b);
    double s = 0.0;
    Vec2 g{0.0, 0.0};
    for (const HalfSpace& h : poly.halfspaces) {
        const double e = (h.a.dot(p) - h.b - m) / eps;
        if (e <= kLseCutoff) continue;
        const double w = std::exp(e);
        s += w;
        g += h.a * w;
    }
    return -(g / s);
}

/// Outward unit normal of the most violated (or least satisfied) half-space;
/// this is the signed-distance subgradient, lowest edge index on ties.
inline Vec2 signed_distance_subgradient(const ConvexPolygon& poly, const Vec2& p) {
    std::size_t best = 0;
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < poly.halfspaces.size(); ++k) {
        const double g = poly.halfspaces[k].a.dot(p) - poly.halfspaces[k].b;
        if (g > m) { m = g; best = k; }
    }
    return poly.halfspaces[best].a;
}

/// Euclidean-nearest point on the perimeter. Ties go to the lower edge index.
inline Vec2 project_to_perimeter(const ConvexPolygon& poly, const Vec2& p) {
    Vec2 best{0.0, 0.0};
    double best_d = std::numeric_limits<double>::infinity();
    const std::size_t n = poly.vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = poly.vertices[i];
        const Vec2& b = poly.vertices[(i + 1) % n];
        const Vec2 e = b - a;
        const double len2 = e.norm_sq();
        double t = len2 > 0.0 ? (p - a).dot(e) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const Vec2 q = a + e * t;
        const double d = distance(p, q);
        if (d < best_d) { best_d = d; best = q; }
    }
    return best;
}

/// Point at normalized arc length s in [0,1), counterclockwise from vertex 0.
inline Vec2 perimeter_point(const ConvexPolygon& poly, double s) {
    const std::size_t n = poly.vertices.size();
    double target = s * poly.perimeter();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = poly.vertices[i];
        const Vec2& b = poly.vertices[(i + 1) % n];
        const double len = distance(a, b);
        if (target <= len) return a + (b - a) * (target / len);
        target -= len;
    }
    return poly.vertices[0];
}

/// Exact minimum over the segment p->q of the signed distance. The distance
/// is the upper envelope of affine functions of the segment parameter, hence
/// convex; the minimum sits at an endpoint or at a pairwise crossing.
inline double segment_min_distance(const ConvexPolygon& poly, const Vec2& p, const Vec2& q) {
    const std::size_t m = poly.halfspaces.size();
    std::vector<double> c(m), d(m);
    for (std::size_t k = 0; k < m; ++k) {
        c[k] = poly.halfspaces[k].a.dot(p) - poly.halfspaces[k].b;
        d[k] = poly.halfspaces[k].a.dot(q - p);
    }
    auto envelope = [&](double t) {
        double v = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < m; ++k) v = std::max(v, c[k] + t * d[k]);
        return v;
    };
    double best = std::min(envelope(0.0), envelope(1.0));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            const double denom = d[j] - d[i];
            if (std::abs(denom) < 1e-300) continue;
            const double t = (c[i] - c[j]) / denom;
            if (t > 0.0 && t < 1.0) best = std::min(best, envelope(t));
        }
    }
    return best;
}

/// True iff the whole segment keeps at least `clearance` of signed distance.
inline bool segment_clear(const ConvexPolygon& poly, const Vec2& p, const Vec2& q,
                          double clearance) {
    return segment_min_distance(poly, p, q) >= clearance;
}

inline bool segment_clear_all(const std::vector<ConvexPolygon>& polys, const Vec2& p,
                              const Vec2& q, double clearance) {
    for (const ConvexPolygon& b : polys)
        if (!segment_clear(b, p, q, clearance)) return false;
    return true;
}

/// Strict convex hull (Andrew monotone chain); collinear points are dropped.
/// Throws DegenerateInput when fewer than 3 hull vertices remain.
inline ConvexPolygon convex_hull_polygon(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Vec2& a, const Vec2& b) {
                              return distance(a, b) <= 1e-12;
                          }),
              pts.end());
    if (pts.size() < 3) throw DegenerateInput("hull needs at least 3 distinct points");

    auto build = [&](auto begin, auto end) {
        std::vector<Vec2> chain;
        for (auto it = begin; it != end; ++it) {
            while (chain.size() >= 2 &&
                   (chain[chain.size() - 1] - chain[chain.size() - 2])
                           .cross(*it - chain[chain.size() - 1]) <= 1e-12)
                chain.pop_back();
            chain.push_back(*it);
        }
        return chain;
    };
    std::vector<Vec2> lower = build(pts.begin(), pts.end());
    std::vector<Vec2> upper = build(pts.rbegin(), pts.rend());
    lower.insert(lower.end(), upper.begin() + 1, upper.end() - 1);
    return polygon_from_vertices(std::move(lower));
}

} // namespace segame
