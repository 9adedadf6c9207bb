#include <doctest.h>

#include <cmath>
#include <vector>

#include "segame/attacker.hpp"
#include "segame/geometry.hpp"
#include "segame/sensing.hpp"

using namespace segame;

namespace {

Scene empty_scene() {
    Scene s;
    s.bounds = {60.0, 60.0};
    s.clearance = 0.5;
    return s;
}

AttackerSpec corner_spec() {
    AttackerSpec spec;
    spec.start = {5.0, 5.0};
    spec.goal = {55.0, 55.0};
    spec.v_max = 4.0;
    spec.t_a = 28.0;
    spec.n_steps = 40;
    return spec;
}

Sensor omni(Vec2 pos, double range = 15.0, double sigma = 0.0) {
    Sensor s;
    s.kind = SensorKind::Omnidirectional;
    s.position = pos;
    s.alpha = 9.0 / (range * range);
    s.sigma = sigma;
    return s;
}

Trajectory straight_line(const AttackerSpec& spec) {
    Trajectory t;
    t.t_f = spec.t_a;
    for (int k = 0; k <= spec.n_steps; ++k)
        t.waypoints.push_back(spec.start +
                              (spec.goal - spec.start) * (static_cast<double>(k) / spec.n_steps));
    return t;
}

double point_line_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 e = b - a;
    const double t = std::clamp((p - a).dot(e) / e.norm_sq(), 0.0, 1.0);
    return distance(p, a + e * t);
}

} // namespace

TEST_CASE("stp_rrt_star: empty map returns a zero-cost straight-line path") {
    const AttackerSpec spec = corner_spec();
    const Scene scene = empty_scene();
    SensorPlacement placement;
    std::vector<Sensor> sensors;

    const Trajectory traj = stp_rrt_star(spec, scene, placement, sensors, 42, 400);
    REQUIRE(static_cast<int>(traj.waypoints.size()) == spec.n_steps + 1);
    CHECK(distance(traj.waypoints.front(), spec.start) < 1e-12);
    CHECK(distance(traj.waypoints.back(), spec.goal) < 1e-12);
    for (const Vec2& z : traj.waypoints)
        CHECK(point_line_distance(z, spec.start, spec.goal) < 1e-9);
    CHECK(log_survival_payoff(traj, placement, sensors) == 0.0);

    const double dt = traj.dt();
    for (std::size_t k = 0; k + 1 < traj.waypoints.size(); ++k)
        CHECK(distance(traj.waypoints[k + 1], traj.waypoints[k]) <=
              spec.v_max * dt * (1.0 + 1e-9));
}

TEST_CASE("stp_rrt_star: blocking building forces a clear detour") {
    const AttackerSpec spec = corner_spec();
    Scene scene = empty_scene();
    scene.buildings.push_back(
        polygon_from_vertices({{22, 22}, {38, 22}, {38, 38}, {22, 38}}));
    SensorPlacement placement;
    std::vector<Sensor> sensors;

    const Trajectory traj = stp_rrt_star(spec, scene, placement, sensors, 7, 2500);
    for (std::size_t k = 0; k + 1 < traj.waypoints.size(); ++k)
        CHECK(segment_clear_all(scene.buildings, traj.waypoints[k], traj.waypoints[k + 1],
                                scene.clearance));
    const double dt = traj.dt();
    for (std::size_t k = 0; k + 1 < traj.waypoints.size(); ++k)
        CHECK(distance(traj.waypoints[k + 1], traj.waypoints[k]) <=
              spec.v_max * dt * (1.0 + 1e-9));
}

TEST_CASE("stp_rrt_star: avoids a sensor sitting on the straight line") {
    const AttackerSpec spec = corner_spec();
    const Scene scene = empty_scene();
    std::vector<Sensor> sensors{omni({30, 30})};
    SensorPlacement placement{{{30, 30}}};

    const Trajectory traj = stp_rrt_star(spec, scene, placement, sensors, 11, 2500);
    const double j_tree = log_survival_payoff(traj, placement, sensors);
    const double j_straight = log_survival_payoff(straight_line(spec), placement, sensors);
    CHECK(j_tree < j_straight);
}

TEST_CASE("stp_rrt_star: determinism and error paths") {
    const AttackerSpec spec = corner_spec();
    const Scene scene = empty_scene();
    std::vector<Sensor> sensors{omni({25, 25})};
    SensorPlacement placement{{{25, 25}}};

    const Trajectory a = stp_rrt_star(spec, scene, placement, sensors, 99, 600);
    const Trajectory b = stp_rrt_star(spec, scene, placement, sensors, 99, 600);
    REQUIRE(a.waypoints.size() == b.waypoints.size());
    for (std::size_t k = 0; k < a.waypoints.size(); ++k) {
        CHECK(a.waypoints[k].x == b.waypoints[k].x);
        CHECK(a.waypoints[k].y == b.waypoints[k].y);
    }

    AttackerSpec unreachable = spec;
    unreachable.t_a = 1.0;
    CHECK_THROWS_AS(stp_rrt_star(unreachable, scene, placement, sensors, 1, 100),
                    InfeasibleSpec);

    Scene blocked = empty_scene();
    blocked.buildings.push_back(
        polygon_from_vertices({{20, 20}, {40, 20}, {40, 40}, {20, 40}}));
    CHECK_THROWS_AS(stp_rrt_star(spec, blocked, placement, sensors, 1, 0), NoPathFound);
}

TEST_CASE("attacker_best_response: zero sensors keep a feasible init stationary") {
    const AttackerSpec spec = corner_spec();
    const Scene scene = empty_scene();
    SensorPlacement placement;
    std::vector<Sensor> sensors;

    const Trajectory init = straight_line(spec);
    const auto [traj, report] = attacker_best_response(spec, scene, placement, sensors, init, 1e-8);
    CHECK(log_survival_payoff(traj, placement, sensors) == 0.0);
    CHECK(report.kkt_residual < 1e-8);
}

TEST_CASE("attacker_best_response: refinement is a feasible descent") {
    const AttackerSpec spec = corner_spec();
    const Scene scene = empty_scene();
    std::vector<Sensor> sensors{omni({30, 30}, 15.0, 0.001)};
    SensorPlacement placement{{{30, 30}}};

    const Trajectory init = stp_rrt_star(spec, scene, placement, sensors, 5, 1500);
    const double j_init = log_survival_payoff(init, placement, sensors);
    const auto [traj, report] = attacker_best_response(spec, scene, placement, sensors, init, 1e-6);
    const double j_refined = log_survival_payoff(traj, placement, sensors);

    CHECK(j_refined <= j_init + 1e-9);
    CHECK(distance(traj.waypoints.front(), spec.start) == 0.0);
    CHECK(distance(traj.waypoints.back(), spec.goal) == 0.0);
    const double dt = traj.dt();
    for (std::size_t k = 0; k + 1 < traj.waypoints.size(); ++k)
        CHECK(distance(traj.waypoints[k + 1], traj.waypoints[k]) <= spec.v_max * dt + 1e-6);
    // the refined path keeps its lateral distance from the sensor
    double min_clearance_from_sensor = 1e9;
    for (const Vec2& z : traj.waypoints)
        min_clearance_from_sensor = std::min(min_clearance_from_sensor, distance(z, {30, 30}));
    double init_min = 1e9;
    for (const Vec2& z : init.waypoints) init_min = std::min(init_min, distance(z, {30, 30}));
    CHECK(min_clearance_from_sensor >= init_min - 1e-6);
}

TEST_CASE("attacker_best_response: building clearance constraints hold") {
    const AttackerSpec spec = corner_spec();
    Scene scene = empty_scene();
    scene.buildings.push_back(
        polygon_from_vertices({{24, 24}, {36, 24}, {36, 36}, {24, 36}}));
    std::vector<Sensor> sensors{omni({10, 40}, 20.0, 0.001)};
    SensorPlacement placement{{{10, 40}}};

    const Trajectory init = stp_rrt_star(spec, scene, placement, sensors, 13, 2500);
    const auto [traj, report] = attacker_best_response(spec, scene, placement, sensors, init, 1e-6);
    for (std::size_t k = 1; k + 1 < traj.waypoints.size(); ++k)
        for (const ConvexPolygon& b : scene.buildings)
            CHECK(signed_distance(b, traj.waypoints[k]) >= scene.clearance - 1e-6);
    CHECK(log_survival_payoff(traj, placement, sensors) <=
          log_survival_payoff(init, placement, sensors) + 1e-9);
}

TEST_CASE("attacker_best_response: tight horizon pins the straight line") {
    AttackerSpec spec = corner_spec();
    spec.t_a = distance(spec.start, spec.goal) / spec.v_max; // zero slack
    const Scene scene = empty_scene();
    std::vector<Sensor> sensors{omni({30, 30})};
    SensorPlacement placement{{{30, 30}}};

    const Trajectory init = straight_line(spec);
    const auto [traj, report] = attacker_best_response(spec, scene, placement, sensors, init, 1e-8);
    for (const Vec2& z : traj.waypoints)
        CHECK(point_line_distance(z, spec.start, spec.goal) < 1e-2);
}

TEST_CASE("attacker_best_response: rejects an infeasible init") {
    const AttackerSpec spec = corner_spec();
    const Scene scene = empty_scene();
    SensorPlacement placement;
    std::vector<Sensor> sensors;

    Trajectory bad = straight_line(spec);
    bad.waypoints[5] = {5.0, 50.0}; // speed violation
    CHECK_THROWS_AS(attacker_best_response(spec, scene, placement, sensors, bad, 1e-6),
                    InfeasibleInit);

    Trajectory wrong_end = straight_line(spec);
    wrong_end.waypoints.back() = {54.0, 54.0};
    CHECK_THROWS_AS(attacker_best_response(spec, scene, placement, sensors, wrong_end, 1e-6),
                    InfeasibleInit);
}
