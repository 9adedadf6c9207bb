#pragma once

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "segame/attacker.hpp"
#include "segame/defender.hpp"
#include "segame/errors.hpp"
#include "segame/game_types.hpp"
#include "segame/geometry.hpp"
#include "segame/sensing.hpp"

namespace segame {

/// Complete problem instance: world, sensor parameters, attacker mission and
/// game options. Sensor positions are not part of a scenario; the game
/// samples the initial placement.
struct Scenario {
    MapBounds map_bounds;
    std::vector<ConvexPolygon> buildings;
    std::vector<Sensor> sensors;
    AttackerSpec attacker;
    SmoothingParams smoothing;
    GameOptions game;
    int rrt_iterations = 2000;

    Scene scene() const { return {map_bounds, buildings, smoothing.clearance}; }
    DefenderSpec defender_spec() const { return {sensors, buildings, smoothing.epsilon}; }
    void validate() const;
};

namespace scenario_detail {

inline void require(bool ok, const std::string& field, const std::string& message) {
    if (!ok) throw ValidationError(field, message);
}

inline void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& known,
                           const std::string& path) {
    for (const auto& item : obj.items())
        if (!known.count(item.key()))
            throw ValidationError(path + "." + item.key(), "unknown field");
}

inline Vec2 parse_point(const nlohmann::json& j, const std::string& path) {
    require(j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number(), path,
            "expected [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

} // namespace scenario_detail

inline void Scenario::validate() const {
    using scenario_detail::require;
    require(map_bounds.width > 0.0 && map_bounds.height > 0.0, "map", "non-positive size");
    require(smoothing.epsilon > 0.0, "smoothing.epsilon", "must be positive");
    require(smoothing.clearance >= 0.0, "smoothing.clearance", "must be non-negative");

    for (std::size_t i = 0; i < sensors.size(); ++i) {
        const std::string path = "sensors[" + std::to_string(i) + "]";
        const Sensor& s = sensors[i];
        require(s.alpha > 0.0, path + ".range_units", "range must be positive");
        require(s.sigma >= 0.0 && s.sigma <= 0.1, path + ".sigma", "must be in [0, 0.1]");
        require(s.sharpness > 0.0, path + ".sharpness", "must be positive");
        require(s.building_index >= 0 &&
                    s.building_index < static_cast<int>(buildings.size()),
                path + ".building", "index out of range");
        if (s.kind == SensorKind::Directional) {
            require(s.fov > 0.0 && s.fov < M_PI, path + ".fov_deg", "must be in (0, 180)");
            require(s.schedule.period > 0.0, path + ".pan.period_s", "must be positive");
            require(s.schedule.delta_psi >= 0.0 && s.schedule.delta_psi <= M_PI,
                    path + ".pan.half_sweep_deg", "must be in [0, 180]");
        }
    }

    require(attacker.v_max > 0.0, "attacker.v_max", "must be positive");
    require(attacker.n_steps >= 2, "attacker.n_steps", "must be at least 2");
    require(attacker.t_a >=
                distance(attacker.goal, attacker.start) / attacker.v_max - 1e-9,
            "attacker.t_a_s", "goal not reachable within the horizon");
    auto check_endpoint = [&](const Vec2& p, const std::string& field) {
        require(p.x >= 0.0 && p.x <= map_bounds.width && p.y >= 0.0 &&
                    p.y <= map_bounds.height,
                field, "outside map bounds");
        for (std::size_t b = 0; b < buildings.size(); ++b)
            require(signed_distance(buildings[b], p) >= smoothing.clearance - 1e-9, field,
                    "inside building " + std::to_string(b) + " clearance region");
    };
    check_endpoint(attacker.start, "attacker.start");
    check_endpoint(attacker.goal, "attacker.goal");

    require(game.delta > 0.0, "game.delta", "must be positive");
    require(game.k_max >= 1, "game.k_max", "must be at least 1");
    require(game.r_max >= 1, "game.r_max", "must be at least 1");
    require(game.limit_cycle_window >= 4, "game.limit_cycle_window", "must be at least 4");
    require(rrt_iterations >= 1, "rrt_iterations", "must be at least 1");
}

inline Scenario parse_scenario(const nlohmann::json& root) {
    using scenario_detail::parse_point;
    using scenario_detail::reject_unknown;
    using scenario_detail::require;
    namespace sd = scenario_detail;

    require(root.is_object(), "$", "scenario root must be an object");
    reject_unknown(root, {"map", "buildings", "sensors", "attacker", "smoothing", "game",
                          "rrt_iterations"},
                   "$");
    Scenario sc;

    require(root.contains("map"), "map", "missing");
    reject_unknown(root["map"], {"width", "height"}, "map");
    sc.map_bounds.width = root["map"].value("width", 0.0);
    sc.map_bounds.height = root["map"].value("height", 0.0);

    require(root.contains("buildings") && root["buildings"].is_array(), "buildings",
            "missing or not an array");
    for (std::size_t i = 0; i < root["buildings"].size(); ++i) {
        const auto& jb = root["buildings"][i];
        const std::string path = "buildings[" + std::to_string(i) + "]";
        reject_unknown(jb, {"vertices"}, path);
        require(jb.contains("vertices") && jb["vertices"].is_array(), path + ".vertices",
                "missing or not an array");
        std::vector<Vec2> pts;
        for (std::size_t v = 0; v < jb["vertices"].size(); ++v)
            pts.push_back(
                parse_point(jb["vertices"][v], path + ".vertices[" + std::to_string(v) + "]"));
        try {
            sc.buildings.push_back(polygon_from_vertices(pts));
        } catch (const Error& e) {
            throw ValidationError(path + ".vertices", e.what());
        }
    }

    require(root.contains("sensors") && root["sensors"].is_array(), "sensors",
            "missing or not an array");
    for (std::size_t i = 0; i < root["sensors"].size(); ++i) {
        const auto& js = root["sensors"][i];
        const std::string path = "sensors[" + std::to_string(i) + "]";
        reject_unknown(js, {"kind", "building", "range_units", "sigma", "sharpness",
                            "fov_deg", "pan"},
                       path);
        Sensor s;
        const std::string kind = js.value("kind", "");
        if (kind == "directional") s.kind = SensorKind::Directional;
        else if (kind == "omnidirectional") s.kind = SensorKind::Omnidirectional;
        else throw ValidationError(path + ".kind", "expected directional|omnidirectional");
        require(js.contains("building"), path + ".building", "missing");
        s.building_index = js["building"].get<int>();
        const double range = js.value("range_units", 30.0);
        require(range > 0.0, path + ".range_units", "must be positive");
        s.alpha = 9.0 / (range * range); // decay hits 0.1 at the rated range
        s.sigma = js.value("sigma", 0.001);
        s.sharpness = js.value("sharpness", 50.0);
        if (s.kind == SensorKind::Directional) {
            s.fov = js.value("fov_deg", 30.0) * M_PI / 180.0;
            require(js.contains("pan"), path + ".pan", "missing for directional sensor");
            reject_unknown(js["pan"], {"psi0_deg", "half_sweep_deg", "period_s", "phase_s"},
                           path + ".pan");
            s.schedule.psi0 = js["pan"].value("psi0_deg", 0.0) * M_PI / 180.0;
            s.schedule.delta_psi = js["pan"].value("half_sweep_deg", 60.0) * M_PI / 180.0;
            s.schedule.period = js["pan"].value("period_s", 0.0);
            s.schedule.phase_s = js["pan"].value("phase_s", 0.0);
        }
        sc.sensors.push_back(s);
    }

    require(root.contains("attacker"), "attacker", "missing");
    const auto& ja = root["attacker"];
    reject_unknown(ja, {"start", "goal", "v_max", "t_a_s", "n_steps"}, "attacker");
    require(ja.contains("start"), "attacker.start", "missing");
    require(ja.contains("goal"), "attacker.goal", "missing");
    sc.attacker.start = parse_point(ja["start"], "attacker.start");
    sc.attacker.goal = parse_point(ja["goal"], "attacker.goal");
    sc.attacker.v_max = ja.value("v_max", 5.0);
    sc.attacker.t_a = ja.value("t_a_s", 0.0);
    sc.attacker.n_steps = ja.value("n_steps", 60);

    if (root.contains("smoothing")) {
        reject_unknown(root["smoothing"], {"epsilon", "clearance"}, "smoothing");
        sc.smoothing.epsilon = root["smoothing"].value("epsilon", 0.05);
        sc.smoothing.clearance = root["smoothing"].value("clearance", 0.5);
    }

    if (root.contains("game")) {
        reject_unknown(root["game"],
                       {"delta", "k_max", "r_max", "limit_cycle_window", "seed"}, "game");
        sc.game.delta = root["game"].value("delta", 1e-5);
        sc.game.k_max = root["game"].value("k_max", 50);
        sc.game.r_max = root["game"].value("r_max", 5);
        sc.game.limit_cycle_window = root["game"].value("limit_cycle_window", 6);
        sc.game.seed = root["game"].value("seed", 0ULL);
    }
    sc.rrt_iterations = root.value("rrt_iterations", 2000);

    sc.validate();
    return sc;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file: " + path);
    nlohmann::json root;
    try {
        in >> root;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("malformed scenario JSON (" + path + "): " + e.what());
    }
    try {
        return parse_scenario(root);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("malformed scenario field (" + path + "): " + e.what());
    }
}

} // namespace segame
