#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "segame/export.hpp"
#include "segame/monte_carlo.hpp"
#include "segame/scenario.hpp"

using namespace segame;
namespace fs = std::filesystem;

namespace {

nlohmann::json minimal_scenario_json() {
    return nlohmann::json::parse(R"({
      "map": {"width": 60, "height": 60},
      "buildings": [{"vertices": [[20,20],[40,20],[40,40],[20,40]]}],
      "sensors": [
        {"kind": "omnidirectional", "building": 0, "range_units": 25},
        {"kind": "directional", "building": 0, "range_units": 25, "fov_deg": 30,
         "pan": {"psi0_deg": 10, "half_sweep_deg": 45, "period_s": 20}}
      ],
      "attacker": {"start": [5,5], "goal": [55,55], "v_max": 4.0, "t_a_s": 25.0, "n_steps": 30},
      "smoothing": {"epsilon": 0.05, "clearance": 0.5},
      "game": {"delta": 1e-5, "k_max": 20, "r_max": 3, "limit_cycle_window": 6, "seed": 3}
    })");
}

fs::path temp_dir(const std::string& leaf) {
    const fs::path dir = fs::temp_directory_path() / ("segame_test_" + leaf);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("load_scenario: bundled case study loads") {
    const Scenario sc = load_scenario(std::string(SEGAME_SCENARIO_DIR) +
                                      "/case_study.scenario.json");
    CHECK(sc.map_bounds.width == 100.0);
    CHECK(sc.map_bounds.height == 100.0);
    CHECK(sc.buildings.size() == 4);
    CHECK(sc.sensors.size() == 10);
    int directional = 0;
    for (const Sensor& s : sc.sensors)
        if (s.kind == SensorKind::Directional) {
            ++directional;
            CHECK(s.fov == doctest::Approx(30.0 * M_PI / 180.0));
        }
    CHECK(directional == 5);
    // range 30 maps to alpha = 9/900
    CHECK(sc.sensors[0].alpha == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("parse_scenario: validation failures carry field paths") {
    auto bad_start = minimal_scenario_json();
    bad_start["attacker"]["start"] = {30.0, 30.0}; // inside the building
    try {
        parse_scenario(bad_start);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.field == "attacker.start");
    }

    auto bad_period = minimal_scenario_json();
    bad_period["sensors"][1]["pan"]["period_s"] = 0.0;
    try {
        parse_scenario(bad_period);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.field == "sensors[1].pan.period_s");
    }

    auto unknown = minimal_scenario_json();
    unknown["sensors"][0]["rnage_units"] = 10.0;
    CHECK_THROWS_AS(parse_scenario(unknown), ValidationError);

    auto bad_building = minimal_scenario_json();
    bad_building["sensors"][0]["building"] = 7;
    try {
        parse_scenario(bad_building);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.field == "sensors[0].building");
    }
}

TEST_CASE("load_scenario: malformed JSON raises ParseError") {
    const fs::path dir = temp_dir("parse");
    const fs::path path = dir / "broken.json";
    std::ofstream(path) << "{ not json";
    CHECK_THROWS_AS(load_scenario(path.string()), ParseError);
    CHECK_THROWS_AS(load_scenario((dir / "missing.json").string()), IoError);
}

TEST_CASE("random_scenario: buildings stay apart and clear of the endpoints") {
    const MonteCarloConfig config = desk_scale_config();
    for (int t = 0; t < 30; ++t) {
        const Scenario sc = random_scenario(config, 1000 + t);
        CHECK_NOTHROW(sc.validate());
        for (const ConvexPolygon& b : sc.buildings) {
            CHECK(signed_distance(b, sc.attacker.start) > config.clearance);
            CHECK(signed_distance(b, sc.attacker.goal) > config.clearance);
            for (const Vec2& v : b.vertices) {
                CHECK(v.x > 0.0);
                CHECK(v.x < config.map_size);
                CHECK(v.y > 0.0);
                CHECK(v.y < config.map_size);
            }
        }
        for (std::size_t i = 0; i < sc.buildings.size(); ++i)
            for (std::size_t j = i + 1; j < sc.buildings.size(); ++j)
                for (const Vec2& v : sc.buildings[i].vertices)
                    CHECK(signed_distance(sc.buildings[j], v) > 0.0);
    }
}

TEST_CASE("run_monte_carlo: single trial is reproducible") {
    MonteCarloConfig config = desk_scale_config();
    config.trials = 1;
    config.base_seed = 404;
    config.workers = 1;
    config.n_steps = 30;
    config.rrt_iterations = 600;
    config.game.k_max = 12;
    config.game.r_max = 2;

    const auto [records_a, summary_a] = run_monte_carlo(config);
    const auto [records_b, summary_b] = run_monte_carlo(config);
    REQUIRE(records_a.size() == 1);
    CHECK(records_a[0].j_a0 == records_b[0].j_a0);
    CHECK(records_a[0].j_a_star == records_b[0].j_a_star);
    CHECK(records_a[0].j_d0 == records_b[0].j_d0);
    CHECK(records_a[0].j_d_star == records_b[0].j_d_star);
    CHECK(records_a[0].rounds == records_b[0].rounds);
    CHECK(records_a[0].status == records_b[0].status);
    // payoff invariants
    for (double v : {records_a[0].j_a0, records_a[0].j_a_star, records_a[0].j_d0,
                     records_a[0].j_d_star}) {
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("export_results: file structure and round-trip precision") {
    std::vector<TrialRecord> records(2);
    records[0].seed = 7;
    records[0].j_a0 = 1.0 / 3.0;
    records[0].j_a_star = 0.123456789012345678;
    records[0].j_d0 = 0.05;
    records[0].j_d_star = 0.51;
    records[0].rounds = 4;
    records[0].reinits = 0;
    records[0].status = "converged";
    records[0].wall_time_s = 1.25;
    records[0].trace.push_back({1, 0, 0.5, 0.7, 0.7, 1e-3});
    records[1] = records[0];
    records[1].seed = 8;
    records[1].j_d_star = 0.9876543210987654321;

    const fs::path dir = temp_dir("export");
    export_results(records, summarize(records), dir);

    const auto rows = read_csv(dir / "trials.csv");
    REQUIRE(rows.size() == 3); // header + 2
    CHECK(rows[0][0] == "seed");
    CHECK(rows[0][8] == "wall_time_s");
    CHECK(std::stod(rows[1][1]) == records[0].j_a0);
    CHECK(std::stod(rows[1][2]) == records[0].j_a_star);
    CHECK(std::stod(rows[2][4]) == records[1].j_d_star);
    CHECK(std::stod(rows[1][8]) == 0.0); // timing zeroed for reproducibility

    CHECK(fs::exists(dir / "summary.csv"));
    CHECK(fs::exists(dir / "trace_00000.csv"));
    CHECK(fs::exists(dir / "trace_00001.csv"));

    CHECK_THROWS_AS(export_results({}, MonteCarloSummary{}, dir), IoError);
}

TEST_CASE("scene SVG: one polygon per building, one tagged path per trajectory") {
    MonteCarloConfig config = desk_scale_config();
    config.trials = 1;
    config.base_seed = 11;
    config.workers = 1;
    config.n_steps = 24;
    config.rrt_iterations = 500;
    config.game.k_max = 4;
    config.game.r_max = 1;
    config.keep_scenes = true;

    const auto [records, summary] = run_monte_carlo(config);
    REQUIRE(records[0].scene != nullptr);
    const fs::path dir = temp_dir("svg");
    ExportOptions opts;
    opts.write_svg = true;
    export_results(records, summary, dir, opts);

    std::ifstream in(dir / "scene_00000.svg");
    REQUIRE(in.good());
    std::string svg((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t polygons = 0, pos = 0;
    while ((pos = svg.find("<polygon", pos)) != std::string::npos) { ++polygons; ++pos; }
    CHECK(polygons == records[0].scene->scenario.buildings.size());
    std::size_t trajectories = 0;
    pos = 0;
    while ((pos = svg.find("class=\"trajectory\"", pos)) != std::string::npos) {
        ++trajectories;
        ++pos;
    }
    CHECK(trajectories == 2); // initial + equilibrium
}

TEST_CASE("summary CI scaling: quadrupling trials halves the interval") {
    // synthetic payoff distribution, fixed seed
    std::mt19937_64 rng(2024);
    auto make_records = [&](int n) {
        std::vector<TrialRecord> records(static_cast<std::size_t>(n));
        for (TrialRecord& r : records) {
            r.status = "converged";
            r.j_d0 = 0.1 + 0.05 * uniform01(rng);
            r.j_d_star = 0.4 + 0.2 * uniform01(rng);
            r.j_a0 = r.j_d_star;
            r.j_a_star = r.j_d_star;
        }
        return records;
    };
    const MonteCarloSummary s1 = summarize(make_records(200));
    const MonteCarloSummary s4 = summarize(make_records(800));
    const double ratio = s4.j_d_star.ci95 / s1.j_d_star.ci95;
    CHECK(ratio > 0.4);
    CHECK(ratio < 0.6);
}

TEST_CASE("trials.csv is bitwise reproducible") {
    MonteCarloConfig config = desk_scale_config();
    config.trials = 2;
    config.base_seed = 21;
    config.n_steps = 24;
    config.rrt_iterations = 500;
    config.game.k_max = 6;
    config.game.r_max = 1;

    auto run_to_file = [&](const fs::path& dir, int workers) {
        config.workers = workers;
        const auto [records, summary] = run_monte_carlo(config);
        export_results(records, summary, dir);
        std::ifstream in(dir / "trials.csv");
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };
    const std::string a = run_to_file(temp_dir("repro_a"), 1);
    const std::string b = run_to_file(temp_dir("repro_b"), 2);
    CHECK(a == b);
    CHECK(!a.empty());
}
