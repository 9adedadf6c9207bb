#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "segame/game.hpp"
#include "segame/scenario.hpp"

namespace segame {

struct ParamRange {
    double lo = 0.0;
    double hi = 0.0;
};

struct CountRange {
    int lo = 0;
    int hi = 0;
};

/// Monte Carlo protocol: per-trial uniform parameter draws, randomly placed
/// convex buildings, fixed start/goal, one bilevel solve per trial.
struct MonteCarloConfig {
    int trials = 50;
    std::uint64_t base_seed = 1;
    int workers = 0; // 0: hardware concurrency

    double map_size = 100.0;
    ParamRange psi_init_deg{0.0, 360.0};
    ParamRange v_pan_deg_s{-10.0, 10.0};
    ParamRange half_sweep_deg{30.0, 90.0};
    ParamRange range_units{10.0, 15.0};
    ParamRange fov_deg{10.0, 30.0};
    CountRange directional_count{3, 3};
    CountRange omni_count{3, 3};
    CountRange building_count{3, 6};

    double sigma = 0.001;
    double sharpness = 50.0;
    double v_max = 5.0;
    double horizon_slack = 1.5; // t_a = slack * straight-line time
    int n_steps = 60;
    double epsilon = 0.05;
    double clearance = 0.5;
    int rrt_iterations = 1500;
    GameOptions game;

    bool keep_scenes = false; // retain geometry for SVG export
};

inline MonteCarloConfig desk_scale_config() { return MonteCarloConfig{}; }

inline MonteCarloConfig paper_scale_config() {
    MonteCarloConfig c;
    c.trials = 500;
    c.map_size = 150.0;
    c.directional_count = {5, 10};
    c.omni_count = {5, 10};
    return c;
}

/// Geometry snapshot retained per trial for plotting.
struct TrialScene {
    Scenario scenario;
    Trajectory initial_attacker;
    Trajectory final_attacker;
    SensorPlacement initial_defender;
    SensorPlacement final_defender;
};

struct TrialRecord {
    std::uint64_t seed = 0;
    // detection-probability scale; initialization payoffs are measured
    // against the opponent's equilibrium strategy (the LNE deviation test)
    double j_a0 = 0.0;
    double j_a_star = 0.0;
    double j_d0 = 0.0;
    double j_d_star = 0.0;
    int rounds = 0;
    int reinits = 0;
    std::string status = "failed";
    double wall_time_s = 0.0;
    std::vector<RoundRecord> trace;
    std::shared_ptr<TrialScene> scene; // only when keep_scenes is set
};

struct SummaryStat {
    double mean = 0.0;
    double ci95 = 0.0;
};

struct MonteCarloSummary {
    int trials = 0;
    int failed = 0;
    SummaryStat j_a0, j_a_star, j_d0, j_d_star, delta_ja, delta_jd;
    double convergence_rate = 0.0; // converged + limit_cycle_recovered
    double mean_wall_time_s = 0.0;
};

namespace mc_detail {

inline int draw_count(std::mt19937_64& rng, const CountRange& r) {
    return r.lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(r.hi - r.lo + 1)));
}

/// Conservative polygon separation: every edge of one polygon keeps at least
/// `gap` of half-space distance from the other.
inline bool polygons_separated(const ConvexPolygon& a, const ConvexPolygon& b, double gap) {
    auto edges_clear = [gap](const ConvexPolygon& poly, const ConvexPolygon& other) {
        const std::size_t n = other.vertices.size();
        for (std::size_t i = 0; i < n; ++i)
            if (!segment_clear(poly, other.vertices[i], other.vertices[(i + 1) % n], gap))
                return false;
        return true;
    };
    return edges_clear(a, b) && edges_clear(b, a);
}

inline ConvexPolygon random_building(std::mt19937_64& rng, const Vec2& center, double radius) {
    for (;;) {
        std::vector<Vec2> pts;
        const std::size_t count = 5 + uniform_index(rng, 4);
        for (std::size_t i = 0; i < count; ++i) {
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

} // namespace mc_detail

/// Build a random scenario for one trial. Buildings are rejection-sampled so
/// they stay inside the map with a corridor-wide gap between each other and
/// around the fixed start/goal.
inline Scenario random_scenario(const MonteCarloConfig& config, std::uint64_t trial_seed) {
    std::mt19937_64 rng(mix_seed(trial_seed, 0x5ce9a21eULL));
    Scenario sc;
    const double w = config.map_size;
    sc.map_bounds = {w, w};
    sc.attacker.start = {5.0, 5.0};
    sc.attacker.goal = {w - 5.0, w - 5.0};
    sc.attacker.v_max = config.v_max;
    sc.attacker.n_steps = config.n_steps;
    sc.attacker.t_a =
        config.horizon_slack * distance(sc.attacker.goal, sc.attacker.start) / config.v_max;
    sc.smoothing = {config.epsilon, config.clearance};
    sc.game = config.game;
    sc.game.seed = mix_seed(trial_seed, 0x9e11ULL);
    sc.rrt_iterations = config.rrt_iterations;

    const double border = 6.0;
    const double building_gap = 8.0;
    const double endpoint_gap = config.clearance + 5.0;
    const int target = mc_detail::draw_count(rng, config.building_count);
    for (int b = 0; b < target; ++b) {
        for (int attempt = 0; attempt < 40; ++attempt) {
            const double radius = uniform_in(rng, 8.0, 15.0);
            const double lo = border + radius;
            const double hi = w - border - radius;
            if (lo >= hi) break;
            const Vec2 center{uniform_in(rng, lo, hi), uniform_in(rng, lo, hi)};
            const ConvexPolygon candidate = mc_detail::random_building(rng, center, radius);
            if (signed_distance(candidate, sc.attacker.start) < endpoint_gap) continue;
            if (signed_distance(candidate, sc.attacker.goal) < endpoint_gap) continue;
            bool ok = true;
            for (const ConvexPolygon& existing : sc.buildings)
                if (!mc_detail::polygons_separated(candidate, existing, building_gap)) {
                    ok = false;
                    break;
                }
            if (!ok) continue;
            sc.buildings.push_back(candidate);
            break;
        }
    }
    if (sc.buildings.empty()) {
        // degenerate draw; a single central building keeps the trial meaningful
        sc.buildings.push_back(mc_detail::random_building(rng, {w / 2.0, w / 2.0}, 10.0));
    }

    const int n_dir = mc_detail::draw_count(rng, config.directional_count);
    const int n_omni = mc_detail::draw_count(rng, config.omni_count);
    for (int i = 0; i < n_dir + n_omni; ++i) {
        Sensor s;
        s.kind = i < n_dir ? SensorKind::Directional : SensorKind::Omnidirectional;
        s.building_index =
            static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(sc.buildings.size())));
        const double range = uniform_in(rng, config.range_units.lo, config.range_units.hi);
        s.alpha = 9.0 / (range * range);
        s.sigma = config.sigma;
        s.sharpness = config.sharpness;
        if (s.kind == SensorKind::Directional) {
            s.fov = uniform_in(rng, config.fov_deg.lo, config.fov_deg.hi) * M_PI / 180.0;
            const double psi0 =
                uniform_in(rng, config.psi_init_deg.lo, config.psi_init_deg.hi) * M_PI / 180.0;
            const double half_sweep_deg =
                uniform_in(rng, config.half_sweep_deg.lo, config.half_sweep_deg.hi);
            double v_pan = uniform_in(rng, config.v_pan_deg_s.lo, config.v_pan_deg_s.hi);
            // the triangular wave sweeps at 4*delta_psi/T; a vanishing pan
            // speed would stretch the period without bound
            const double pan_speed = std::max(std::abs(v_pan), 0.25);
            s.schedule.psi0 = psi0;
            s.schedule.delta_psi = half_sweep_deg * M_PI / 180.0;
            s.schedule.period = 4.0 * half_sweep_deg / pan_speed;
            s.schedule.phase_s = v_pan < 0.0 ? s.schedule.period / 2.0 : 0.0;
        }
        sc.sensors.push_back(s);
    }
    return sc;
}

/// Initialization-vs-equilibrium payoffs on the detection-probability scale.
/// Both J_D values are commitment values (defense fixed, attacker
/// best-responding): J_D0 for the random initial placement, J_D_star at the
/// equilibrium. J_A0 holds the equilibrium defense fixed against the initial
/// trajectory (the attacker-deviation test).
inline void fill_payoffs(TrialRecord& record, const Scenario& sc, const GameResult& result) {
    const std::vector<Sensor>& sensors = sc.sensors;
    const double j_star = log_survival_payoff(result.attacker, result.defender, sensors);
    record.j_a_star = detection_probability(j_star);
    record.j_d_star = detection_probability(j_star);
    record.j_a0 = detection_probability(
        log_survival_payoff(result.initial_attacker, result.defender, sensors));
    record.j_d0 = detection_probability(result.first_response_payoff);
}

inline TrialRecord run_trial(const MonteCarloConfig& config, int index) {
    TrialRecord record;
    record.seed = config.base_seed + static_cast<std::uint64_t>(index);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const Scenario sc = random_scenario(config, record.seed);
        const GameResult result = run_bilevel(sc, sc.game);
        record.rounds = result.rounds;
        record.reinits = result.reinits;
        record.status = to_string(result.status);
        record.trace = result.trace;
        fill_payoffs(record, sc, result);
        if (config.keep_scenes)
            record.scene = std::make_shared<TrialScene>(TrialScene{
                sc, result.initial_attacker, result.attacker, result.initial_defender,
                result.defender});
    } catch (const NoPathFound&) {
        record.status = "failed_no_path";
    } catch (const Error&) {
        record.status = "failed";
    }
    record.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return record;
}

namespace mc_detail {

inline SummaryStat stat_of(const std::vector<double>& xs) {
    SummaryStat s;
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double var = 0.0;
        for (double x : xs) var += (x - s.mean) * (x - s.mean);
        var /= static_cast<double>(xs.size() - 1);
        s.ci95 = 1.96 * std::sqrt(var / static_cast<double>(xs.size()));
    }
    return s;
}

} // namespace mc_detail

inline MonteCarloSummary summarize(const std::vector<TrialRecord>& records) {
    MonteCarloSummary summary;
    summary.trials = static_cast<int>(records.size());
    std::vector<double> a0, as, d0, ds, dja, djd;
    int converged = 0;
    double total_time = 0.0;
    for (const TrialRecord& r : records) {
        total_time += r.wall_time_s;
        if (r.status == "failed") {
            ++summary.failed;
            continue;
        }
        if (r.status == "converged" || r.status == "limit_cycle_recovered") ++converged;
        a0.push_back(r.j_a0);
        as.push_back(r.j_a_star);
        d0.push_back(r.j_d0);
        ds.push_back(r.j_d_star);
        dja.push_back(r.j_a_star - r.j_a0);
        djd.push_back(r.j_d_star - r.j_d0);
    }
    summary.j_a0 = mc_detail::stat_of(a0);
    summary.j_a_star = mc_detail::stat_of(as);
    summary.j_d0 = mc_detail::stat_of(d0);
    summary.j_d_star = mc_detail::stat_of(ds);
    summary.delta_ja = mc_detail::stat_of(dja);
    summary.delta_jd = mc_detail::stat_of(djd);
    summary.convergence_rate =
        records.empty() ? 0.0 : static_cast<double>(converged) / static_cast<double>(records.size());
    summary.mean_wall_time_s =
        records.empty() ? 0.0 : total_time / static_cast<double>(records.size());
    return summary;
}

/// Runs the batch across a worker pool. Trials are independent, seeded as
/// base_seed + index, and collected in index order so the worker count never
/// changes the output.
inline std::pair<std::vector<TrialRecord>, MonteCarloSummary> run_monte_carlo(
    const MonteCarloConfig& config) {
    std::vector<TrialRecord> records(static_cast<std::size_t>(config.trials));
    int workers = config.workers > 0 ? config.workers
                                     : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, config.trials));

    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= config.trials) return;
            records[static_cast<std::size_t>(i)] = run_trial(config, i);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    return {records, summarize(records)};
}

} // namespace segame
