#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "segame/geometry.hpp"
#include "segame/optimizer.hpp"
#include "segame/sensing.hpp"

namespace segame {

struct DefenderSpec {
    std::vector<Sensor> sensors;            // carries the building assignments
    std::vector<ConvexPolygon> buildings;
    double epsilon = 0.05;                  // LSE smoothing, map units
};

/// Uniform random placement along each sensor's assigned perimeter.
inline SensorPlacement sample_initial_placement(const DefenderSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    SensorPlacement placement;
    placement.positions.reserve(spec.sensors.size());
    for (const Sensor& s : spec.sensors) {
        const ConvexPolygon& building = spec.buildings[static_cast<std::size_t>(s.building_index)];
        placement.positions.push_back(perimeter_point(building, uniform01(rng)));
    }
    return placement;
}

namespace defender_detail {

inline double placement_violation(const DefenderSpec& spec, const SensorPlacement& placement) {
    double v = 0.0;
    for (std::size_t j = 0; j < spec.sensors.size(); ++j) {
        const ConvexPolygon& building =
            spec.buildings[static_cast<std::size_t>(spec.sensors[j].building_index)];
        for (const HalfSpace& h : building.halfspaces)
            v = std::max(v, h.a.dot(placement.positions[j]) - h.b);
        v = std::max(v, std::abs(lse_residual(building, placement.positions[j], spec.epsilon)));
    }
    return v;
}

/// Cyclic coordinate sweep over each assigned perimeter; a deterministic
/// global-ish seed for the NLP alongside the warm start.
inline SensorPlacement greedy_sweep(const DefenderSpec& spec, const Trajectory& traj,
                                    SensorPlacement placement, int points_per_sensor) {
    for (std::size_t j = 0; j < spec.sensors.size(); ++j) {
        const ConvexPolygon& building =
            spec.buildings[static_cast<std::size_t>(spec.sensors[j].building_index)];
        double best_j = -1.0;
        Vec2 best_pos = placement.positions[j];
        for (int i = 0; i < points_per_sensor; ++i) {
            const double s = (i + 0.5) / points_per_sensor;
            placement.positions[j] = perimeter_point(building, s);
            const double value = log_survival_payoff(traj, placement, spec.sensors);
            if (value > best_j) { best_j = value; best_pos = placement.positions[j]; }
        }
        placement.positions[j] = best_pos;
    }
    return placement;
}

} // namespace defender_detail

/// Defender best response: maximize the cumulative log-odds of detection over
/// sensor positions, constrained to the assigned building's half-spaces and
/// the smoothed boundary R(x) = 0. Never returns a placement scoring below
/// the initial one.
inline std::pair<SensorPlacement, SolveReport> defender_best_response(
    const DefenderSpec& spec, const Trajectory& traj, const SensorPlacement& init,
    double tol, bool use_sweep_seed = true, int max_iterations = 6000) {
    const std::size_t m = spec.sensors.size();
    if (m == 0) {
        SolveReport report;
        report.status = SolveStatus::Converged;
        report.kkt_residual = 0.0;
        return {init, report};
    }
    const std::size_t dim = 2 * m;

    NlpProblem problem;
    problem.dimension = static_cast<int>(dim);

    auto placement_from_vars = [m](const std::vector<double>& x) {
        SensorPlacement p;
        p.positions.reserve(m);
        for (std::size_t j = 0; j < m; ++j) p.positions.push_back({x[2 * j], x[2 * j + 1]});
        return p;
    };

    const double init_payoff = log_survival_payoff(traj, init, spec.sensors);
    SensorPlacement best_placement = init;
    double best_payoff = init_payoff;

    problem.objective = [&](const std::vector<double>& x, std::vector<double>& g) {
        const SensorPlacement placement = placement_from_vars(x);
        std::vector<Vec2> grads;
        const double j = payoff_value_and_gradient_x(traj, placement, spec.sensors, grads);
        g.resize(dim);
        for (std::size_t s = 0; s < m; ++s) {
            g[2 * s] = -grads[s].x;
            g[2 * s + 1] = -grads[s].y;
        }
        if (j > best_payoff &&
            defender_detail::placement_violation(spec, placement) <= 1e-6) {
            best_payoff = j;
            best_placement = placement;
        }
        return -j;
    };

    for (std::size_t j = 0; j < m; ++j) {
        const ConvexPolygon& building =
            spec.buildings[static_cast<std::size_t>(spec.sensors[j].building_index)];
        const std::vector<int> support{static_cast<int>(2 * j), static_cast<int>(2 * j + 1)};
        for (const HalfSpace& h : building.halfspaces) {
            problem.inequality_support.push_back(support);
            problem.inequality_constraints.push_back(
                [j, h](const std::vector<double>& x, std::vector<double>& g) {
                    g.resize(x.size());
                    g[2 * j] = h.a.x;
                    g[2 * j + 1] = h.a.y;
                    return h.a.x * x[2 * j] + h.a.y * x[2 * j + 1] - h.b;
                });
        }
        problem.equality_support.push_back(support);
        problem.equality_constraints.push_back(
            [j, &building, eps = spec.epsilon](const std::vector<double>& x,
                                               std::vector<double>& g) {
                const Vec2 p{x[2 * j], x[2 * j + 1]};
                const Vec2 grad = lse_gradient(building, p, eps);
                g.resize(x.size());
                g[2 * j] = grad.x;
                g[2 * j + 1] = grad.y;
                return lse_residual(building, p, eps);
            });
    }

    // restore half-space feasibility when a step leaves the building
    MinimizeOptions opts;
    opts.violation_tol = 5e-7; // keeps |R| comfortably inside the 1e-6 band
    opts.post_step = [&spec, m](std::vector<double>& x) {
        bool changed = false;
        for (std::size_t j = 0; j < m; ++j) {
            const ConvexPolygon& building =
                spec.buildings[static_cast<std::size_t>(spec.sensors[j].building_index)];
            const Vec2 p{x[2 * j], x[2 * j + 1]};
            if (signed_distance(building, p) > 1e-9) {
                const Vec2 proj = project_to_perimeter(building, p);
                x[2 * j] = proj.x;
                x[2 * j + 1] = proj.y;
                changed = true;
            }
        }
        return changed;
    };

    auto vars_from_placement = [dim, m](const SensorPlacement& p) {
        std::vector<double> x(dim);
        for (std::size_t j = 0; j < m; ++j) {
            x[2 * j] = p.positions[j].x;
            x[2 * j + 1] = p.positions[j].y;
        }
        return x;
    };

    std::vector<SensorPlacement> starts{init};
    if (use_sweep_seed) starts.push_back(defender_detail::greedy_sweep(spec, traj, init, 64));

    // solve from the warm start and from the sweep seed; the sweep result
    // must win decisively (hysteresis) so alternating play does not flip
    // between near-equal basins every round
    SolveReport report;
    bool have_chosen = false;
    SensorPlacement returned = init;
    double returned_payoff = init_payoff;
    bool first_start = true;
    for (const SensorPlacement& start : starts) {
        SolveReport r = minimize(problem, vars_from_placement(start), tol, max_iterations, opts);
        const SensorPlacement candidate = placement_from_vars(r.solution);
        const double payoff = log_survival_payoff(traj, candidate, spec.sensors);
        const bool feasible = defender_detail::placement_violation(spec, candidate) <= 1e-6;
        const double win_margin =
            first_start ? 0.0 : std::max(1e-9, 0.10 * std::abs(returned_payoff));
        if (feasible && (!have_chosen || payoff > returned_payoff + win_margin)) {
            returned = candidate;
            returned_payoff = payoff;
            report = r;
            have_chosen = true;
        } else if (!have_chosen && first_start) {
            report = r; // keep some report even if nothing feasible yet
        }
        first_start = false;
    }

    // ascent guarantee: fall back to the best feasible iterate seen, or to
    // the initial placement itself
    if (!have_chosen || returned_payoff < init_payoff - 1e-9) {
        if (best_payoff >= init_payoff &&
            defender_detail::placement_violation(spec, best_placement) <= 1e-6) {
            returned = best_placement;
            returned_payoff = best_payoff;
        } else {
            returned = init;
            returned_payoff = init_payoff;
        }
    }

    report.objective_value = -returned_payoff;
    report.solution = vars_from_placement(returned);
    return {returned, report};
}

} // namespace segame
