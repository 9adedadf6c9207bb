#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "segame/attacker.hpp"
#include "segame/defender.hpp"
#include "segame/game_types.hpp"
#include "segame/scenario.hpp"

namespace segame {

namespace game_detail {

/// min over multipliers of ||g - A^T lambda||_2, rows of A being active
/// constraint gradients; solved through ridge-stabilized normal equations.
inline double least_squares_residual(const std::vector<std::vector<double>>& rows,
                                     const std::vector<double>& g) {
    const std::size_t m = rows.size();
    const std::size_t n = g.size();
    auto norm = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    };
    if (m == 0) return norm(g);

    std::vector<std::vector<double>> gram(m, std::vector<double>(m + 1, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < n; ++k) dot += rows[i][k] * rows[j][k];
            gram[i][j] = dot + (i == j ? 1e-10 : 0.0);
        }
        double rhs = 0.0;
        for (std::size_t k = 0; k < n; ++k) rhs += rows[i][k] * g[k];
        gram[i][m] = rhs;
    }
    // Gaussian elimination with partial pivoting
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < m; ++r)
            if (std::abs(gram[r][col]) > std::abs(gram[pivot][col])) pivot = r;
        std::swap(gram[col], gram[pivot]);
        for (std::size_t r = col + 1; r < m; ++r) {
            const double f = gram[r][col] / gram[col][col];
            for (std::size_t c = col; c <= m; ++c) gram[r][c] -= f * gram[col][c];
        }
    }
    std::vector<double> lambda(m, 0.0);
    for (std::size_t i = m; i-- > 0;) {
        double v = gram[i][m];
        for (std::size_t j = i + 1; j < m; ++j) v -= gram[i][j] * lambda[j];
        lambda[i] = v / gram[i][i];
    }
    std::vector<double> res = g;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < n; ++k) res[k] -= lambda[i] * rows[i][k];
    return norm(res);
}

} // namespace game_detail

/// max(||proj grad_a J||, ||proj grad_d J||) at the strategy pair, with
/// multipliers re-estimated by least squares against the active constraint
/// gradients of each player's subproblem.
inline double stationarity_residual(const Scenario& scenario, const Trajectory& traj,
                                    const SensorPlacement& placement) {
    // activity band: the augmented-Lagrangian solver parks active constraints
    // a hair inside the boundary (c ~ -mu/rho), and admitting extra rows only
    // lowers the least-squares minimum
    constexpr double act_tol = 1e-3;
    const std::vector<Sensor>& sensors = scenario.sensors;

    double attacker_res = 0.0;
    {
        const int n = scenario.attacker.n_steps;
        const double dt = traj.dt();
        const double cap = scenario.attacker.v_max * dt;
        const std::size_t dim = 2 * static_cast<std::size_t>(n - 1);
        const std::vector<Vec2> grads = payoff_gradient_z(traj, placement, sensors);
        std::vector<double> g(dim);
        for (int k = 1; k < n; ++k) {
            g[2 * (k - 1)] = grads[static_cast<std::size_t>(k)].x;
            g[2 * (k - 1) + 1] = grads[static_cast<std::size_t>(k)].y;
        }
        std::vector<std::vector<double>> rows;
        for (int k = 0; k < n; ++k) {
            const Vec2 d = traj.waypoints[static_cast<std::size_t>(k) + 1] -
                           traj.waypoints[static_cast<std::size_t>(k)];
            if (d.norm() < cap - act_tol) continue;
            std::vector<double> row(dim, 0.0);
            if (k >= 1) {
                row[2 * (k - 1)] = -2.0 * d.x;
                row[2 * (k - 1) + 1] = -2.0 * d.y;
            }
            if (k + 1 <= n - 1) {
                row[2 * k] = 2.0 * d.x;
                row[2 * k + 1] = 2.0 * d.y;
            }
            rows.push_back(std::move(row));
        }
        for (int k = 1; k < n; ++k) {
            const Vec2& z = traj.waypoints[static_cast<std::size_t>(k)];
            for (const ConvexPolygon& b : scenario.buildings) {
                // same smoothed surface the attacker NLP constrains against
                if (-lse_residual(b, z, kClearanceSmoothing) >
                    scenario.smoothing.clearance + clearance_shift(b) + act_tol)
                    continue;
                const Vec2 grad = lse_gradient(b, z, kClearanceSmoothing);
                std::vector<double> row(dim, 0.0);
                row[2 * (k - 1)] = grad.x;
                row[2 * (k - 1) + 1] = grad.y;
                rows.push_back(std::move(row));
            }
            auto bound_row = [&](int coord, double sign) {
                std::vector<double> row(dim, 0.0);
                row[2 * (k - 1) + coord] = sign;
                rows.push_back(std::move(row));
            };
            if (z.x < act_tol) bound_row(0, -1.0);
            if (z.x > scenario.map_bounds.width - act_tol) bound_row(0, 1.0);
            if (z.y < act_tol) bound_row(1, -1.0);
            if (z.y > scenario.map_bounds.height - act_tol) bound_row(1, 1.0);
        }
        attacker_res = game_detail::least_squares_residual(rows, g);
    }

    double defender_sq = 0.0;
    {
        const std::vector<Vec2> grads = payoff_gradient_x(traj, placement, sensors);
        for (std::size_t j = 0; j < sensors.size(); ++j) {
            const ConvexPolygon& building =
                scenario.buildings[static_cast<std::size_t>(sensors[j].building_index)];
            const Vec2& x = placement.positions[j];
            const std::vector<double> g{-grads[j].x, -grads[j].y}; // defender maximizes J
            std::vector<std::vector<double>> rows;
            for (const HalfSpace& h : building.halfspaces)
                if (h.a.dot(x) - h.b > -act_tol) rows.push_back({h.a.x, h.a.y});
            const Vec2 lse_g = lse_gradient(building, x, scenario.smoothing.epsilon);
            rows.push_back({lse_g.x, lse_g.y});
            const double r = game_detail::least_squares_residual(rows, g);
            defender_sq += r * r;
        }
    }
    return std::max(attacker_res, std::sqrt(defender_sq));
}

/// Non-decaying oscillation test on the joint payoff series: over the last
/// `window` deltas the mean |dJ| stays above 10*delta with no decreasing
/// least-squares trend.
inline bool detect_limit_cycle(const std::vector<double>& joint_payoffs, int window,
                               double delta) {
    if (window < 4 || static_cast<int>(joint_payoffs.size()) < window + 1) return false;
    std::vector<double> deltas;
    const std::size_t start = joint_payoffs.size() - static_cast<std::size_t>(window) - 1;
    for (std::size_t i = start; i + 1 < joint_payoffs.size(); ++i)
        deltas.push_back(std::abs(joint_payoffs[i + 1] - joint_payoffs[i]));

    double mean = 0.0;
    for (double d : deltas) mean += d;
    mean /= static_cast<double>(deltas.size());
    if (mean <= 10.0 * delta) return false;

    // least-squares slope of |dJ| against the round index
    const double n = static_cast<double>(deltas.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        const double xi = static_cast<double>(i);
        sx += xi;
        sy += deltas[i];
        sxx += xi * xi;
        sxy += xi * deltas[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return slope >= -1e-9 * std::max(mean, delta); // flat-to-growing, rounding-tolerant
}

/// Alternating bilevel loop: best responses in Gauss-Seidel order, stopped on
/// mutual first-order stationarity, with limit-cycle detection triggering an
/// early defender reinitialization.
inline GameResult run_bilevel(const Scenario& scenario, const GameOptions& options) {
    try {
        scenario.validate();
    } catch (const ValidationError& e) {
        throw ScenarioInvalid(e.what());
    }

    const Scene scene = scenario.scene();
    const DefenderSpec def_spec = scenario.defender_spec();
    const AttackerSpec& atk_spec = scenario.attacker;
    const std::vector<Sensor>& sensors = scenario.sensors;
    const double sub_tol = options.delta * 0.5;

    GameResult result;
    bool cycle_seen = false;
    double best_residual = std::numeric_limits<double>::infinity();
    int round_counter = 0;

    int rrt_failures = 0;
    for (int r = 0; r < options.r_max; ++r) {
        const std::uint64_t reinit_seed = mix_seed(options.seed, static_cast<std::uint64_t>(r));
        SensorPlacement d = sample_initial_placement(def_spec, reinit_seed);
        const SensorPlacement d0 = d;
        Trajectory a;
        try {
            a = stp_rrt_star(atk_spec, scene, d, sensors, mix_seed(reinit_seed, 1),
                             scenario.rrt_iterations);
        } catch (const NoPathFound&) {
            // marginal maps can defeat one tree; later reinitializations get
            // fresh sample streams
            if (++rrt_failures >= options.r_max) throw;
            continue;
        }
        const Trajectory a0 = a;

        std::vector<double> joint_series;
        Trajectory final_a = a;
        SensorPlacement final_d = d;
        bool converged = false;
        double first_response = 0.0;

        for (int k = 1; k <= options.k_max; ++k) {
            // near-stationary pairs get one expensive polish round so the
            // residual can actually cross the stopping tolerance
            const bool endgame =
                !joint_series.empty() && result.trace.back().residual < 50.0 * options.delta;
            const double round_tol = endgame ? options.delta * 0.25 : sub_tol;
            MinimizeOptions atk_opts;
            if (endgame) {
                atk_opts.max_iterations = 15000;
                atk_opts.max_inner_per_outer = 1500;
            }
            auto [a_next, rep_a] =
                attacker_best_response(atk_spec, scene, d, sensors, a, round_tol, atk_opts);
            a = a_next;
            const double j_attacker = log_survival_payoff(a, d, sensors);
            if (k == 1) first_response = j_attacker;

            auto [d_next, rep_d] = defender_best_response(def_spec, a, d, round_tol, true,
                                                          endgame ? 12000 : 6000);
            d = d_next;
            const double j_defender = log_survival_payoff(a, d, sensors);

            const double residual = stationarity_residual(scenario, a, d);
            ++round_counter;
            result.trace.push_back(
                {round_counter, r, j_attacker, j_defender, j_defender, residual});
            joint_series.push_back(j_defender);
            final_a = a;
            final_d = d;

            if (residual < options.delta) { converged = true; break; }
            if (detect_limit_cycle(joint_series, options.limit_cycle_window, options.delta)) {
                cycle_seen = true;
                break;
            }
        }

        if (converged) {
            result.attacker = final_a;
            result.defender = final_d;
            result.initial_attacker = a0;
            result.initial_defender = d0;
            result.first_response_payoff = first_response;
            result.status = cycle_seen ? GameStatus::LimitCycleRecovered : GameStatus::Converged;
            result.rounds = round_counter;
            result.reinits = r;
            return result;
        }
        // keep the reinitialization that came closest to mutual stationarity
        const double final_residual =
            result.trace.empty() ? std::numeric_limits<double>::infinity()
                                 : result.trace.back().residual;
        if (final_residual < best_residual) {
            best_residual = final_residual;
            result.attacker = final_a;
            result.defender = final_d;
            result.initial_attacker = a0;
            result.initial_defender = d0;
            result.first_response_payoff = first_response;
        }
    }

    result.status = GameStatus::BudgetExhausted;
    result.rounds = round_counter;
    result.reinits = options.r_max - 1;
    return result;
}

} // namespace segame
