#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "segame/errors.hpp"

namespace segame {

/// Callable returning the value at x and filling the gradient (sized to the
/// problem dimension). Must be deterministic.
using ScalarFn = std::function<double(const std::vector<double>&, std::vector<double>&)>;

struct BoxBounds {
    std::vector<double> lower;
    std::vector<double> upper;
};

struct NlpProblem {
    int dimension = 0;
    ScalarFn objective;
    std::vector<ScalarFn> equality_constraints;        // c(x) = 0
    std::vector<ScalarFn> inequality_constraints;      // g(x) <= 0
    std::optional<BoxBounds> bounds;
    // optional per-constraint gradient supports: when set, only the listed
    // coordinates of a constraint gradient are read (and need be written)
    std::vector<std::vector<int>> equality_support;
    std::vector<std::vector<int>> inequality_support;
};

enum class SolveStatus { Converged, IterationLimit, LineSearchFailure };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Converged: return "converged";
        case SolveStatus::IterationLimit: return "iteration_limit";
        case SolveStatus::LineSearchFailure: return "line_search_failure";
    }
    return "unknown";
}

struct SolveReport {
    std::vector<double> solution;
    double objective_value = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    SolveStatus status = SolveStatus::IterationLimit;
};

struct MinimizeOptions {
    int max_outer = 40;
    int max_inner_per_outer = 250;
    int max_iterations = 0;     // <= 0: caller's default budget
    double violation_tol = 0.0; // <= 0: use the stationarity tolerance
    // called after every accepted inner step with (outer index, merit value)
    std::function<void(int, double)> on_accept;
    // may repair the iterate after an accepted step; return true if modified
    std::function<bool(std::vector<double>&)> post_step;
    // called once per outer round: (outer, penalty, violation, kkt, inner steps)
    std::function<void(int, double, double, double, int)> on_outer;
};

namespace opt_detail {

inline double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline void clip_to_bounds(const std::optional<BoxBounds>& b, std::vector<double>& x) {
    if (!b) return;
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::clamp(x[i], b->lower[i], b->upper[i]);
}

inline double projected_gradient_norm(const std::optional<BoxBounds>& b,
                                      const std::vector<double>& x,
                                      const std::vector<double>& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double step = x[i] - g[i];
        if (b) step = std::clamp(step, b->lower[i], b->upper[i]);
        const double pg = x[i] - step;
        s += pg * pg;
    }
    return std::sqrt(s);
}

struct LbfgsMemory {
    std::deque<std::vector<double>> s, y;
    std::deque<double> rho;
    static constexpr std::size_t capacity = 10;

    void clear() { s.clear(); y.clear(); rho.clear(); }

    void push(std::vector<double> si, std::vector<double> yi) {
        double sy = 0.0, yy = 0.0;
        for (std::size_t i = 0; i < si.size(); ++i) { sy += si[i] * yi[i]; yy += yi[i] * yi[i]; }
        if (sy <= 1e-12 * std::sqrt(yy) * norm2(si)) return; // non-positive curvature
        if (s.size() == capacity) { s.pop_front(); y.pop_front(); rho.pop_front(); }
        s.push_back(std::move(si));
        y.push_back(std::move(yi));
        rho.push_back(1.0 / sy);
    }

    // two-loop recursion: d = -H g
    std::vector<double> direction(const std::vector<double>& g) const {
        std::vector<double> q = g;
        const std::size_t m = s.size();
        std::vector<double> alpha(m);
        for (std::size_t i = m; i-- > 0;) {
            double si_q = 0.0;
            for (std::size_t k = 0; k < q.size(); ++k) si_q += s[i][k] * q[k];
            alpha[i] = rho[i] * si_q;
            for (std::size_t k = 0; k < q.size(); ++k) q[k] -= alpha[i] * y[i][k];
        }
        if (m > 0) {
            double sy = 0.0, yy = 0.0;
            for (std::size_t k = 0; k < q.size(); ++k) {
                sy += s[m - 1][k] * y[m - 1][k];
                yy += y[m - 1][k] * y[m - 1][k];
            }
            const double gamma = sy / yy;
            for (double& v : q) v *= gamma;
        }
        for (std::size_t i = 0; i < m; ++i) {
            double yi_q = 0.0;
            for (std::size_t k = 0; k < q.size(); ++k) yi_q += y[i][k] * q[k];
            const double beta = rho[i] * yi_q;
            for (std::size_t k = 0; k < q.size(); ++k) q[k] += (alpha[i] - beta) * s[i][k];
        }
        for (double& v : q) v = -v;
        return q;
    }
};

} // namespace opt_detail

/// Augmented-Lagrangian solver: quasi-Newton inner minimization with Armijo
/// backtracking, multiplier updates each outer round, penalty growth factor
/// 10 when the constraint violation stalls. Deterministic given (problem, x0).
inline SolveReport minimize(const NlpProblem& problem, std::vector<double> x, double tol,
                            int max_iter, const MinimizeOptions& opts = {}) {
    using namespace opt_detail;
    const std::size_t n = static_cast<std::size_t>(problem.dimension);
    if (x.size() != n) throw DimensionMismatch("x0 has size " + std::to_string(x.size()) +
                                               ", problem dimension is " + std::to_string(n));
    if (problem.bounds &&
        (problem.bounds->lower.size() != n || problem.bounds->upper.size() != n))
        throw DimensionMismatch("bounds size does not match problem dimension");
    clip_to_bounds(problem.bounds, x);

    const std::size_t ne = problem.equality_constraints.size();
    const std::size_t ni = problem.inequality_constraints.size();
    std::vector<double> lambda(ne, 0.0), mu(ni, 0.0);
    double rho = 1.0;

    std::vector<double> grad_buf(n), work(n);
    std::vector<double> ceq(ne), cin(ni);

    auto axpy_support = [&](std::vector<double>& g, double w, const std::vector<int>* support) {
        if (support && !support->empty()) {
            for (int k : *support) g[static_cast<std::size_t>(k)] += w * grad_buf[static_cast<std::size_t>(k)];
        } else {
            for (std::size_t k = 0; k < n; ++k) g[k] += w * grad_buf[k];
        }
    };
    auto eq_support = [&](std::size_t i) -> const std::vector<int>* {
        return i < problem.equality_support.size() ? &problem.equality_support[i] : nullptr;
    };
    auto in_support = [&](std::size_t j) -> const std::vector<int>* {
        return j < problem.inequality_support.size() ? &problem.inequality_support[j] : nullptr;
    };

    // merit value plus gradient of the augmented Lagrangian
    auto eval_merit = [&](const std::vector<double>& xv, std::vector<double>& g) {
        double value = problem.objective(xv, grad_buf);
        if (!std::isfinite(value)) throw NonFiniteObjective("objective value is not finite");
        g = grad_buf;
        for (double gi : g)
            if (!std::isfinite(gi)) throw NonFiniteObjective("objective gradient is not finite");
        for (std::size_t i = 0; i < ne; ++i) {
            const double c = problem.equality_constraints[i](xv, grad_buf);
            ceq[i] = c;
            const double w = lambda[i] + rho * c;
            value += lambda[i] * c + 0.5 * rho * c * c;
            axpy_support(g, w, eq_support(i));
        }
        for (std::size_t j = 0; j < ni; ++j) {
            const double c = problem.inequality_constraints[j](xv, grad_buf);
            cin[j] = c;
            const double m = mu[j] + rho * c;
            if (m > 0.0) {
                value += (m * m - mu[j] * mu[j]) / (2.0 * rho);
                axpy_support(g, m, in_support(j));
            } else {
                value -= mu[j] * mu[j] / (2.0 * rho);
            }
        }
        if (!std::isfinite(value)) throw NonFiniteObjective("merit value is not finite");
        return value;
    };

    auto violation = [&]() {
        double v = 0.0;
        for (std::size_t i = 0; i < ne; ++i) v = std::max(v, std::abs(ceq[i]));
        for (std::size_t j = 0; j < ni; ++j) v = std::max(v, cin[j]);
        return v;
    };

    // KKT residual with first-order multiplier estimates
    auto kkt_residual = [&](const std::vector<double>& xv) {
        std::vector<double> g(n, 0.0);
        problem.objective(xv, grad_buf);
        g = grad_buf;
        for (std::size_t i = 0; i < ne; ++i) {
            const double c = problem.equality_constraints[i](xv, grad_buf);
            const double w = lambda[i] + rho * c;
            axpy_support(g, w, eq_support(i));
        }
        for (std::size_t j = 0; j < ni; ++j) {
            const double c = problem.inequality_constraints[j](xv, grad_buf);
            const double m = std::max(0.0, mu[j] + rho * c);
            axpy_support(g, m, in_support(j));
        }
        return projected_gradient_norm(problem.bounds, xv, g);
    };

    SolveReport report;
    int total_iters = 0;
    const double vtol = opts.violation_tol > 0.0 ? opts.violation_tol : tol;
    double omega = (ne + ni == 0) ? tol : std::max(1e-2, tol);
    double prev_violation = std::numeric_limits<double>::infinity();
    int consecutive_stalls = 0;
    bool last_inner_failed = false;

    std::vector<double> g(n), g_new(n);
    for (int outer = 0; outer < opts.max_outer && total_iters < max_iter; ++outer) {
        LbfgsMemory memory;
        double merit = eval_merit(x, g);
        bool line_search_failed = false;
        int accepted = 0;

        for (int inner = 0; inner < opts.max_inner_per_outer && total_iters < max_iter; ++inner) {
            if (projected_gradient_norm(problem.bounds, x, g) < omega) break;

            std::vector<double> d = memory.direction(g);
            double gd = 0.0;
            for (std::size_t k = 0; k < n; ++k) gd += g[k] * d[k];
            if (gd >= 0.0) { // not a descent direction, fall back
                for (std::size_t k = 0; k < n; ++k) d[k] = -g[k];
                memory.clear();
            }

            std::vector<double> x_try(n);
            double merit_try = 0.0;
            // floating-point noise floor: near a minimizer the true decrease
            // drops below what the merit can resolve, so Armijo alone stalls
            const double noise = 1e-13 * (1.0 + std::abs(merit));
            auto backtrack = [&](const std::vector<double>& dir) {
                double step = 1.0;
                for (int bt = 0; bt < 40; ++bt) {
                    for (std::size_t k = 0; k < n; ++k) x_try[k] = x[k] + step * dir[k];
                    clip_to_bounds(problem.bounds, x_try);
                    double directional = 0.0;
                    for (std::size_t k = 0; k < n; ++k) directional += g[k] * (x_try[k] - x[k]);
                    if (directional < 0.0) {
                        merit_try = eval_merit(x_try, g_new);
                        if (merit_try <= merit + 1e-4 * directional + noise) return true;
                    }
                    step *= 0.5;
                }
                return false;
            };
            bool accepted_step = backtrack(d);
            if (!accepted_step) {
                // a poorly scaled quasi-Newton direction can defeat 40
                // halvings; steepest descent settles it
                bool was_steepest = true;
                for (std::size_t k = 0; k < n; ++k)
                    if (d[k] != -g[k]) { was_steepest = false; break; }
                if (!was_steepest) {
                    for (std::size_t k = 0; k < n; ++k) d[k] = -g[k];
                    memory.clear();
                    accepted_step = backtrack(d);
                }
            }
            if (!accepted_step) { line_search_failed = true; break; }

            std::vector<double> s(n), ydiff(n);
            for (std::size_t k = 0; k < n; ++k) {
                s[k] = x_try[k] - x[k];
                ydiff[k] = g_new[k] - g[k];
            }
            memory.push(std::move(s), std::move(ydiff));
            x = std::move(x_try);
            x_try.assign(n, 0.0);
            g = g_new;
            merit = merit_try;
            ++accepted;
            ++total_iters;
            if (opts.on_accept) opts.on_accept(outer, merit);
            if (opts.post_step && opts.post_step(x)) {
                merit = eval_merit(x, g);
                memory.clear();
            }
        }

        // refresh constraint values at the inner solution
        merit = eval_merit(x, g);
        const double v = violation();
        const double kkt = kkt_residual(x);
        if (opts.on_outer) opts.on_outer(outer, rho, v, kkt, accepted);
        if (kkt < tol && v < vtol) {
            report.status = SolveStatus::Converged;
            report.kkt_residual = kkt;
            break;
        }
        report.kkt_residual = kkt;

        if (line_search_failed && accepted == 0) {
            // a stall while still infeasible means the subproblem is stuck
            if (v > 10.0 * vtol && ++consecutive_stalls >= 3) {
                report.status = SolveStatus::LineSearchFailure;
                break;
            }
        } else {
            consecutive_stalls = 0;
        }
        last_inner_failed = line_search_failed;

        for (std::size_t i = 0; i < ne; ++i) lambda[i] += rho * ceq[i];
        for (std::size_t j = 0; j < ni; ++j) mu[j] = std::max(0.0, mu[j] + rho * cin[j]);
        if (v > vtol && (line_search_failed || v > 0.25 * prev_violation))
            rho = std::min(rho * 10.0, 1e12);
        prev_violation = v;
        omega = std::max(std::min(omega * 0.2, 0.1 * std::max(v, tol)), tol * 0.5);
    }
    (void)last_inner_failed;

    report.solution = x;
    std::vector<double> tmp(n);
    report.objective_value = problem.objective(x, tmp);
    report.iterations = total_iters;
    if (report.status != SolveStatus::Converged && report.status != SolveStatus::LineSearchFailure)
        report.status = SolveStatus::IterationLimit;
    // a final residual measurement for reporting
    report.kkt_residual = kkt_residual(x);
    return report;
}

/// Max over coordinates of the relative error between the analytical
/// objective gradient and a central finite difference with step h.
inline double check_gradient(const NlpProblem& problem, std::vector<double> x, double h) {
    const std::size_t n = static_cast<std::size_t>(problem.dimension);
    if (x.size() != n) throw DimensionMismatch("x has wrong size in check_gradient");
    std::vector<double> analytic(n), scratch(n);
    problem.objective(x, analytic);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = x[i];
        x[i] = xi + h;
        const double fp = problem.objective(x, scratch);
        x[i] = xi - h;
        const double fm = problem.objective(x, scratch);
        x[i] = xi;
        const double fd = (fp - fm) / (2.0 * h);
        const double err = std::abs(analytic[i] - fd) / std::max(std::abs(fd), 1e-8);
        worst = std::max(worst, err);
    }
    return worst;
}

} // namespace segame
