#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "segame/export.hpp"
#include "segame/game.hpp"
#include "segame/monte_carlo.hpp"
#include "segame/scenario.hpp"

namespace fs = std::filesystem;
using namespace segame;

namespace {

int resolve_workers(int cli_workers) {
    if (const char* env = std::getenv("SEGAME_WORKERS")) {
        const int w = std::atoi(env);
        if (w > 0) return w;
    }
    return cli_workers;
}

int cmd_solve(const std::string& scenario_path, const std::string& out_dir) {
    const Scenario sc = load_scenario(scenario_path);
    std::printf("solving %s (%zu buildings, %zu sensors, N=%d)\n", scenario_path.c_str(),
                sc.buildings.size(), sc.sensors.size(), sc.attacker.n_steps);
    const GameResult result = run_bilevel(sc, sc.game);
    const double joint = log_survival_payoff(result.attacker, result.defender, sc.sensors);
    std::printf("status: %s after %d rounds (%d reinits)\n", to_string(result.status),
                result.rounds, result.reinits);
    std::printf("detection probability at the returned pair: %.4f\n",
                detection_probability(joint));
    if (!result.trace.empty())
        std::printf("final stationarity residual: %.3e\n", result.trace.back().residual);

    if (!out_dir.empty()) {
        TrialRecord record;
        record.seed = sc.game.seed;
        record.rounds = result.rounds;
        record.reinits = result.reinits;
        record.status = to_string(result.status);
        record.trace = result.trace;
        fill_payoffs(record, sc, result);
        record.scene = std::make_shared<TrialScene>(TrialScene{
            sc, result.initial_attacker, result.attacker, result.initial_defender,
            result.defender});
        ExportOptions opts;
        opts.write_svg = true;
        export_results({record}, summarize({record}), out_dir, opts);
        std::printf("wrote %s/{trials.csv,summary.csv,trace_00000.csv,scene_00000.svg}\n",
                    out_dir.c_str());
    }
    return result.status == GameStatus::BudgetExhausted ? 2 : 0;
}

int cmd_monte_carlo(int trials, std::uint64_t seed, const std::string& scale, int workers,
                    const std::string& out_dir, bool svg, bool timing) {
    MonteCarloConfig config = scale == "paper" ? paper_scale_config() : desk_scale_config();
    if (trials > 0) config.trials = trials;
    config.base_seed = seed;
    config.workers = resolve_workers(workers);
    config.keep_scenes = svg;

    std::printf("running %d %s-scale trials (base seed %llu, %d workers)\n", config.trials,
                scale.c_str(), static_cast<unsigned long long>(config.base_seed),
                config.workers > 0 ? config.workers
                                   : static_cast<int>(std::thread::hardware_concurrency()));
    const auto [records, summary] = run_monte_carlo(config);

    std::printf("convergence rate: %.1f%% (%d failed)\n", summary.convergence_rate * 100.0,
                summary.failed);
    std::printf("J_D: %.3f +- %.3f -> %.3f +- %.3f (delta %.3f +- %.3f)\n",
                summary.j_d0.mean, summary.j_d0.ci95, summary.j_d_star.mean,
                summary.j_d_star.ci95, summary.delta_jd.mean, summary.delta_jd.ci95);
    std::printf("J_A: %.3f +- %.3f -> %.3f +- %.3f (delta %.3f +- %.3f)\n",
                summary.j_a0.mean, summary.j_a0.ci95, summary.j_a_star.mean,
                summary.j_a_star.ci95, summary.delta_ja.mean, summary.delta_ja.ci95);
    std::printf("mean wall time per trial: %.2f s\n", summary.mean_wall_time_s);

    if (!out_dir.empty()) {
        ExportOptions opts;
        opts.write_svg = svg;
        opts.include_timing = timing;
        export_results(records, summary, out_dir, opts);
        std::printf("wrote results to %s\n", out_dir.c_str());
    }
    return 0;
}

int cmd_check_gradients(const std::string& scenario_path, int trials) {
    const Scenario sc = load_scenario(scenario_path);
    std::mt19937_64 rng(12345);
    double worst_z = 0.0, worst_x = 0.0;
    for (int t = 0; t < trials; ++t) {
        SensorPlacement placement;
        for (const Sensor& s : sc.sensors) {
            const ConvexPolygon& b = sc.buildings[static_cast<std::size_t>(s.building_index)];
            placement.positions.push_back(perimeter_point(b, uniform01(rng)));
        }
        Trajectory traj;
        traj.t_f = sc.attacker.t_a;
        const int n = 12;
        for (int k = 0; k <= n; ++k)
            traj.waypoints.push_back({uniform_in(rng, 0.0, sc.map_bounds.width),
                                      uniform_in(rng, 0.0, sc.map_bounds.height)});

        const std::vector<Vec2> gz = payoff_gradient_z(traj, placement, sc.sensors);
        const std::vector<Vec2> gx = payoff_gradient_x(traj, placement, sc.sensors);
        const double h = 1e-6;
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k + 1 < traj.waypoints.size(); ++k) {
            for (int c = 0; c < 2; ++c) {
                double* v = c == 0 ? &traj.waypoints[k].x : &traj.waypoints[k].y;
                const double orig = *v;
                *v = orig + h;
                const double fp = log_survival_payoff(traj, placement, sc.sensors);
                *v = orig - h;
                const double fm = log_survival_payoff(traj, placement, sc.sensors);
                *v = orig;
                const double fd = (fp - fm) / (2.0 * h);
                const double an = c == 0 ? gz[k].x : gz[k].y;
                num += (an - fd) * (an - fd);
                den += fd * fd;
            }
        }
        worst_z = std::max(worst_z, std::sqrt(num) / std::max(std::sqrt(den), 1e-12));
        num = den = 0.0;
        for (std::size_t j = 0; j < sc.sensors.size(); ++j) {
            for (int c = 0; c < 2; ++c) {
                double* v = c == 0 ? &placement.positions[j].x : &placement.positions[j].y;
                const double orig = *v;
                *v = orig + h;
                const double fp = log_survival_payoff(traj, placement, sc.sensors);
                *v = orig - h;
                const double fm = log_survival_payoff(traj, placement, sc.sensors);
                *v = orig;
                const double fd = (fp - fm) / (2.0 * h);
                const double an = c == 0 ? gx[j].x : gx[j].y;
                num += (an - fd) * (an - fd);
                den += fd * fd;
            }
        }
        worst_x = std::max(worst_x, std::sqrt(num) / std::max(std::sqrt(den), 1e-12));
    }
    std::printf("max relative gradient error over %d random scenes:\n", trials);
    std::printf("  attacker (d/dz): %.3e\n", worst_z);
    std::printf("  defender (d/dx): %.3e\n", worst_x);
    const bool ok = worst_z < 1e-5 && worst_x < 1e-5;
    std::printf("%s\n", ok ? "PASS" : "FAIL");
    return ok ? 0 : 2;
}

int cmd_plot(const std::string& result_dir) {
    const auto rows = read_csv(fs::path(result_dir) / "trials.csv");
    if (rows.size() < 2) throw IoError("trials.csv has no data rows");
    std::vector<TrialRecord> records;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        TrialRecord r;
        r.j_d0 = std::stod(rows[i][3]);
        r.j_d_star = std::stod(rows[i][4]);
        records.push_back(r);
    }
    write_payoff_plot(fs::path(result_dir) / "payoffs.svg", records);

    int plotted = 0;
    for (std::size_t i = 0; i < rows.size() - 1; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "trace_%05zu.csv", i);
        const fs::path trace_path = fs::path(result_dir) / name;
        if (!fs::exists(trace_path)) continue;
        const auto trace_rows = read_csv(trace_path);
        std::vector<RoundRecord> trace;
        for (std::size_t rr = 1; rr < trace_rows.size(); ++rr) {
            RoundRecord rec;
            rec.round = std::stoi(trace_rows[rr][0]);
            rec.reinit = std::stoi(trace_rows[rr][1]);
            rec.j_attacker = std::stod(trace_rows[rr][2]);
            rec.j_defender = std::stod(trace_rows[rr][3]);
            rec.joint = std::stod(trace_rows[rr][4]);
            rec.residual = std::stod(trace_rows[rr][5]);
            trace.push_back(rec);
        }
        char plot_name[40];
        std::snprintf(plot_name, sizeof(plot_name), "convergence_%05zu.svg", i);
        write_trace_plot(fs::path(result_dir) / plot_name, trace);
        ++plotted;
    }
    std::printf("wrote payoffs.svg and %d convergence plots to %s\n", plotted,
                result_dir.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"surveillance-evasion game solver"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir, result_dir, scale = "desk";
    int trials = 0, workers = 0, grad_trials = 100;
    std::uint64_t seed = 1;
    bool svg = false, timing = false;

    auto* solve = app.add_subcommand("solve", "solve one scenario to a local Nash equilibrium");
    solve->add_option("scenario", scenario_path, "scenario JSON file")->required();
    solve->add_option("--out", out_dir, "output directory for csv/svg results");

    auto* mc = app.add_subcommand("monte-carlo", "run a randomized trial batch");
    mc->add_option("--trials", trials, "trial count (default: scale preset)");
    mc->add_option("--seed", seed, "base seed; trial i uses base_seed + i");
    mc->add_option("--scale", scale, "desk|paper")->check(CLI::IsMember({"desk", "paper"}));
    mc->add_option("--workers", workers, "worker threads (SEGAME_WORKERS overrides)");
    mc->add_option("--out", out_dir, "output directory");
    mc->add_flag("--svg", svg, "also write per-trial scene SVGs");
    mc->add_flag("--timing-in-csv", timing,
                 "write measured wall times into trials.csv (breaks bitwise reproducibility)");

    auto* grad = app.add_subcommand("check-gradients", "finite-difference gradient check");
    grad->add_option("scenario", scenario_path, "scenario JSON file")->required();
    grad->add_option("--trials", grad_trials, "random scenes to check");

    auto* plot = app.add_subcommand("plot", "render SVG plots from an exported result directory");
    plot->add_option("result-dir", result_dir, "directory with trials.csv")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) return cmd_solve(scenario_path, out_dir);
        if (mc->parsed()) return cmd_monte_carlo(trials, seed, scale, workers, out_dir, svg, timing);
        if (grad->parsed()) return cmd_check_gradients(scenario_path, grad_trials);
        if (plot->parsed()) return cmd_plot(result_dir);
    } catch (const ParseError& e) {
        std::fprintf(stderr, "parse error: %s\n", e.what());
        return 1;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 1;
    } catch (const ScenarioInvalid& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 1;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        return 2;
    }
    return 0;
}
