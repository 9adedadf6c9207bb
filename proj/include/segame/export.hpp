#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "segame/monte_carlo.hpp"

namespace segame {

struct ExportOptions {
    // trials.csv is a reproducibility artifact; wall times vary run to run,
    // so the column is zeroed unless timings are explicitly requested
    bool include_timing = false;
    bool write_svg = false;
};

namespace export_detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

inline void svg_polyline(std::ostream& out, const std::vector<Vec2>& pts,
                         const std::string& cls, const std::string& stroke) {
    out << "<path class=\"" << cls << "\" fill=\"none\" stroke=\"" << stroke
        << "\" stroke-width=\"0.6\" d=\"";
    for (std::size_t i = 0; i < pts.size(); ++i)
        out << (i == 0 ? "M " : "L ") << pts[i].x << ' ' << pts[i].y << ' ';
    out << "\"/>\n";
}

} // namespace export_detail

/// Scene drawing: buildings, sensors with headings and FOV wedges at t=0,
/// initial and final attacker trajectories.
inline void write_scene_svg(const std::filesystem::path& path, const TrialScene& scene) {
    using export_detail::svg_polyline;
    auto out = export_detail::open_out(path);
    const double w = scene.scenario.map_bounds.width;
    const double h = scene.scenario.map_bounds.height;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << w << ' ' << h
        << "\">\n<g transform=\"translate(0," << h << ") scale(1,-1)\">\n";
    out << "<rect width=\"" << w << "\" height=\"" << h
        << "\" fill=\"white\" stroke=\"black\" stroke-width=\"0.3\"/>\n";
    for (const ConvexPolygon& b : scene.scenario.buildings) {
        out << "<polygon fill=\"#c8c8c8\" stroke=\"#555\" stroke-width=\"0.3\" points=\"";
        for (const Vec2& v : b.vertices) out << v.x << ',' << v.y << ' ';
        out << "\"/>\n";
    }
    for (std::size_t j = 0; j < scene.scenario.sensors.size(); ++j) {
        const Sensor& s = scene.scenario.sensors[j];
        const Vec2& pos = scene.final_defender.positions[j];
        const bool directional = s.kind == SensorKind::Directional;
        out << "<circle cx=\"" << pos.x << "\" cy=\"" << pos.y
            << "\" r=\"0.8\" fill=\"" << (directional ? "#d62728" : "#1f77b4") << "\"/>\n";
        if (directional) {
            Sensor at = s;
            at.position = pos;
            const Vec2 dir = heading(at, 0.0);
            const double reach = 3.0 / std::sqrt(s.alpha) * 0.5; // indicative range
            const double half = s.fov / 2.0;
            const double base = std::atan2(dir.y, dir.x);
            const Vec2 left{pos.x + reach * std::cos(base + half),
                            pos.y + reach * std::sin(base + half)};
            const Vec2 right{pos.x + reach * std::cos(base - half),
                             pos.y + reach * std::sin(base - half)};
            out << "<path class=\"fov\" fill=\"#d6272833\" stroke=\"none\" d=\"M " << pos.x
                << ' ' << pos.y << " L " << left.x << ' ' << left.y << " A " << reach << ' '
                << reach << " 0 0 0 " << right.x << ' ' << right.y << " Z\"/>\n";
        }
        out << "<circle cx=\"" << scene.initial_defender.positions[j].x << "\" cy=\""
            << scene.initial_defender.positions[j].y
            << "\" r=\"0.5\" fill=\"none\" stroke=\"#999\" stroke-width=\"0.2\"/>\n";
    }
    svg_polyline(out, scene.initial_attacker.waypoints, "trajectory", "#2ca02c");
    svg_polyline(out, scene.final_attacker.waypoints, "trajectory", "#d62728");
    out << "</g>\n</svg>\n";
}

inline void export_results(const std::vector<TrialRecord>& records,
                           const MonteCarloSummary& summary,
                           const std::filesystem::path& out_dir,
                           const ExportOptions& opts = {}) {
    if (records.empty()) throw IoError("no trial records to export");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string());
    using export_detail::fmt;

    {
        auto out = export_detail::open_out(out_dir / "trials.csv");
        out << "seed,J_A0,J_A_star,J_D0,J_D_star,rounds,reinits,status,wall_time_s\n";
        for (const TrialRecord& r : records) {
            out << r.seed << ',' << fmt(r.j_a0) << ',' << fmt(r.j_a_star) << ',' << fmt(r.j_d0)
                << ',' << fmt(r.j_d_star) << ',' << r.rounds << ',' << r.reinits << ','
                << r.status << ',' << fmt(opts.include_timing ? r.wall_time_s : 0.0) << '\n';
        }
    }
    {
        auto out = export_detail::open_out(out_dir / "summary.csv");
        out << "metric,mean,ci95\n";
        auto row = [&](const char* name, const SummaryStat& s) {
            out << name << ',' << fmt(s.mean) << ',' << fmt(s.ci95) << '\n';
        };
        row("J_A0", summary.j_a0);
        row("J_A_star", summary.j_a_star);
        row("J_D0", summary.j_d0);
        row("J_D_star", summary.j_d_star);
        row("delta_J_A", summary.delta_ja);
        row("delta_J_D", summary.delta_jd);
        out << "convergence_rate," << fmt(summary.convergence_rate) << ",0\n";
        out << "failed_trials," << summary.failed << ",0\n";
        out << "mean_wall_time_s," << fmt(summary.mean_wall_time_s) << ",0\n";
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "trace_%05zu.csv", i);
        auto out = export_detail::open_out(out_dir / name);
        out << "round,reinit,j_attacker,j_defender,joint,residual\n";
        for (const RoundRecord& rec : records[i].trace)
            out << rec.round << ',' << rec.reinit << ',' << fmt(rec.j_attacker) << ','
                << fmt(rec.j_defender) << ',' << fmt(rec.joint) << ',' << fmt(rec.residual)
                << '\n';
    }
    if (opts.write_svg) {
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (!records[i].scene) continue;
            char name[32];
            std::snprintf(name, sizeof(name), "scene_%05zu.svg", i);
            write_scene_svg(out_dir / name, *records[i].scene);
        }
    }
}

/// Minimal CSV reader used by the plot command and round-trip tests.
inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

/// Summary chart: per-trial initial and equilibrium defender payoffs.
inline void write_payoff_plot(const std::filesystem::path& path,
                              const std::vector<TrialRecord>& records) {
    auto out = export_detail::open_out(path);
    const double w = 640.0, h = 360.0, margin = 40.0;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << w << ' ' << h
        << "\">\n";
    out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << h - margin << "\" x2=\"" << w - margin
        << "\" y2=\"" << h - margin << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
        << "\" y2=\"" << h - margin << "\" stroke=\"black\"/>\n";
    const double dx = (w - 2 * margin) / std::max<std::size_t>(records.size(), 1);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const double x = margin + dx * (static_cast<double>(i) + 0.5);
        const double y0 = h - margin - records[i].j_d0 * (h - 2 * margin);
        const double y1 = h - margin - records[i].j_d_star * (h - 2 * margin);
        out << "<line x1=\"" << x << "\" y1=\"" << y0 << "\" x2=\"" << x << "\" y2=\"" << y1
            << "\" stroke=\"#bbb\" stroke-width=\"1\"/>\n";
        out << "<circle cx=\"" << x << "\" cy=\"" << y0 << "\" r=\"2\" fill=\"#1f77b4\"/>\n";
        out << "<circle cx=\"" << x << "\" cy=\"" << y1 << "\" r=\"2\" fill=\"#d62728\"/>\n";
    }
    out << "<text x=\"" << margin << "\" y=\"" << margin - 10
        << "\" font-size=\"12\">defender detection probability: initial (blue) vs "
           "equilibrium (red)</text>\n";
    out << "</svg>\n";
}

/// Convergence chart for one trace: joint payoff and stationarity residual.
inline void write_trace_plot(const std::filesystem::path& path,
                             const std::vector<RoundRecord>& trace) {
    auto out = export_detail::open_out(path);
    const double w = 640.0, h = 360.0, margin = 40.0;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << w << ' ' << h
        << "\">\n<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
    if (!trace.empty()) {
        double max_joint = 1e-12, max_res = 1e-12;
        for (const RoundRecord& r : trace) {
            max_joint = std::max(max_joint, r.joint);
            max_res = std::max(max_res, r.residual);
        }
        const double dx = (w - 2 * margin) / static_cast<double>(trace.size());
        std::vector<Vec2> joint_pts, res_pts;
        for (std::size_t i = 0; i < trace.size(); ++i) {
            const double x = margin + dx * (static_cast<double>(i) + 0.5);
            joint_pts.push_back({x, h - margin - (trace[i].joint / max_joint) * (h - 2 * margin)});
            res_pts.push_back(
                {x, h - margin - (trace[i].residual / max_res) * (h - 2 * margin)});
        }
        export_detail::svg_polyline(out, joint_pts, "joint", "#1f77b4");
        export_detail::svg_polyline(out, res_pts, "residual", "#d62728");
    }
    out << "<text x=\"" << margin << "\" y=\"" << margin - 10
        << "\" font-size=\"12\">joint payoff (blue), stationarity residual (red), per "
           "round</text>\n</svg>\n";
}

} // namespace segame
