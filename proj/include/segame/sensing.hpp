#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "segame/errors.hpp"
#include "segame/vec2.hpp"

namespace segame {

inline constexpr double kDetectCap = 1.0 - 1e-9; // K is clamped below 1
inline constexpr double kMinRange = 1e-6;        // distance floor for r_hat

/// Triangular scan-reversal pan schedule. `phase_s` shifts the waveform in
/// time; a half-period phase flips the initial sweep direction.
struct PanSchedule {
    double psi0 = 0.0;      // initial heading, rad
    double delta_psi = 0.0; // half-sweep, rad, in [0, pi]
    double period = 1.0;    // scanning period, s, > 0
    double phase_s = 0.0;
};

enum class SensorKind { Directional, Omnidirectional };

struct Sensor {
    Vec2 position{0.0, 0.0};
    SensorKind kind = SensorKind::Omnidirectional;
    PanSchedule schedule{};   // directional only
    double alpha = 0.01;      // distance scaling, 1/units^2, > 0
    double sigma = 0.001;     // minimal detection bias, in [0, 0.1]
    double sharpness = 50.0;  // sigmoid c, > 0
    double fov = 0.0;         // FOV angle theta, rad, directional only
    int building_index = 0;   // perimeter the sensor is assigned to
};

/// Attacker waypoints z_0..z_N at uniform time step dt = t_f / N.
struct Trajectory {
    std::vector<Vec2> waypoints;
    double t_f = 0.0;

    std::size_t steps() const { return waypoints.empty() ? 0 : waypoints.size() - 1; }
    double dt() const { return steps() > 0 ? t_f / static_cast<double>(steps()) : 0.0; }
};

/// Defender strategy: one position per sensor, same order as the sensor list.
struct SensorPlacement {
    std::vector<Vec2> positions;
};

inline double pan_angle(const PanSchedule& s, double t) {
    const double u = 2.0 * M_PI * (t + s.phase_s) / s.period;
    return s.psi0 + (2.0 * s.delta_psi / M_PI) * std::asin(std::sin(u));
}

inline Vec2 heading(const Sensor& sensor, double t) {
    if (sensor.kind != SensorKind::Directional)
        throw NotDirectional("heading() is defined for directional sensors only");
    const double psi = pan_angle(sensor.schedule, t);
    return {std::cos(psi), std::sin(psi)};
}

namespace detail {

inline double decay_at(const Sensor& s, const Vec2& x, const Vec2& z) {
    return 1.0 / (s.alpha * (x - z).norm_sq() + 1.0) + s.sigma;
}

inline double visibility_at(const Sensor& s, const Vec2& x, const Vec2& z, double t) {
    if (s.kind == SensorKind::Omnidirectional) return 1.0;
    const Vec2 r = z - x;
    const double d = std::max(r.norm(), kMinRange);
    const Vec2 r_hat = r / d;
    const double psi = pan_angle(s.schedule, t);
    const Vec2 h{std::cos(psi), std::sin(psi)};
    const double cos_gamma = r_hat.dot(h);
    return 1.0 / (1.0 + std::exp(-s.sharpness * (cos_gamma - std::cos(s.fov / 2.0))));
}

inline double detect_at(const Sensor& s, const Vec2& x, const Vec2& z, double t) {
    const double k = decay_at(s, x, z) * visibility_at(s, x, z, t);
    return std::min(std::max(k, 0.0), kDetectCap);
}

struct KernelEval {
    double k = 0.0;   // clamped detectability
    Vec2 grad_z{0.0, 0.0}; // dK/dz, zero while the cap clamp is active
};

/// One-pass K_j and dK_j/dz sharing the decay/visibility work.
inline KernelEval detect_with_grad(const Sensor& s, const Vec2& x, const Vec2& z, double t) {
    KernelEval out;
    const Vec2 r = z - x;
    const double denom = s.alpha * r.norm_sq() + 1.0;
    const double decay = 1.0 / denom + s.sigma;

    double vis = 1.0;
    Vec2 grad_vis{0.0, 0.0};
    double tangential_scale = 0.0;
    Vec2 r_hat{0.0, 0.0}, h{0.0, 0.0};
    if (s.kind == SensorKind::Directional) {
        const double d = std::max(r.norm(), kMinRange);
        r_hat = r / d;
        const double psi = pan_angle(s.schedule, t);
        h = {std::cos(psi), std::sin(psi)};
        const double cos_gamma = r_hat.dot(h);
        vis = 1.0 / (1.0 + std::exp(-s.sharpness * (cos_gamma - std::cos(s.fov / 2.0))));
        tangential_scale = s.sharpness * vis * (1.0 - vis) / d;
    }

    const double raw = decay * vis;
    if (raw > kDetectCap) {
        out.k = kDetectCap;
        return out;
    }
    out.k = std::max(raw, 0.0);
    const Vec2 grad_decay = r * (-2.0 * s.alpha / (denom * denom));
    if (s.kind == SensorKind::Directional)
        grad_vis = (h - r_hat * h.dot(r_hat)) * tangential_scale;
    out.grad_z = grad_decay * vis + grad_vis * decay;
    return out;
}

inline Vec2 detect_grad_z(const Sensor& s, const Vec2& x, const Vec2& z, double t) {
    return detect_with_grad(s, x, z, t).grad_z;
}

} // namespace detail

inline double distance_decay(const Sensor& sensor, const Vec2& z) {
    return detail::decay_at(sensor, sensor.position, z);
}

inline double visibility(const Sensor& sensor, const Vec2& z, double t) {
    return detail::visibility_at(sensor, sensor.position, z, t);
}

inline double detectability(const Sensor& sensor, const Vec2& z, double t) {
    return detail::detect_at(sensor, sensor.position, z, t);
}

/// K(z, S, t) = 1 - prod_j (1 - K_j), positions taken from `placement`.
inline double combined_detectability(const SensorPlacement& placement,
                                     const std::vector<Sensor>& sensors, const Vec2& z,
                                     double t) {
    double survival = 1.0;
    for (std::size_t j = 0; j < sensors.size(); ++j)
        survival *= 1.0 - detail::detect_at(sensors[j], placement.positions[j], z, t);
    return 1.0 - survival;
}

/// J = -sum_{k=0}^{N-1} ln(1 - K(z_k, S, t_k)). Finite for every input
/// because of the detectability cap.
inline double log_survival_payoff(const Trajectory& traj, const SensorPlacement& placement,
                                  const std::vector<Sensor>& sensors) {
    const double dt = traj.dt();
    double j = 0.0;
    for (std::size_t k = 0; k + 1 < traj.waypoints.size(); ++k) {
        const double t = static_cast<double>(k) * dt;
        for (std::size_t s = 0; s < sensors.size(); ++s)
            j -= std::log1p(-detail::detect_at(sensors[s], placement.positions[s],
                                               traj.waypoints[k], t));
    }
    return j;
}

inline double detection_probability(double j) { return 1.0 - std::exp(-j); }

/// One-pass J plus per-waypoint gradient; the final waypoint never enters
/// the payoff, so its entry is zero.
inline double payoff_value_and_gradient_z(const Trajectory& traj,
                                          const SensorPlacement& placement,
                                          const std::vector<Sensor>& sensors,
                                          std::vector<Vec2>& grads) {
    grads.assign(traj.waypoints.size(), Vec2{0.0, 0.0});
    const double dt = traj.dt();
    double j = 0.0;
    for (std::size_t k = 0; k + 1 < traj.waypoints.size(); ++k) {
        const double t = static_cast<double>(k) * dt;
        Vec2 g{0.0, 0.0};
        for (std::size_t s = 0; s < sensors.size(); ++s) {
            const detail::KernelEval e = detail::detect_with_grad(
                sensors[s], placement.positions[s], traj.waypoints[k], t);
            j -= std::log1p(-e.k);
            g += e.grad_z / (1.0 - e.k);
        }
        grads[k] = g;
    }
    return j;
}

/// One-pass J plus per-sensor gradient; the per-term antisymmetry
/// dK/dx = -dK/dz makes this the negated sum of the attacker-side summands.
inline double payoff_value_and_gradient_x(const Trajectory& traj,
                                          const SensorPlacement& placement,
                                          const std::vector<Sensor>& sensors,
                                          std::vector<Vec2>& grads) {
    grads.assign(sensors.size(), Vec2{0.0, 0.0});
    const double dt = traj.dt();
    double j = 0.0;
    for (std::size_t k = 0; k + 1 < traj.waypoints.size(); ++k) {
        const double t = static_cast<double>(k) * dt;
        for (std::size_t s = 0; s < sensors.size(); ++s) {
            const detail::KernelEval e = detail::detect_with_grad(
                sensors[s], placement.positions[s], traj.waypoints[k], t);
            j -= std::log1p(-e.k);
            grads[s] -= e.grad_z / (1.0 - e.k);
        }
    }
    return j;
}

inline std::vector<Vec2> payoff_gradient_z(const Trajectory& traj,
                                           const SensorPlacement& placement,
                                           const std::vector<Sensor>& sensors) {
    std::vector<Vec2> grads;
    payoff_value_and_gradient_z(traj, placement, sensors, grads);
    return grads;
}

inline std::vector<Vec2> payoff_gradient_x(const Trajectory& traj,
                                           const SensorPlacement& placement,
                                           const std::vector<Sensor>& sensors) {
    std::vector<Vec2> grads;
    payoff_value_and_gradient_x(traj, placement, sensors, grads);
    return grads;
}

} // namespace segame
