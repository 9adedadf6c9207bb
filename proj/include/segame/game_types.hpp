#pragma once

#include <cstdint>
#include <vector>

#include "segame/sensing.hpp"

namespace segame {

struct GameOptions {
    double delta = 1e-5;        // stationarity tolerance
    int k_max = 50;             // max rounds per reinitialization
    int r_max = 5;              // max reinitializations
    int limit_cycle_window = 6; // trailing rounds inspected by the detector
    std::uint64_t seed = 0;
};

enum class GameStatus { Converged, LimitCycleRecovered, BudgetExhausted };

inline const char* to_string(GameStatus s) {
    switch (s) {
        case GameStatus::Converged: return "converged";
        case GameStatus::LimitCycleRecovered: return "limit_cycle_recovered";
        case GameStatus::BudgetExhausted: return "budget_exhausted";
    }
    return "unknown";
}

struct RoundRecord {
    int round = 0;  // 1-based, global across reinitializations
    int reinit = 0;
    double j_attacker = 0.0; // J(a^k, d^{k-1}), after the attacker step
    double j_defender = 0.0; // J(a^k, d^k), after the defender step
    double joint = 0.0;      // J at the round's final pair
    double residual = 0.0;   // stationarity residual of the pair
};

struct GameResult {
    Trajectory attacker;
    SensorPlacement defender;
    std::vector<RoundRecord> trace;
    GameStatus status = GameStatus::BudgetExhausted;
    int rounds = 0;
    int reinits = 0;

    // strategies the returned reinitialization started from; used for the
    // initialization-vs-equilibrium payoff comparison
    Trajectory initial_attacker;
    SensorPlacement initial_defender;
    // J(a^1, d^0) of the returned reinitialization: what the random committed
    // placement detects once the attacker best-responds to it
    double first_response_payoff = 0.0;
};

} // namespace segame
