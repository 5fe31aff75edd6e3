#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "hemsim/plant.hpp"

namespace hemsim {

struct DeadbandConfig {
    double heat_setpoint_C = 22.0;  // T_des,h
    double cool_setpoint_C = 18.0;  // T_des,c
    double half_band_C = 1.0;
};

// Hysteresis thermostat. Switches only at the band edges; strictly inside the
// band the previous command is held.
inline int hvac_deadband(const DeadbandConfig& cfg, double indoor_C, double ambient_C,
                         double mode_threshold_C, int prev_command) {
    if (cfg.half_band_C <= 0.0) throw std::invalid_argument("deadband: half_band must be > 0");
    if (ambient_C > mode_threshold_C) {  // cooling
        if (indoor_C > cfg.cool_setpoint_C + cfg.half_band_C) return 1;
        if (indoor_C <= cfg.cool_setpoint_C - cfg.half_band_C) return 0;
        return prev_command;
    }
    // heating
    if (indoor_C < cfg.heat_setpoint_C - cfg.half_band_C) return 1;
    if (indoor_C >= cfg.heat_setpoint_C + cfg.half_band_C) return 0;
    return prev_command;
}

enum class StorageAction { Charge = -1, Idle = 0, Discharge = 1 };

// Rule-based stationary storage dispatch: charge from solar surplus while SOC
// is below 90%, discharge into a deficit while SOC is above 20%.
inline StorageAction storage_rule(double soc, double p_solar_W, double p_household_W) {
    if (p_solar_W > p_household_W && soc < 0.9) return StorageAction::Charge;
    if (p_solar_W < p_household_W && soc > 0.2) return StorageAction::Discharge;
    return StorageAction::Idle;
}

// A deferrable request as seen by a controller: all indices are absolute
// simulation steps.
struct Request {
    enum class Kind { Laundry, Dishwasher, Xev };
    Kind kind = Kind::Dishwasher;
    int enable_step = 0;
    int deadline_step = 0;       // last step on which the appliance may run
    int completion_steps = 0;    // C; for xEV recomputed from live SOC
};

inline const char* request_kind_name(Request::Kind k) {
    switch (k) {
        case Request::Kind::Laundry: return "laundry";
        case Request::Kind::Dishwasher: return "dishwasher";
        default: return "xev";
    }
}

// Immediate dispatch used by the baseline: every request activates at its
// enable step and runs its full duration contiguously.
struct DispatchedBlock {
    Request::Kind kind;
    int start_step = 0;
    int steps = 0;
};

inline std::vector<DispatchedBlock> immediate_dispatch(const std::vector<Request>& requests) {
    std::vector<DispatchedBlock> out;
    for (const auto& r : requests) {
        for (const auto& b : out) {
            if (b.kind == r.kind && r.enable_step < b.start_step + b.steps &&
                b.start_step < r.enable_step + r.completion_steps) {
                throw std::runtime_error(std::string("immediate_dispatch: overlapping request for ") +
                                         request_kind_name(r.kind) + " at step " +
                                         std::to_string(r.enable_step));
            }
        }
        out.push_back({r.kind, r.enable_step, r.completion_steps});
    }
    return out;
}

}  // namespace hemsim
