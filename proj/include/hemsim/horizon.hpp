#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hemsim/baseline.hpp"
#include "hemsim/plant.hpp"
#include "hemsim/scenario.hpp"

namespace hemsim {

struct OptimizerConfig {
    double horizon_hours = 8.0;
    double p_cap_W = 14000.0;
    double deferral_weight = 6e-7;   // c_d, $ per appliance-step of delay
    double comfort_weight0 = 0.02;   // c_t0, $ per C^2-step at reference conditions
    double comfort_t_norm_C = 10.0;  // ambient stress normalization for c_t,k
    double band_C = 1.0;             // comfort band half width around T_set
    double soc_lo = 0.2;
    double soc_hi = 0.8;
    double t_ref_C = 20.0;           // heating/cooling threshold and setpoint switch
    double heat_set_C = 22.0;
    double cool_set_C = 18.0;
    double band_penalty = 1e3;       // $ per C^2-step outside the band
    int max_tabu_passes = 3;
};

// Horizon shrinking near the end of the simulation: the remaining wall time
// replaces the nominal horizon once the nominal horizon would overrun.
inline double shrink_horizon(double clock_s, double t_h_s, double t_end_s) {
    if (t_end_s < clock_s) throw std::invalid_argument("shrink_horizon: clock past end");
    if (clock_s + t_h_s > t_end_s) return t_end_s - clock_s;
    return t_h_s;
}

// Linear delay accounting: each activation step is compared against the slot
// it would occupy under immediate dispatch, so a contiguous block started d
// steps late costs d * C delay units.
inline double deferral_delay_steps(int enable_step, std::vector<int> activation_steps) {
    std::sort(activation_steps.begin(), activation_steps.end());
    double delay = 0.0;
    for (size_t i = 0; i < activation_steps.size(); ++i) {
        const int ideal = enable_step + int(i);
        if (activation_steps[i] < enable_step)
            throw std::logic_error("deferral: activation before enable");
        delay += activation_steps[i] - ideal;
    }
    return delay;
}

inline double deferral_cost(double c_d, int enable_step, const std::vector<int>& activation_steps) {
    return c_d * deferral_delay_steps(enable_step, activation_steps);
}

// No-export dispatch of one step: solar first serves the loads (plus any
// storage charging draw), storage discharge covers what solar could not, and
// the grid takes the rest. Surplus generation is curtailed.
struct DispatchResult {
    double grid_W = 0.0;
    double solar_used_W = 0.0;
    double curtailed_W = 0.0;
    double es_bus_W = 0.0;  // realized, after the no-export clamp
};

inline DispatchResult dispatch_step(double loads_W, double solar_potential_W, double desired_es_bus_W) {
    DispatchResult r;
    if (desired_es_bus_W < 0.0) {  // charging
        const double draw = -desired_es_bus_W;
        r.solar_used_W = std::min(solar_potential_W, loads_W + draw);
        r.es_bus_W = desired_es_bus_W;
        r.grid_W = loads_W + draw - r.solar_used_W;
    } else {
        r.solar_used_W = std::min(solar_potential_W, loads_W);
        const double remaining = loads_W - r.solar_used_W;
        r.es_bus_W = std::min(desired_es_bus_W, remaining);
        r.grid_W = remaining - r.es_bus_W;
    }
    r.curtailed_W = solar_potential_W - r.solar_used_W;
    return r;
}

// ---------------------------------------------------------------------------
// One receding-horizon problem instance
// ---------------------------------------------------------------------------

struct PendingBlock {
    bool present = false;
    Request::Kind kind = Request::Kind::Dishwasher;
    int enable = 0;    // relative step indices within the horizon
    int deadline = 0;  // last step the appliance may run
    int completion = 0;
};

struct PendingEv {
    bool present = false;
    int enable = 0;
    int deadline = 0;
    int completion = 0;  // steps of charging still required (from live SOC)
    double target_soc = 0.8;
};

struct TabuSet {
    std::vector<uint8_t> hvac, xev, laundry, dishwasher;

    void resize(int n) {
        hvac.assign(size_t(n), 0);
        xev.assign(size_t(n), 0);
        laundry.assign(size_t(n), 0);
        dishwasher.assign(size_t(n), 0);
    }
    bool empty_for(Request::Kind k) const {
        const auto& v = k == Request::Kind::Laundry ? laundry : dishwasher;
        return std::none_of(v.begin(), v.end(), [](uint8_t b) { return b != 0; });
    }
};

// Everything one MPC step needs: frozen disturbances, tariff, weights,
// limits, plant snapshots and the pending requests, all on a shared clock of
// n_steps slots of dt seconds.
struct HorizonProblem {
    int n_steps = 48;
    double dt_s = 600.0;

    // zero-order-hold external inputs
    double ambient_C = 20.0;
    double nd_W = 0.0;
    double solar_W = 0.0;

    std::vector<double> price;  // $/kWh per step (tariff is known, not held)
    std::vector<double> c_t;    // comfort weight per step
    double c_d = 6e-7;

    double t_set_C = 22.0;
    double band_C = 1.0;
    double band_penalty = 1e3;
    double soc_lo = 0.2;
    double soc_hi = 0.8;
    double p_cap_W = 14000.0;

    HvacUnit hvac;
    ThermalHouse house;          // indoor_temp_C = state at the horizon start
    BatteryPack es;              // soc = state at the horizon start
    BatteryPack ev;
    double es_temp_C = 21.0;
    double ev_temp_C = 21.0;
    std::vector<double> hvac_levels;  // admissible fan commands for the mode

    std::vector<double> committed_defer_W;  // in-progress non-interruptible blocks

    PendingBlock laundry, dishwasher;
    PendingEv ev_req;

    TabuSet tabu;

    HvacMode mode() const { return hvac.mode_for(ambient_C); }

    void finalize() {
        if (n_steps < 0) throw std::invalid_argument("horizon: negative step count");
        if (int(price.size()) != n_steps || int(c_t.size()) != n_steps)
            throw std::invalid_argument("horizon: price/c_t length mismatch");
        if (committed_defer_W.empty()) committed_defer_W.assign(size_t(n_steps), 0.0);
        if (tabu.hvac.empty()) tabu.resize(n_steps);
        hvac_levels = mode() == HvacMode::Heat ? std::vector<double>{0.0, 1.0}
                                               : std::vector<double>{0.0, 0.5, 1.0};
    }
};

// Precomputed per-level HVAC response under the frozen ambient: electrical
// draw plus the exact one-step exponential update of the room temperature.
struct HvacStepModel {
    struct Level {
        double command = 0.0;
        double electrical_W = 0.0;
        double decay = 1.0;  // exp(-b dt)
        double t_eq = 0.0;
    };
    std::vector<Level> levels;

    HvacStepModel() = default;
    HvacStepModel(const HorizonProblem& p) {
        const double leak = 1.0 / p.house.thermal_resistance_K_W;
        const double cap = p.house.heat_capacity();
        const double supply = p.hvac.supply_temp(p.mode());
        for (double cmd : p.hvac_levels) {
            Level l;
            l.command = cmd;
            l.electrical_W = hvac_power(p.hvac, cmd, p.ambient_C, p.t_set_C).electrical_W;
            const double flow = cmd * p.hvac.mass_flow_kg_s * p.hvac.cp_air;
            const double b = (flow + leak) / cap;
            l.decay = std::exp(-b * p.dt_s);
            l.t_eq = (flow * supply + leak * p.ambient_C) / (flow + leak);
            levels.push_back(l);
        }
    }

    double step_temp(int level, double t_a) const {
        const auto& l = levels[size_t(level)];
        return l.t_eq + (t_a - l.t_eq) * l.decay;
    }
};

// One ES planning step: clamp the commanded pack current so the SOC stays
// inside the controller window, dispatch against the loads with the no-export
// rule, re-derive the realized current if the dispatch clamped the bus power,
// and advance the SOC.
struct EsStep {
    double bus_W = 0.0;
    double current_A = 0.0;
};

inline EsStep es_plan_step(const HorizonProblem& p, const BatteryPack& pack, double& soc,
                           double commanded_A, double realized_bus_W, double desired_bus_W) {
    EsStep out;
    out.bus_W = realized_bus_W;
    if (realized_bus_W == desired_bus_W) {
        out.current_A = commanded_A;
    } else {
        out.current_A = current_for_bus_power_at(pack, soc, realized_bus_W, p.es_temp_C);
    }
    soc = battery_soc_step_at(pack, soc, out.current_A, p.dt_s).soc;
    return out;
}

inline double es_desired_bus_W(const HorizonProblem& p, const BatteryPack& pack, double soc,
                               double& commanded_A) {
    const auto bounds = battery_current_bounds_at(pack, soc, p.soc_lo, p.soc_hi, p.dt_s);
    commanded_A = std::clamp(commanded_A, bounds.max_charge_A, bounds.max_discharge_A);
    return battery_terminal_at(pack, soc, commanded_A, p.es_temp_C).power_W;
}

// Per-step record of the horizon simulation, reused by the plan assembly and
// the capping check.
struct HorizonSeries {
    std::vector<double> hvac_W, xev_W, defer_W, es_bus_W, es_I_A, grid_W, solar_used_W;
    std::vector<double> t_a_C, soc_es, soc_ev;

    void resize(int n) {
        for (auto* v : {&hvac_W, &xev_W, &defer_W, &es_bus_W, &es_I_A, &grid_W, &solar_used_W,
                        &t_a_C, &soc_es, &soc_ev})
            v->assign(size_t(n), 0.0);
    }
};

struct SubCost {
    double objective = 0.0;      // cost actually minimized, penalties included
    double money = 0.0;          // $ part
    double band_violation = 0.0; // sum of squared band exceedances, C^2-steps
};

// --- sub-problem 1: HVAC + ES -----------------------------------------------
// Grid-cost + comfort objective over the horizon; other appliance loads are
// not modeled here. u_hvac holds level indices into problem.hvac_levels.
inline SubCost eval_hvac_es(const HorizonProblem& p, const HvacStepModel& m,
                            std::span<const int> u_hvac_level, std::span<const double> u_es_A,
                            HorizonSeries* series = nullptr) {
    SubCost out;
    double t_a = p.house.indoor_temp_C;
    double soc = p.es.soc;
    const double kwh = p.dt_s / 3.6e6;
    for (int k = 0; k < p.n_steps; ++k) {
        const int lvl = u_hvac_level[size_t(k)];
        const double p_hvac = m.levels[size_t(lvl)].electrical_W;
        t_a = m.step_temp(lvl, t_a);

        double cmd_a = u_es_A[size_t(k)];
        const double desired = es_desired_bus_W(p, p.es, soc, cmd_a);
        const auto d = dispatch_step(p_hvac + p.nd_W, p.solar_W, desired);
        const auto es = es_plan_step(p, p.es, soc, cmd_a, d.es_bus_W, desired);

        out.money += p.price[size_t(k)] * d.grid_W * kwh;
        const double dev = t_a - p.t_set_C;
        out.money += p.c_t[size_t(k)] * dev * dev;
        const double over = std::max(0.0, std::abs(dev) - p.band_C);
        out.band_violation += over * over;

        if (series) {
            series->hvac_W[size_t(k)] = p_hvac;
            series->es_bus_W[size_t(k)] = es.bus_W;
            series->es_I_A[size_t(k)] = es.current_A;
            series->grid_W[size_t(k)] = d.grid_W;
            series->solar_used_W[size_t(k)] = d.solar_used_W;
            series->t_a_C[size_t(k)] = t_a;
            series->soc_es[size_t(k)] = soc;
        }
    }
    out.objective = out.money + p.band_penalty * out.band_violation;
    return out;
}

// --- sub-problem 2: xEV + ES -------------------------------------------------
// HVAC power is a fixed external input; the EV charges CC-CV on its active
// steps. Objective is grid cost plus the deferral penalty.
inline SubCost eval_xev_es(const HorizonProblem& p, std::span<const double> hvac_W_fixed,
                           std::span<const uint8_t> u_xev, std::span<const double> u_es_A,
                           HorizonSeries* series = nullptr) {
    SubCost out;
    double soc = p.es.soc;
    double soc_ev = p.ev.soc;
    const double kwh = p.dt_s / 3.6e6;
    std::vector<int> activations;
    for (int k = 0; k < p.n_steps; ++k) {
        double p_xev = 0.0;
        if (u_xev[size_t(k)] && soc_ev < p.ev_req.target_soc - 1e-12) {
            const auto cs = xev_charge_step_at(p.ev, soc_ev, kLevel2ChargerW, p.dt_s, p.ev_temp_C,
                                               p.ev_req.target_soc);
            p_xev = cs.drawn_W;
            soc_ev = cs.soc;
            activations.push_back(k);
        }
        const double loads = hvac_W_fixed[size_t(k)] + p.nd_W + p_xev;
        double cmd_a = u_es_A[size_t(k)];
        const double desired = es_desired_bus_W(p, p.es, soc, cmd_a);
        const auto d = dispatch_step(loads, p.solar_W, desired);
        const auto es = es_plan_step(p, p.es, soc, cmd_a, d.es_bus_W, desired);

        out.money += p.price[size_t(k)] * d.grid_W * kwh;
        if (series) {
            series->hvac_W[size_t(k)] = hvac_W_fixed[size_t(k)];
            series->xev_W[size_t(k)] = p_xev;
            series->es_bus_W[size_t(k)] = es.bus_W;
            series->es_I_A[size_t(k)] = es.current_A;
            series->grid_W[size_t(k)] = d.grid_W;
            series->solar_used_W[size_t(k)] = d.solar_used_W;
            series->soc_es[size_t(k)] = soc;
            series->soc_ev[size_t(k)] = soc_ev;
        }
    }
    if (p.ev_req.present && !activations.empty())
        out.money += deferral_cost(p.c_d, p.ev_req.enable, activations);
    out.objective = out.money;
    return out;
}

// --- sub-problem 3: laundry / dishwasher + ES ---------------------------------
// HVAC and EV power fixed; start-time-encoded blocks for the two
// non-interruptible appliances. k_l / k_d are -1 when not pending.
inline SubCost eval_appliances_es(const HorizonProblem& p, std::span<const double> hvac_W_fixed,
                                  std::span<const double> xev_W_fixed, int k_l, int k_d,
                                  std::span<const double> u_es_A, HorizonSeries* series = nullptr) {
    SubCost out;
    double soc = p.es.soc;
    const double kwh = p.dt_s / 3.6e6;
    for (int k = 0; k < p.n_steps; ++k) {
        double p_defer = p.committed_defer_W[size_t(k)];
        if (k_l >= 0 && k >= k_l && k < k_l + p.laundry.completion)
            p_defer += appliance_block_power(Request::Kind::Laundry, k - k_l, p.dt_s);
        if (k_d >= 0 && k >= k_d && k < k_d + p.dishwasher.completion)
            p_defer += appliance_block_power(Request::Kind::Dishwasher, k - k_d, p.dt_s);

        const double loads = hvac_W_fixed[size_t(k)] + xev_W_fixed[size_t(k)] + p.nd_W + p_defer;
        double cmd_a = u_es_A[size_t(k)];
        const double desired = es_desired_bus_W(p, p.es, soc, cmd_a);
        const auto d = dispatch_step(loads, p.solar_W, desired);
        const auto es = es_plan_step(p, p.es, soc, cmd_a, d.es_bus_W, desired);

        out.money += p.price[size_t(k)] * d.grid_W * kwh;
        if (series) {
            series->hvac_W[size_t(k)] = hvac_W_fixed[size_t(k)];
            series->xev_W[size_t(k)] = xev_W_fixed[size_t(k)];
            series->defer_W[size_t(k)] = p_defer;
            series->es_bus_W[size_t(k)] = es.bus_W;
            series->es_I_A[size_t(k)] = es.current_A;
            series->grid_W[size_t(k)] = d.grid_W;
            series->solar_used_W[size_t(k)] = d.solar_used_W;
            series->soc_es[size_t(k)] = soc;
        }
    }
    if (k_l >= 0) out.money += p.c_d * p.laundry.completion * (k_l - p.laundry.enable);
    if (k_d >= 0) out.money += p.c_d * p.dishwasher.completion * (k_d - p.dishwasher.enable);
    out.objective = out.money;
    return out;
}

}  // namespace hemsim
