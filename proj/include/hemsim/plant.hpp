#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "hemsim/lookup.hpp"

namespace hemsim {

// ---------------------------------------------------------------------------
// Solar array
// ---------------------------------------------------------------------------

// Photovoltaic array: P = G(t) * A * eta(T_ambient, G). The efficiency map is
// a bundled 2-D lookup (ambient temperature x irradiance).
struct SolarArray {
    double panel_area_m2 = 0.0;
    Table2d efficiency;                 // rows: ambient C, cols: irradiance W/m2
    Table1d irradiance_trace;           // time s -> G W/m2

    double irradiance_at(double t_s) const { return std::max(0.0, irradiance_trace(t_s)); }
};

inline double solar_power_W(const SolarArray& array, double t_s, double ambient_C) {
    const double g = array.irradiance_at(t_s);
    if (g <= 0.0) return 0.0;
    const double eta = array.efficiency(ambient_C, g);
    return g * array.panel_area_m2 * eta;
}

// ---------------------------------------------------------------------------
// Battery pack (shared by stationary storage and xEV)
// ---------------------------------------------------------------------------

enum class TempSource { Ambient, Indoor, Fixed };

// 0th-order equivalent-circuit pack. Sign convention follows the household
// power balance: positive pack current discharges (SOC decreases), negative
// current charges. Bus power of a discharging pack is positive.
struct BatteryPack {
    int n_series = 1;
    int n_parallel = 1;
    double cell_capacity_Ah = 5.0;      // Q_cell
    double cell_v_nominal = 3.2;
    double cell_v_max = 3.65;           // CV hold voltage per cell
    Table2d ocv;                        // rows: SOC, cols: temperature C -> V
    Table2d resistance;                 // rows: SOC, cols: temperature C -> Ohm
    double round_trip_eff = 0.95;       // eta applied on both charge and discharge paths
    double soc = 0.2;
    TempSource temp_source = TempSource::Indoor;
    double fixed_temp_C = 25.0;
    double max_current_A = 0.0;         // pack-level bound, 2.5 * n_series by default

    double pack_capacity_Ah() const { return cell_capacity_Ah * n_parallel; }
    double nominal_voltage() const { return cell_v_nominal * n_series; }

    double temperature(double ambient_C, double indoor_C) const {
        switch (temp_source) {
            case TempSource::Ambient: return ambient_C;
            case TempSource::Indoor: return indoor_C;
            default: return fixed_temp_C;
        }
    }
};

// Cell counts to meet a desired pack capacity and voltage. Counts round up so
// the realized pack never under-delivers the requested capacity.
inline int pack_series_count(double pack_voltage_V, double cell_v_nominal) {
    return std::max(1, int(std::ceil(pack_voltage_V / cell_v_nominal - 1e-9)));
}
inline int pack_parallel_count(double pack_energy_Wh, double pack_voltage_V, double cell_capacity_Ah) {
    const double pack_ah = pack_energy_Wh / pack_voltage_V;
    return std::max(1, int(std::ceil(pack_ah / cell_capacity_Ah - 1e-9)));
}

struct TerminalState {
    double voltage_V = 0.0;  // pack terminal voltage
    double power_W = 0.0;    // at the household bus; >0 sourcing, <0 drawing
};

// Terminal voltage and bus power for a pack current at an explicit SOC. The
// round-trip efficiency is applied on the bus side: discharging delivers
// V*I*eta, charging draws V*I/eta.
inline TerminalState battery_terminal_at(const BatteryPack& pack, double soc, double pack_current_A,
                                         double temp_C) {
    const double i_cell = pack_current_A / pack.n_parallel;
    const double v_cell = pack.ocv(soc, temp_C) - pack.resistance(soc, temp_C) * i_cell;
    const double v = v_cell * pack.n_series;
    double p = 0.0;
    if (pack_current_A > 0.0)
        p = v * pack_current_A * pack.round_trip_eff;
    else if (pack_current_A < 0.0)
        p = v * pack_current_A / pack.round_trip_eff;
    return {v, p};
}

inline TerminalState battery_terminal(const BatteryPack& pack, double pack_current_A, double temp_C) {
    return battery_terminal_at(pack, pack.soc, pack_current_A, temp_C);
}

struct SocStep {
    double soc = 0.0;
    bool saturated = false;  // result left [0,1] and was clipped
};

inline SocStep battery_soc_step_at(const BatteryPack& pack, double soc, double pack_current_A,
                                   double dt_s) {
    if (dt_s <= 0.0) throw std::invalid_argument("battery_soc_step: dt must be > 0");
    const double i_cell = pack_current_A / pack.n_parallel;
    const double next = soc - i_cell * dt_s / (3600.0 * pack.cell_capacity_Ah);
    if (next < 0.0) return {0.0, true};
    if (next > 1.0) return {1.0, true};
    return {next, false};
}

inline SocStep battery_soc_step(const BatteryPack& pack, double pack_current_A, double dt_s) {
    return battery_soc_step_at(pack, pack.soc, pack_current_A, dt_s);
}

// Largest discharge (>0) and charge (<0) pack currents that keep SOC inside
// [soc_lo, soc_hi] over one step, additionally bounded by max_current_A.
struct CurrentBounds {
    double max_discharge_A = 0.0;
    double max_charge_A = 0.0;  // negative
};

inline CurrentBounds battery_current_bounds_at(const BatteryPack& pack, double soc, double soc_lo,
                                               double soc_hi, double dt_s) {
    const double ah_per_soc = pack.cell_capacity_Ah * pack.n_parallel * 3600.0 / dt_s;
    CurrentBounds b;
    b.max_discharge_A = std::max(0.0, (soc - soc_lo)) * ah_per_soc;
    b.max_charge_A = -std::max(0.0, (soc_hi - soc)) * ah_per_soc;
    if (pack.max_current_A > 0.0) {
        b.max_discharge_A = std::min(b.max_discharge_A, pack.max_current_A);
        b.max_charge_A = std::max(b.max_charge_A, -pack.max_current_A);
    }
    return b;
}

// Pack current that realizes a requested bus power (>0 discharge, <0 charge),
// from the quadratic terminal relation. Falls back to the peak-power current
// when the request exceeds what the pack can deliver.
inline double current_for_bus_power_at(const BatteryPack& pack, double soc, double bus_power_W,
                                       double temp_C) {
    if (bus_power_W == 0.0) return 0.0;
    const double ocv = pack.ocv(soc, temp_C) * pack.n_series;
    const double r = pack.resistance(soc, temp_C) * pack.n_series / pack.n_parallel;  // pack ohms
    const double eta = pack.round_trip_eff;
    if (bus_power_W > 0.0) {
        // (ocv - r I) I eta = P  ->  r I^2 - ocv I + P/eta = 0, smaller root
        const double disc = ocv * ocv - 4.0 * r * bus_power_W / eta;
        if (disc <= 0.0) return ocv / (2.0 * r);
        return (ocv - std::sqrt(disc)) / (2.0 * r);
    }
    // charging: (ocv - r I) I / eta = P with I < 0
    const double disc = ocv * ocv - 4.0 * r * bus_power_W * eta;
    return (ocv - std::sqrt(disc)) / (2.0 * r);
}

inline double current_for_bus_power(const BatteryPack& pack, double bus_power_W, double temp_C) {
    return current_for_bus_power_at(pack, pack.soc, bus_power_W, temp_C);
}

// ---------------------------------------------------------------------------
// HVAC
// ---------------------------------------------------------------------------

enum class HvacMode { Heat, Cool };

struct HvacUnit {
    double mass_flow_kg_s = 0.5;
    double supply_heat_C = 45.0;        // supply air temperature, heating
    double supply_cool_C = 12.0;        // supply air temperature, cooling
    double cp_air = 1005.0;             // J/(kg K)
    Table1d cop;                        // deltaT C -> COP
    double shr = 0.8;
    double pressure_drop_Pa = 250.0;
    double fan_eff = 0.7;
    double air_density = 1.2;           // kg/m3
    double mode_threshold_C = 20.0;     // T_ref

    HvacMode mode_for(double ambient_C) const {
        return ambient_C <= mode_threshold_C ? HvacMode::Heat : HvacMode::Cool;
    }
    double supply_temp(HvacMode m) const {
        return m == HvacMode::Heat ? supply_heat_C : supply_cool_C;
    }
    double fan_power_W() const {
        return mass_flow_kg_s * pressure_drop_Pa / (fan_eff * air_density);
    }
};

struct HvacOutput {
    double electrical_W = 0.0;
    double thermal_supply_W = 0.0;  // heat rate into the house air, signed
    HvacMode mode = HvacMode::Heat;
};

// Electrical power for a fan command in {0, 0.5, 1}. Heating admits on/off
// only. The conditioning power uses the ambient-to-supply temperature lift;
// the thermal term delivered to the room uses the supply-to-indoor difference.
inline HvacOutput hvac_power(const HvacUnit& unit, double command, double ambient_C, double indoor_C) {
    if (command != 0.0 && command != 0.5 && command != 1.0)
        throw std::invalid_argument("hvac_power: command must be 0, 0.5 or 1");
    HvacOutput out;
    out.mode = unit.mode_for(ambient_C);
    if (out.mode == HvacMode::Heat && command == 0.5)
        throw std::invalid_argument("hvac_power: heating fan command can only be on or off");
    if (command == 0.0) return out;

    const double supply = unit.supply_temp(out.mode);
    const double lift = out.mode == HvacMode::Heat ? supply - ambient_C : ambient_C - supply;
    const double dt = std::max(0.0, lift);
    const double cop = unit.cop(dt);
    double p = unit.mass_flow_kg_s * command * unit.cp_air * dt / cop;
    if (out.mode == HvacMode::Cool) p /= unit.shr;
    out.electrical_W = p + command * unit.fan_power_W();
    out.thermal_supply_W = command * unit.mass_flow_kg_s * unit.cp_air * (supply - indoor_C);
    return out;
}

// ---------------------------------------------------------------------------
// House thermal state
// ---------------------------------------------------------------------------

struct ThermalHouse {
    double air_mass_kg = 3000.0;        // effective mass (air + light structure)
    double cv_air = 718.0;              // J/(kg K)
    double thermal_resistance_K_W = 0.004;  // R_tot
    double indoor_temp_C = 21.0;

    double heat_capacity() const { return air_mass_kg * cv_air; }
};

// One discretization step of the first-order room ODE
//   C dT/dt = pi * mdot * cp * (T_supply - T) - (T - T_ambient) / R
// advanced by the closed-form exponential, exact for inputs held over dt.
inline double thermal_step(const ThermalHouse& house, const HvacUnit& unit, double command,
                           double ambient_C, double dt_s) {
    if (dt_s <= 0.0) throw std::invalid_argument("thermal_step: dt must be > 0");
    const double supply = unit.supply_temp(unit.mode_for(ambient_C));
    const double flow = command * unit.mass_flow_kg_s * unit.cp_air;  // W/K
    const double leak = 1.0 / house.thermal_resistance_K_W;           // W/K
    const double cap = house.heat_capacity();
    const double b = (flow + leak) / cap;
    const double t_eq = (flow * supply + leak * ambient_C) / (flow + leak);
    return t_eq + (house.indoor_temp_C - t_eq) * std::exp(-b * dt_s);
}

// ---------------------------------------------------------------------------
// xEV charging
// ---------------------------------------------------------------------------

constexpr double kLevel2ChargerW = 7560.0;

struct ChargeStep {
    double soc = 0.0;
    double drawn_W = 0.0;        // bus-side draw, <= charger limit
    double pack_current_A = 0.0; // negative while charging
    bool cv_phase = false;
};

// One CC-CV charging step at an explicit SOC. CC current is bounded by the
// pack current limit and by the charger power at the prevailing terminal
// voltage; the CV phase holds the per-cell voltage at cell_v_max, tapering
// current as SOC rises.
inline ChargeStep xev_charge_step_at(const BatteryPack& pack, double soc, double charger_limit_W,
                                     double dt_s, double temp_C, double target_soc = 0.8) {
    ChargeStep out;
    out.soc = soc;
    if (soc >= target_soc - 1e-12) return out;

    const double ocv_c = pack.ocv(soc, temp_C);
    const double r_c = pack.resistance(soc, temp_C);
    const double eta = pack.round_trip_eff;

    // charger power bound: n_s (ocv + r |i|/n_p) |i| / eta <= limit
    const double a = r_c / pack.n_parallel;
    const double disc = ocv_c * ocv_c + 4.0 * a * charger_limit_W * eta / pack.n_series;
    double i_mag = (-ocv_c + std::sqrt(disc)) / (2.0 * a);
    if (pack.max_current_A > 0.0) i_mag = std::min(i_mag, pack.max_current_A);

    // CV hold: cell voltage capped at cell_v_max
    const double i_cv = (pack.cell_v_max - ocv_c) / r_c * pack.n_parallel;
    if (i_cv < i_mag) {
        i_mag = std::max(0.0, i_cv);
        out.cv_phase = true;
    }

    // do not overshoot the target within the step
    const double ah_needed = (target_soc - soc) * pack.cell_capacity_Ah * pack.n_parallel;
    i_mag = std::min(i_mag, ah_needed * 3600.0 / dt_s);

    const double i = -i_mag;
    const auto term = battery_terminal_at(pack, soc, i, temp_C);
    out.soc = battery_soc_step_at(pack, soc, i, dt_s).soc;
    out.drawn_W = -term.power_W;
    out.pack_current_A = i;
    return out;
}

inline ChargeStep xev_charge_step(BatteryPack& pack, double charger_limit_W, double dt_s,
                                  double temp_C, double target_soc = 0.8) {
    const auto out = xev_charge_step_at(pack, pack.soc, charger_limit_W, dt_s, temp_C, target_soc);
    pack.soc = out.soc;
    return out;
}

// Steps a CC-CV charge from `soc` to the target needs; the counterfactual
// span of an immediate dispatch, used by the deferred-power metric.
inline int xev_immediate_steps(const BatteryPack& pack, double soc, double charger_limit_W,
                               double dt_s, double temp_C, double target_soc = 0.8) {
    int n = 0;
    while (soc < target_soc - 1e-12) {
        const auto cs = xev_charge_step_at(pack, soc, charger_limit_W, dt_s, temp_C, target_soc);
        if (cs.soc <= soc + 1e-15) break;  // cannot make progress
        soc = cs.soc;
        ++n;
        if (n > 100000) break;
    }
    return n;
}

// ---------------------------------------------------------------------------
// Power balance
// ---------------------------------------------------------------------------

struct PowerSnapshot {
    double grid_W = 0.0;
    double solar_W = 0.0;          // generation actually used at the bus
    double storage_W = 0.0;        // P_ES, positive = discharging
    double hvac_W = 0.0;
    double xev_W = 0.0;
    double deferrable_W = 0.0;     // P_D + P_L (dishwasher + laundry)
    double non_deferrable_W = 0.0; // P_ND

    double balance_residual() const {
        return grid_W + solar_W + storage_W - hvac_W - xev_W - deferrable_W - non_deferrable_W;
    }
    double magnitude_sum() const {
        return std::abs(grid_W) + std::abs(solar_W) + std::abs(storage_W) + std::abs(hvac_W) +
               std::abs(xev_W) + std::abs(deferrable_W) + std::abs(non_deferrable_W);
    }
};

struct KnownLoads {
    double hvac_W = 0.0;
    double xev_W = 0.0;
    double deferrable_W = 0.0;
    double non_deferrable_W = 0.0;
};

struct KnownSources {
    double solar_W = 0.0;
    double storage_W = 0.0;  // signed, positive = discharging
};

// Closes the household balance by computing the grid term as residual.
inline PowerSnapshot balance_close(const KnownLoads& loads, const KnownSources& sources) {
    PowerSnapshot s;
    s.solar_W = sources.solar_W;
    s.storage_W = sources.storage_W;
    s.hvac_W = loads.hvac_W;
    s.xev_W = loads.xev_W;
    s.deferrable_W = loads.deferrable_W;
    s.non_deferrable_W = loads.non_deferrable_W;
    s.grid_W = loads.hvac_W + loads.xev_W + loads.deferrable_W + loads.non_deferrable_W -
               sources.solar_W - sources.storage_W;
    return s;
}

}  // namespace hemsim
