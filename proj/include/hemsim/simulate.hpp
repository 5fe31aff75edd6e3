#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "hemsim/ledger.hpp"
#include "hemsim/optimizer.hpp"

namespace hemsim {

enum class ControllerKind { Baseline, Hem };

inline const char* controller_name(ControllerKind c) {
    return c == ControllerKind::Baseline ? "baseline" : "hem";
}

namespace detail {

inline RequestLogEntry make_appliance_log(const Request& r, double dt_s) {
    RequestLogEntry e;
    e.kind = request_kind_name(r.kind);
    e.enable_step = r.enable_step;
    e.immediate_steps = r.completion_steps;
    e.planned_Wh = appliance_block_energy_Wh(r.kind, r.completion_steps, dt_s);
    return e;
}

}  // namespace detail

// Runs one scenario under one controller and returns the full time series.
// The loop is deterministic: all randomness comes from the scenario streams
// and the per-step GA seeds derived from the scenario seed.
inline RunLedger run_simulation(const Scenario& sc, ControllerKind kind) {
    const int n = sc.n_steps();
    const auto& requests = sc.activities.appliance_requests;

    RunLedger led;
    led.meta.controller = controller_name(kind);
    led.meta.case_id = sc.case_study.id;
    led.meta.seed = sc.seed;
    led.meta.days = sc.days;
    led.meta.start_day = sc.start_day;
    led.meta.start_weekday = sc.start_weekday;
    led.meta.dt_s = sc.dt_s;
    led.meta.area_ft2 = sc.area_ft2;
    led.meta.location = location_name(sc.case_study.location);
    led.meta.es_kwh = sc.case_study.es_kwh;
    led.meta.ev_kwh = sc.case_study.xev_kwh;
    led.meta.es_temp_controlled = sc.case_study.es_temp_controlled;
    led.meta.es_n_series = sc.es_pack.n_series;
    led.meta.es_n_parallel = sc.es_pack.n_parallel;
    led.meta.ev_n_series = sc.ev_pack.n_series;
    led.meta.ev_n_parallel = sc.ev_pack.n_parallel;
    led.meta.fingerprint = sc.fingerprint;
    led.rows.reserve(size_t(n));

    // appliance request log entries exist up front; activation fills in later
    std::vector<int> request_log_idx(requests.size(), -1);
    for (size_t i = 0; i < requests.size(); ++i) {
        request_log_idx[i] = int(led.requests.size());
        led.requests.push_back(detail::make_appliance_log(requests[i], sc.dt_s));
    }
    std::vector<int> ev_log_idx(sc.ev_events.size(), -1);

    SimState st;
    st.t_a_C = sc.house.indoor_temp_C;
    st.soc_es = sc.es_pack.soc;
    st.soc_ev = 0.8;
    st.request_started.assign(requests.size(), 0);

    const double charger_W = kLevel2ChargerW;

    for (int k = 0; k < n; ++k) {
        const double t = k * sc.dt_s;
        const double t_abs = sc.abs_time(k);
        const double ambient = sc.weather.ambient_C(t_abs);
        const double t_set = ambient <= sc.opt.t_ref_C ? sc.opt.heat_set_C : sc.opt.cool_set_C;
        const double solar_pot = solar_power_W(sc.solar, t_abs, ambient);
        const double nd = sc.activities.nd_power_W[size_t(k)];

        // vehicle arrivals and departures
        if (st.ev_event_idx >= 0 && k >= sc.ev_events[size_t(st.ev_event_idx)].depart_step)
            st.ev_event_idx = -1;
        if (st.ev_event_idx < 0) {
            for (size_t i = 0; i < sc.ev_events.size(); ++i) {
                const auto& e = sc.ev_events[i];
                if (e.plug_step == k) {
                    st.ev_event_idx = int(i);
                    st.soc_ev = e.initial_soc;
                    RequestLogEntry q;
                    q.kind = "xev";
                    q.enable_step = e.plug_step;
                    q.immediate_steps = xev_immediate_steps(sc.ev_pack, e.initial_soc, charger_W,
                                                            sc.dt_s, sc.ev_pack.fixed_temp_C,
                                                            e.target_soc);
                    const double cap_wh = sc.ev_pack.nominal_voltage() * sc.ev_pack.pack_capacity_Ah();
                    q.planned_Wh = (e.target_soc - e.initial_soc) * cap_wh / sc.ev_pack.round_trip_eff;
                    ev_log_idx[i] = int(led.requests.size());
                    led.requests.push_back(q);
                    break;
                }
            }
        }

        // ------------------------- controller -------------------------
        StepCommands cmd;
        MpcTelemetry tel;
        if (kind == ControllerKind::Hem) {
            cmd = mpc_step(st, k, sc, tel);
        } else {
            const int on = hvac_deadband(sc.deadband, st.t_a_C, ambient, sc.hvac.mode_threshold_C,
                                         st.prev_hvac_on);
            st.prev_hvac_on = on;
            cmd.hvac = double(on);
            cmd.ev_on = st.ev_event_idx >= 0;  // charge as soon as plugged
            for (size_t i = 0; i < requests.size(); ++i)
                if (!st.request_started[i] && requests[i].enable_step == k) {
                    if (requests[i].kind == Request::Kind::Laundry) cmd.start_laundry = true;
                    else cmd.start_dishwasher = true;
                }
        }

        // commit non-interruptible block starts
        auto commit = [&](ActiveBlock& block, Request::Kind want) {
            for (size_t i = 0; i < requests.size(); ++i) {
                const auto& r = requests[i];
                if (st.request_started[i] || r.kind != want || r.enable_step > k) continue;
                block = {true, k, int(i)};
                st.request_started[i] = 1;
                led.requests[size_t(request_log_idx[i])].activation_step = k;
                return;
            }
        };
        if (cmd.start_laundry && !st.laundry.active) commit(st.laundry, Request::Kind::Laundry);
        if (cmd.start_dishwasher && !st.dishwasher.active) commit(st.dishwasher, Request::Kind::Dishwasher);

        // ------------------------- plant step -------------------------
        const auto hvac_out = hvac_power(sc.hvac, cmd.hvac, ambient, st.t_a_C);
        ThermalHouse house = sc.house;
        house.indoor_temp_C = st.t_a_C;
        const double t_a_next = thermal_step(house, sc.hvac, cmd.hvac, ambient, sc.dt_s);

        double xev_W = 0.0;
        if (cmd.ev_on && st.ev_event_idx >= 0) {
            const auto& e = sc.ev_events[size_t(st.ev_event_idx)];
            if (st.soc_ev < e.target_soc - 1e-12) {
                const auto cs = xev_charge_step_at(sc.ev_pack, st.soc_ev, charger_W, sc.dt_s,
                                                   sc.ev_pack.fixed_temp_C, e.target_soc);
                xev_W = cs.drawn_W;
                st.soc_ev = cs.soc;
                auto& q = led.requests[size_t(ev_log_idx[size_t(st.ev_event_idx)])];
                if (q.activation_step < 0) q.activation_step = k;
                q.completion_step = k;
                q.served_Wh += xev_W * sc.dt_s / 3600.0;
            }
        }

        double defer_W = 0.0;
        int cmd_l = 0, cmd_d = 0;
        auto advance_block = [&](ActiveBlock& block, Request::Kind bkind, int& cmd_flag) {
            if (!block.active) return;
            const int comp = requests[size_t(block.request_idx)].completion_steps;
            const int idx = k - block.start_step;
            if (idx >= comp) {
                block.active = false;
                return;
            }
            cmd_flag = 1;
            const double w = appliance_block_power(bkind, idx, sc.dt_s);
            defer_W += w;
            auto& q = led.requests[size_t(request_log_idx[size_t(block.request_idx)])];
            q.completion_step = k;
            q.served_Wh += w * sc.dt_s / 3600.0;
            if (idx == comp - 1) block.active = false;
        };
        advance_block(st.laundry, Request::Kind::Laundry, cmd_l);
        advance_block(st.dishwasher, Request::Kind::Dishwasher, cmd_d);

        const double loads_total = hvac_out.electrical_W + xev_W + defer_W + nd;

        // ------------------------- storage dispatch -------------------------
        const double es_temp = sc.es_pack.temperature(ambient, st.t_a_C);
        double desired_bus = 0.0;
        double commanded_A = 0.0;
        double soc_lo, soc_hi;
        if (kind == ControllerKind::Baseline) {
            soc_lo = sc.baseline_soc_lo;
            soc_hi = sc.baseline_soc_hi;
            const auto action = storage_rule(st.soc_es, solar_pot, loads_total);
            double wanted_bus = 0.0;
            if (action == StorageAction::Charge) wanted_bus = -(solar_pot - loads_total);
            else if (action == StorageAction::Discharge) wanted_bus = loads_total - solar_pot;
            commanded_A = current_for_bus_power_at(sc.es_pack, st.soc_es, wanted_bus, es_temp);
        } else {
            soc_lo = sc.opt.soc_lo;
            soc_hi = sc.opt.soc_hi;
            commanded_A = cmd.es_current_A;
        }
        const auto bounds = battery_current_bounds_at(sc.es_pack, st.soc_es, soc_lo, soc_hi, sc.dt_s);
        commanded_A = std::clamp(commanded_A, bounds.max_charge_A, bounds.max_discharge_A);
        desired_bus = battery_terminal_at(sc.es_pack, st.soc_es, commanded_A, es_temp).power_W;

        const auto d = dispatch_step(loads_total, solar_pot, desired_bus);
        double es_I = commanded_A;
        if (d.es_bus_W != desired_bus)
            es_I = current_for_bus_power_at(sc.es_pack, st.soc_es, d.es_bus_W, es_temp);
        st.soc_es = battery_soc_step_at(sc.es_pack, st.soc_es, es_I, sc.dt_s).soc;

        const auto snap = balance_close(
            {hvac_out.electrical_W, xev_W, defer_W, nd}, {d.solar_used_W, d.es_bus_W});
        if (std::abs(snap.balance_residual()) > 1e-6 * std::max(1.0, snap.magnitude_sum()))
            throw std::logic_error("simulate: power balance violated at step " + std::to_string(k));

        // ------------------------- record -------------------------
        LedgerRow row;
        row.step = k;
        row.t_s = t;
        row.price = price(sc.tou, t);
        row.ambient_C = ambient;
        row.t_a_C = t_a_next;
        row.t_set_C = t_set;
        row.grid_W = snap.grid_W;
        row.solar_potential_W = solar_pot;
        row.solar_used_W = d.solar_used_W;
        row.solar_to_load_W = std::min(d.solar_used_W, loads_total);
        row.solar_to_es_W = d.solar_used_W - row.solar_to_load_W;
        row.curtailed_W = d.curtailed_W;
        row.es_bus_W = d.es_bus_W;
        row.es_I_A = es_I;
        row.soc_es = st.soc_es;
        row.hvac_W = hvac_out.electrical_W;
        row.cmd_hvac = cmd.hvac;
        row.xev_W = xev_W;
        row.cmd_xev = xev_W > 0.0 ? 1 : 0;
        row.soc_xev = st.soc_ev;
        row.defer_W = defer_W;
        row.cmd_laundry = cmd_l;
        row.cmd_dishwasher = cmd_d;
        row.nd_W = nd;
        row.ga_gens_hvac = tel.ga_generations[0];
        row.ga_gens_xev = tel.ga_generations[1];
        row.ga_gens_app = tel.ga_generations[2];
        row.tabu_passes = tel.tabu_passes;
        row.mpc_wall_ms = tel.wall_s * 1e3;
        row.flag_band_violation = std::abs(t_a_next - t_set) > sc.opt.band_C + 1e-9 ? 1 : 0;
        row.flag_cap_exceeded = snap.grid_W > sc.opt.p_cap_W + 1e-6 ? 1 : 0;
        row.flag_least_violation = tel.band_least_violation ? 1 : 0;
        row.flag_infeasible = tel.infeasible_request || tel.cap_unsatisfied ? 1 : 0;
        led.rows.push_back(row);

        st.t_a_C = t_a_next;
    }

    led.integrity_check();
    return led;
}

}  // namespace hemsim
