#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hemsim {

// One simulation step of a run. Every metric is computable from these rows
// plus the request log, so persisted ledgers replay exactly.
struct LedgerRow {
    int step = 0;
    double t_s = 0.0;        // simulation-relative
    double price = 0.0;      // $/kWh
    double ambient_C = 0.0;
    double t_a_C = 0.0;
    double t_set_C = 0.0;

    double grid_W = 0.0;
    double solar_potential_W = 0.0;
    double solar_used_W = 0.0;
    double solar_to_load_W = 0.0;
    double solar_to_es_W = 0.0;
    double curtailed_W = 0.0;

    double es_bus_W = 0.0;   // positive = discharging
    double es_I_A = 0.0;
    double soc_es = 0.0;

    double hvac_W = 0.0;
    double cmd_hvac = 0.0;
    double xev_W = 0.0;
    int cmd_xev = 0;
    double soc_xev = 0.0;
    double defer_W = 0.0;    // laundry + dishwasher
    int cmd_laundry = 0;
    int cmd_dishwasher = 0;
    double nd_W = 0.0;

    int ga_gens_hvac = 0;
    int ga_gens_xev = 0;
    int ga_gens_app = 0;
    int tabu_passes = 0;
    double mpc_wall_ms = 0.0;
    int flag_band_violation = 0;   // |T_a - T_set| beyond the band at this step
    int flag_cap_exceeded = 0;     // grid power above the cap at this step
    int flag_least_violation = 0;  // controller reported a least-violation plan
    int flag_infeasible = 0;       // controller reported an infeasible request
};

struct RequestLogEntry {
    std::string kind;          // laundry | dishwasher | xev
    int enable_step = 0;
    int activation_step = -1;  // first served step, -1 when never served
    int completion_step = -1;  // last served step
    int immediate_steps = 0;   // span an immediate dispatch would occupy
    double planned_Wh = 0.0;   // bus-side energy of the full request
    double served_Wh = 0.0;
};

struct RunMetadata {
    std::string controller;  // baseline | hem
    int case_id = 1;
    uint64_t seed = 0;
    int days = 0;
    int start_day = 0;
    int start_weekday = 0;
    double dt_s = 600.0;
    double area_ft2 = 0.0;
    std::string location;
    double es_kwh = 0.0;
    double ev_kwh = 0.0;
    bool es_temp_controlled = true;
    int es_n_series = 0, es_n_parallel = 0;
    int ev_n_series = 0, ev_n_parallel = 0;
    std::string fingerprint;  // scenario identity for comparisons
    std::string created_at;   // timestamp, excluded from determinism checks
    std::string notes;
};

struct RunLedger {
    RunMetadata meta;
    std::vector<LedgerRow> rows;
    std::vector<RequestLogEntry> requests;

    void integrity_check() const;
};

inline void RunLedger::integrity_check() const {
    double prev = -1.0;
    for (const auto& r : rows) {
        if (r.t_s <= prev) throw std::runtime_error("ledger: non-monotone clock");
        prev = r.t_s;
    }
    for (const auto& q : requests) {
        if (q.activation_step >= 0 && q.activation_step < q.enable_step)
            throw std::runtime_error("ledger: activation before enable for " + q.kind);
    }
}

}  // namespace hemsim
