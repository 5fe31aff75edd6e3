#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "hemsim/ledger.hpp"

namespace hemsim {

struct MetricsReport {
    double grid_cost_usd = 0.0;
    double grid_energy_kwh = 0.0;
    double comfort_C2s = 0.0;        // sum of (T_a - T_set)^2 * dt
    double total_delay_steps = 0.0;  // activation lag summed over requests
    double deferred_MWh = 0.0;       // P_Def,actual
    double deferrable_MWh = 0.0;     // P_Def
    bool deferral_defined = false;   // false when no deferrable load existed
    double deferral_efficiency_pct = 0.0;
    double solar_direct_pct = 0.0;   // share of utilized solar serving loads
    double solar_stored_pct = 0.0;   // share of utilized solar charging the ES
    double solar_curtailed_kwh = 0.0;
    double ah_throughput = 0.0;      // stationary pack
    double band_violation_steps = 0.0;
    double band_violation_fraction = 0.0;
    int n_requests = 0;
    std::string fingerprint;
    std::string controller;
};

inline double grid_cost(const RunLedger& led) {
    double usd = 0.0;
    for (const auto& r : led.rows) usd += r.price * r.grid_W * led.meta.dt_s / 3.6e6;
    return usd;
}

inline double comfort_cost(const RunLedger& led) {
    double c = 0.0;
    for (const auto& r : led.rows) {
        const double dev = r.t_a_C - r.t_set_C;
        c += dev * dev * led.meta.dt_s;
    }
    return c;
}

inline double ah_throughput(const RunLedger& led) {
    double ah = 0.0;
    for (const auto& r : led.rows) ah += std::abs(r.es_I_A) * led.meta.dt_s / 3600.0;
    return ah;
}

// Energy a request was served outside its immediate-dispatch window
// [enable, enable + immediate_steps). Appliance block power is implied by the
// ledger's defer command columns; the EV draw is its own ledger column.
struct DeferredEnergy {
    double deferred_Wh = 0.0;
    double served_Wh = 0.0;
};

inline DeferredEnergy deferred_energy_of(const RunLedger& led, const RequestLogEntry& q) {
    DeferredEnergy out;
    if (q.activation_step < 0) return out;  // never served
    const int w_end = q.enable_step + q.immediate_steps;  // exclusive
    if (q.kind == "xev") {
        for (int k = q.activation_step; k <= q.completion_step && k < int(led.rows.size()); ++k) {
            const auto& r = led.rows[size_t(k)];
            if (r.xev_W <= 0.0) continue;
            const double wh = r.xev_W * led.meta.dt_s / 3600.0;
            out.served_Wh += wh;
            if (k >= w_end) out.deferred_Wh += wh;
        }
        return out;
    }
    const bool laundry = q.kind == "laundry";
    for (int k = q.activation_step; k <= q.completion_step && k < int(led.rows.size()); ++k) {
        const auto& r = led.rows[size_t(k)];
        if ((laundry && !r.cmd_laundry) || (!laundry && !r.cmd_dishwasher)) continue;
        // reconstruct this block's power from the catalog position
        const double wh = r.defer_W * led.meta.dt_s / 3600.0;
        (void)wh;
        break;
    }
    // blocks are contiguous: walk the block profile directly
    for (int i = 0;; ++i) {
        const int k = q.activation_step + i;
        if (k >= int(led.rows.size())) break;
        const auto& r = led.rows[size_t(k)];
        const bool active = laundry ? r.cmd_laundry != 0 : r.cmd_dishwasher != 0;
        if (!active) break;
        const double w = appliance_block_power(
            laundry ? Request::Kind::Laundry : Request::Kind::Dishwasher, i, led.meta.dt_s);
        const double wh = w * led.meta.dt_s / 3600.0;
        out.served_Wh += wh;
        if (k >= w_end) out.deferred_Wh += wh;
    }
    return out;
}

inline double deferred_power_MWh(const RunLedger& led) {
    double wh = 0.0;
    for (const auto& q : led.requests) wh += deferred_energy_of(led, q).deferred_Wh;
    return wh / 1e6;
}

inline double deferral_efficiency(double deferred_MWh, double deferrable_MWh) {
    if (deferrable_MWh <= 0.0)
        throw std::domain_error("deferral_efficiency: no deferrable load");
    return deferred_MWh / deferrable_MWh * 100.0;
}

struct SolarSplit {
    double direct_pct = 0.0;
    double stored_pct = 0.0;
    double curtailed_kwh = 0.0;
};

inline SolarSplit solar_split(const RunLedger& led) {
    double to_load = 0.0, to_es = 0.0, curtailed = 0.0;
    for (const auto& r : led.rows) {
        to_load += r.solar_to_load_W;
        to_es += r.solar_to_es_W;
        curtailed += r.curtailed_W;
    }
    SolarSplit s;
    const double used = to_load + to_es;
    if (used > 0.0) {
        s.direct_pct = to_load / used * 100.0;
        s.stored_pct = to_es / used * 100.0;
    }
    s.curtailed_kwh = curtailed * led.meta.dt_s / 3.6e6;
    return s;
}

inline MetricsReport compute_metrics(const RunLedger& led) {
    led.integrity_check();
    if (led.rows.empty()) throw std::runtime_error("metrics: empty ledger");

    MetricsReport m;
    m.controller = led.meta.controller;
    m.fingerprint = led.meta.fingerprint;
    m.grid_cost_usd = grid_cost(led);
    m.comfort_C2s = comfort_cost(led);
    m.ah_throughput = ah_throughput(led);
    for (const auto& r : led.rows) {
        m.grid_energy_kwh += r.grid_W * led.meta.dt_s / 3.6e6;
        m.band_violation_steps += r.flag_band_violation;
    }
    m.band_violation_fraction = m.band_violation_steps / double(led.rows.size());

    m.n_requests = int(led.requests.size());
    for (const auto& q : led.requests) {
        if (q.activation_step >= 0)
            m.total_delay_steps += q.activation_step - q.enable_step;
        m.deferrable_MWh += q.planned_Wh / 1e6;
        m.deferred_MWh += deferred_energy_of(led, q).deferred_Wh / 1e6;
    }
    m.deferral_defined = m.deferrable_MWh > 0.0;
    if (m.deferral_defined)
        m.deferral_efficiency_pct = deferral_efficiency(m.deferred_MWh, m.deferrable_MWh);

    const auto split = solar_split(led);
    m.solar_direct_pct = split.direct_pct;
    m.solar_stored_pct = split.stored_pct;
    m.solar_curtailed_kwh = split.curtailed_kwh;
    return m;
}

// ---------------------------------------------------------------------------
// Side-by-side comparison of two runs of the same scenario
// ---------------------------------------------------------------------------

struct ComparisonRow {
    std::string metric;
    double base = 0.0;
    double hem = 0.0;
    double delta = 0.0;        // hem - base
    double delta_pct = 0.0;    // relative to base when base != 0
};

inline std::vector<ComparisonRow> compare(const MetricsReport& base, const MetricsReport& hem) {
    if (!base.fingerprint.empty() && base.fingerprint != hem.fingerprint)
        throw std::invalid_argument("compare: scenario fingerprints differ (" + base.fingerprint +
                                    " vs " + hem.fingerprint + ")");
    auto row = [](const std::string& name, double b, double h) {
        ComparisonRow r{name, b, h, h - b, 0.0};
        if (b != 0.0) r.delta_pct = (h - b) / b * 100.0;
        return r;
    };
    return {
        row("grid_cost_usd", base.grid_cost_usd, hem.grid_cost_usd),
        row("grid_energy_kwh", base.grid_energy_kwh, hem.grid_energy_kwh),
        row("comfort_C2s", base.comfort_C2s, hem.comfort_C2s),
        row("total_delay_steps", base.total_delay_steps, hem.total_delay_steps),
        row("deferred_MWh", base.deferred_MWh, hem.deferred_MWh),
        row("deferrable_MWh", base.deferrable_MWh, hem.deferrable_MWh),
        row("deferral_efficiency_pct", base.deferral_efficiency_pct, hem.deferral_efficiency_pct),
        row("solar_direct_pct", base.solar_direct_pct, hem.solar_direct_pct),
        row("solar_stored_pct", base.solar_stored_pct, hem.solar_stored_pct),
        row("solar_curtailed_kwh", base.solar_curtailed_kwh, hem.solar_curtailed_kwh),
        row("ah_throughput", base.ah_throughput, hem.ah_throughput),
        row("band_violation_steps", base.band_violation_steps, hem.band_violation_steps),
    };
}

}  // namespace hemsim
