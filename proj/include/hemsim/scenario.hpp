#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hemsim/baseline.hpp"
#include "hemsim/lookup.hpp"
#include "hemsim/plant.hpp"
#include "hemsim/rng.hpp"

namespace hemsim {

// ---------------------------------------------------------------------------
// Time-of-use pricing
// ---------------------------------------------------------------------------

struct TouTier {
    double start_h = 0.0;
    double end_h = 24.0;
    double price = 0.1;  // $/kWh
};

struct TouSchedule {
    std::vector<TouTier> weekday;
    std::vector<TouTier> weekend;
    int start_weekday = 0;  // weekday of simulation day 0, 0 = Monday

    void validate() const {
        for (const auto* day : {&weekday, &weekend}) {
            double covered = 0.0;
            for (const auto& t : *day) {
                if (t.end_h <= t.start_h || t.price <= 0.0)
                    throw std::invalid_argument("tou: malformed tier");
                covered += t.end_h - t.start_h;
            }
            if (std::abs(covered - 24.0) > 1e-9)
                throw std::invalid_argument("tou: tiers must cover 24 h without overlap");
        }
    }
};

// Piecewise-constant lookup; a query exactly on a boundary takes the segment
// that begins there (left-closed).
inline double price(const TouSchedule& sched, double t_s) {
    const long day = long(std::floor(t_s / 86400.0));
    const bool weekend = ((sched.start_weekday + day) % 7 + 7) % 7 >= 5;
    const auto& tiers = weekend ? sched.weekend : sched.weekday;
    const double h = (t_s - day * 86400.0) / 3600.0;
    for (const auto& t : tiers)
        if (h >= t.start_h && h < t.end_h) return t.price;
    return tiers.back().price;  // h == 24 boundary
}

inline TouSchedule default_tou() {
    TouSchedule s;
    // 3-tier weekday pattern; the paper's tariff plot carries no printed
    // values, so these rates are defaults and user-overridable.
    s.weekday = {{0.0, 7.0, 0.082}, {7.0, 15.0, 0.113}, {15.0, 21.0, 0.170}, {21.0, 24.0, 0.082}};
    s.weekend = {{0.0, 24.0, 0.113}};
    return s;
}

// ---------------------------------------------------------------------------
// Case studies
// ---------------------------------------------------------------------------

enum class Location { Columbus, LosAngeles, SanAntonio, Boston };

inline const char* location_name(Location l) {
    switch (l) {
        case Location::Columbus: return "columbus";
        case Location::LosAngeles: return "losangeles";
        case Location::SanAntonio: return "sanantonio";
        default: return "boston";
    }
}

struct CaseStudy {
    int id = 1;
    Location location = Location::Columbus;
    double area_lo_ft2 = 1500.0;
    double area_hi_ft2 = 2500.0;
    double xev_kwh = 60.0;
    double es_kwh = 14.0;
    bool es_temp_controlled = true;
};

inline CaseStudy load_case(int id) {
    static const CaseStudy table[12] = {
        {1, Location::Columbus, 1500, 2500, 60, 14, true},
        {2, Location::Columbus, 500, 1500, 60, 14, true},
        {3, Location::Columbus, 2500, 3500, 60, 14, true},
        {4, Location::Columbus, 3500, 4500, 60, 28, true},
        {5, Location::LosAngeles, 1500, 2500, 60, 14, true},
        {6, Location::SanAntonio, 1500, 2500, 60, 14, true},
        {7, Location::Boston, 1500, 2500, 60, 14, true},
        {8, Location::Columbus, 1500, 2500, 25, 14, true},
        {9, Location::Columbus, 1500, 2500, 100, 14, true},
        {10, Location::Columbus, 2500, 3500, 60, 28, true},
        {11, Location::Columbus, 3500, 4500, 60, 14, true},
        {12, Location::Columbus, 1500, 2500, 60, 14, false},
    };
    if (id < 1 || id > 12) throw std::out_of_range("load_case: id must be 1..12");
    return table[id - 1];
}

// ---------------------------------------------------------------------------
// Weather
// ---------------------------------------------------------------------------

struct WeatherTraces {
    Table1d ambient_C;      // time s -> C
    Table1d irradiance;     // time s -> W/m2
};

// Reads a CSV with columns time_s, ambient_C, irradiance_Wm2 (header line
// optional). Coarser sources are served through linear interpolation, so
// hourly data is fine at a 600 s step.
inline WeatherTraces load_weather_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("weather: cannot open " + path);
    std::vector<double> t, amb, irr;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line.find("time_s") != std::string::npos) continue;
        std::stringstream ss(line);
        std::string cell;
        double v[3];
        for (int i = 0; i < 3; ++i) {
            if (!std::getline(ss, cell, ','))
                throw std::runtime_error("weather: short row at " + path + ":" + std::to_string(lineno));
            v[i] = std::stod(cell);
        }
        if (!t.empty() && v[0] <= t.back())
            throw std::runtime_error("weather: misordered timestamps at " + path + ":" + std::to_string(lineno));
        t.push_back(v[0]);
        amb.push_back(v[1]);
        irr.push_back(std::max(0.0, v[2]));
    }
    if (t.size() < 2) throw std::runtime_error("weather: too few rows in " + path);
    return {Table1d(t, amb, "ambient(" + path + ")"), Table1d(t, irr, "irradiance(" + path + ")")};
}

inline void check_weather_span(const WeatherTraces& w, double t0_s, double t1_s) {
    if (t0_s < w.ambient_C.min_x() - 1e-6 || t1_s > w.ambient_C.max_x() + 1e-6)
        throw std::runtime_error("weather: trace does not cover requested span [" +
                                 std::to_string(t0_s) + ", " + std::to_string(t1_s) + "] s");
}

// ---------------------------------------------------------------------------
// Deferrable appliance catalog (operating powers and durations, fixed)
// ---------------------------------------------------------------------------

constexpr double kWasherW = 425.0;
constexpr double kDryerW = 3400.0;
constexpr double kDishwasherW = 1800.0;
constexpr double kWasherMin = 30.0;
constexpr double kDryerMin = 30.0;
constexpr double kDishwasherMin = 60.0;
constexpr double kLaundryTotalMin = 90.0;   // wash + hold + dry, all-in-one unit
constexpr double kDeadlineHours = 8.0;      // 48 steps at 600 s

inline int steps_for_minutes(double minutes, double dt_s) {
    return std::max(1, int(std::ceil(minutes * 60.0 / dt_s - 1e-9)));
}
inline int completion_steps_for(Request::Kind k, double dt_s) {
    return steps_for_minutes(k == Request::Kind::Laundry ? kLaundryTotalMin : kDishwasherMin, dt_s);
}
inline int deadline_steps(double dt_s) {
    return steps_for_minutes(kDeadlineHours * 60.0, dt_s);
}

// Per-step power inside an active appliance block. The all-in-one laundry
// unit washes for the first 30 min and dries for the last 30 min of its
// 90 min occupancy; the middle holds the load at no power.
inline double appliance_block_power(Request::Kind kind, int step_in_block, double dt_s) {
    if (kind == Request::Kind::Dishwasher) return kDishwasherW;
    const double mid_min = (step_in_block + 0.5) * dt_s / 60.0;
    if (mid_min < kWasherMin) return kWasherW;
    if (mid_min >= kLaundryTotalMin - kDryerMin) return kDryerW;
    return 0.0;
}

inline double appliance_block_energy_Wh(Request::Kind kind, int completion_steps, double dt_s) {
    double wh = 0.0;
    for (int i = 0; i < completion_steps; ++i)
        wh += appliance_block_power(kind, i, dt_s) * dt_s / 3600.0;
    return wh;
}

// ---------------------------------------------------------------------------
// User activities (non-deferrable trace + appliance requests)
// ---------------------------------------------------------------------------

struct ActivityConfig {
    int occupants = 1;
    double p_cleaning = 0.3;       // per day
    double p_breakfast = 0.7;
    double p_dinner = 0.9;
    double p_leisure = 0.95;
    double p_laundry = 0.55;
    double p_dishwasher = 0.8;
    double cleaning_W = 1250.0;    // Table 1 operating powers
    double cooking_W = 1225.0;
    double leisure_W = 300.0;
};

struct ActivityStream {
    std::vector<double> nd_power_W;       // per simulation step
    std::vector<Request> appliance_requests;
    double planned_deferrable_Wh = 0.0;   // bookkeeping total over all requests
};

namespace detail {

struct Timeline {
    std::vector<bool> busy;
    explicit Timeline(size_t n) : busy(n, false) {}
    bool free(int a, int b) const {  // [a, b)
        for (int i = std::max(0, a); i < std::min<int>(int(busy.size()), b); ++i)
            if (busy[i]) return false;
        return true;
    }
    void mark(int a, int b) {
        for (int i = std::max(0, a); i < std::min<int>(int(busy.size()), b); ++i) busy[i] = true;
    }
};

}  // namespace detail

// Seeded activity generation. The statistical machinery behind the census
// data is replaced by per-day occurrence probabilities; powers and durations
// come from the fixed appliance catalog above.
inline ActivityStream gen_activities(uint64_t seed, int days, int start_weekday, double dt_s,
                                     const ActivityConfig& cfg = {}) {
    auto rng = make_rng(seed, stream::kActivities);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const int steps_per_day = int(std::llround(86400.0 / dt_s));
    const int n = days * steps_per_day;

    ActivityStream out;
    out.nd_power_W.assign(std::max(0, n), 0.0);
    if (n <= 0) return out;

    auto step_of = [&](int day, double hour) {
        return day * steps_per_day + int(std::floor(hour * 3600.0 / dt_s));
    };

    for (int day = 0; day < days; ++day) {
        const bool weekend = (start_weekday + day) % 7 >= 5;
        detail::Timeline occupant(size_t(n));

        auto add_activity = [&](double start_h, double dur_min, double watts) {
            const int a = step_of(day, start_h);
            const int b = a + steps_for_minutes(dur_min, dt_s);
            if (a < 0 || a >= n) return;
            if (!occupant.free(a, b)) return;  // one occupant, no overlap
            occupant.mark(a, b);
            for (int i = a; i < std::min(b, n); ++i) out.nd_power_W[i] += watts;
        };

        // cooking and cleaning follow a morning/midday/evening template
        if (u01(rng) < cfg.p_breakfast) add_activity(7.0 + u01(rng) * 0.5, 30.0, cfg.cooking_W);
        if (u01(rng) < cfg.p_cleaning) add_activity(10.0 + u01(rng) * 4.0, 30.0 + u01(rng) * 30.0, cfg.cleaning_W);
        if (u01(rng) < cfg.p_dinner) add_activity(18.0 + u01(rng), 45.0 + u01(rng) * 15.0, cfg.cooking_W);
        if (u01(rng) < cfg.p_leisure) add_activity(19.5 + u01(rng), 120.0 + u01(rng) * 60.0, cfg.leisure_W);
        if (weekend && u01(rng) < 0.5) add_activity(14.0 + u01(rng), 90.0, cfg.leisure_W);
        for (int extra = 1; extra < cfg.occupants; ++extra)
            if (u01(rng) < cfg.p_leisure) add_activity(19.0 + u01(rng) * 2.0, 90.0 + u01(rng) * 60.0, cfg.leisure_W);

        // deferrable requests; windows chosen so blocks fit the calendar day
        if (u01(rng) < cfg.p_laundry) {
            Request r;
            r.kind = Request::Kind::Laundry;
            r.enable_step = step_of(day, 9.0 + u01(rng) * 4.0);
            r.completion_steps = completion_steps_for(r.kind, dt_s);
            r.deadline_step = r.enable_step + deadline_steps(dt_s);
            out.appliance_requests.push_back(r);
        }
        if (u01(rng) < cfg.p_dishwasher) {
            Request r;
            r.kind = Request::Kind::Dishwasher;
            r.enable_step = step_of(day, 19.0 + u01(rng) * 1.5);
            r.completion_steps = completion_steps_for(r.kind, dt_s);
            r.deadline_step = r.enable_step + deadline_steps(dt_s);
            out.appliance_requests.push_back(r);
        }
    }

    // trim requests that cannot finish inside the simulated span
    std::erase_if(out.appliance_requests,
                  [&](const Request& r) { return r.enable_step + r.completion_steps > n; });
    std::sort(out.appliance_requests.begin(), out.appliance_requests.end(),
              [](const Request& a, const Request& b) { return a.enable_step < b.enable_step; });
    for (auto& r : out.appliance_requests) {
        r.deadline_step = std::min(r.deadline_step, n - 1);
        out.planned_deferrable_Wh += appliance_block_energy_Wh(r.kind, r.completion_steps, dt_s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// EV usage
// ---------------------------------------------------------------------------

struct EvUsageConfig {
    double p_trip = 1.0;            // probability the vehicle is used on a day
    double plug_mean_h = 18.0;      // plug-in hour, truncated normal
    double plug_sd_h = 0.6;
    double depart_mean_h = 7.5;     // next-day departure hour
    double depart_sd_h = 0.4;
    double miles_mean = 40.0;
    double miles_sd = 10.0;
    double efficiency_kwh_per_mile = 0.30;
    double target_soc = 0.8;
};

struct EvEvent {
    int plug_step = 0;
    int depart_step = 0;  // first step the vehicle is unavailable again
    double initial_soc = 0.2;
    double target_soc = 0.8;
};

inline double ev_initial_soc(double miles, double efficiency_kwh_per_mile, double capacity_kwh) {
    const double soc = 0.8 - miles * efficiency_kwh_per_mile / capacity_kwh;
    return std::clamp(soc, 0.0, 0.8);
}

inline std::vector<EvEvent> gen_ev_events(uint64_t seed, int days, double dt_s, double capacity_kwh,
                                          const EvUsageConfig& cfg = {}) {
    auto rng = make_rng(seed, stream::kEvUsage);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> plug_h(cfg.plug_mean_h, cfg.plug_sd_h);
    std::normal_distribution<double> depart_h(cfg.depart_mean_h, cfg.depart_sd_h);
    std::normal_distribution<double> miles_d(cfg.miles_mean, cfg.miles_sd);

    const int steps_per_day = int(std::llround(86400.0 / dt_s));
    const int n = days * steps_per_day;
    // keep the plug-in SOC at or above the controller's 20% floor
    const double miles_cap = 0.55 * capacity_kwh / cfg.efficiency_kwh_per_mile;

    std::vector<EvEvent> out;
    for (int day = 0; day < days; ++day) {
        if (u01(rng) >= cfg.p_trip) continue;
        const double ph = std::clamp(plug_h(rng), cfg.plug_mean_h - 2.0, cfg.plug_mean_h + 2.0);
        const double dh = std::clamp(depart_h(rng), cfg.depart_mean_h - 1.5, cfg.depart_mean_h + 1.5);
        const double miles = std::clamp(miles_d(rng), 5.0, miles_cap);
        EvEvent e;
        e.plug_step = day * steps_per_day + int(std::floor(ph * 3600.0 / dt_s));
        e.depart_step = (day + 1) * steps_per_day + int(std::floor(dh * 3600.0 / dt_s));
        e.initial_soc = ev_initial_soc(miles, cfg.efficiency_kwh_per_mile, capacity_kwh);
        e.target_soc = cfg.target_soc;
        if (e.plug_step >= n) continue;
        e.depart_step = std::min(e.depart_step, n);
        out.push_back(e);
    }
    return out;
}

}  // namespace hemsim
