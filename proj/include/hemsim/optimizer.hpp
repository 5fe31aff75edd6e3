#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "hemsim/ga.hpp"
#include "hemsim/horizon.hpp"
#include "hemsim/rng.hpp"
#include "hemsim/scenario.hpp"

namespace hemsim {

// ---------------------------------------------------------------------------
// GA encodings for the three sub-problems
// ---------------------------------------------------------------------------

namespace enc {

// Direct encoding: one HVAC level index per step followed by one ES pack
// current per step (length 2 N_H). Tabu steps pin the HVAC gene to off.
struct DirectHvacEs {
    const HorizonProblem* p;
    int n_levels;
    double i_max;

    explicit DirectHvacEs(const HorizonProblem& prob)
        : p(&prob), n_levels(int(prob.hvac_levels.size())),
          i_max(prob.es.max_current_A > 0 ? prob.es.max_current_A : 2.5 * prob.es.n_series) {}

    int n() const { return p->n_steps; }

    ga::Genome random(std::mt19937_64& rng) const {
        std::uniform_int_distribution<int> lvl(0, n_levels - 1);
        std::uniform_real_distribution<double> amp(-i_max, i_max);
        ga::Genome g;
        g.genes.resize(size_t(2 * n()));
        for (int k = 0; k < n(); ++k)
            g.genes[size_t(k)] = p->tabu.hvac[size_t(k)] ? 0.0 : double(lvl(rng));
        for (int k = 0; k < n(); ++k) g.genes[size_t(n() + k)] = amp(rng);
        return g;
    }

    ga::Genome crossover(const ga::Genome& a, const ga::Genome& b, std::mt19937_64& rng) const {
        std::uniform_int_distribution<size_t> cut(1, a.genes.size() - 1);
        const size_t c = cut(rng);
        ga::Genome child = a;
        std::copy(b.genes.begin() + long(c), b.genes.end(), child.genes.begin() + long(c));
        return child;
    }

    void mutate(ga::Genome& g, std::mt19937_64& rng) const {
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::uniform_int_distribution<int> lvl(0, n_levels - 1);
        std::uniform_real_distribution<double> amp(-i_max, i_max);
        const double rate = 1.0 / double(g.genes.size());
        for (int k = 0; k < n(); ++k)
            if (u01(rng) < rate) g.genes[size_t(k)] = double(lvl(rng));
        for (int k = 0; k < n(); ++k)
            if (u01(rng) < rate) g.genes[size_t(n() + k)] = amp(rng);
    }

    void repair(ga::Genome& g, std::mt19937_64&) const {
        for (int k = 0; k < n(); ++k) {
            double& v = g.genes[size_t(k)];
            v = std::clamp(std::round(v), 0.0, double(n_levels - 1));
            if (p->tabu.hvac[size_t(k)]) v = 0.0;
        }
        for (int k = 0; k < n(); ++k)
            g.genes[size_t(n() + k)] = std::clamp(g.genes[size_t(n() + k)], -i_max, i_max);
    }

    std::vector<int> levels_of(const ga::Genome& g) const {
        std::vector<int> u(size_t(n()));
        for (int k = 0; k < n(); ++k) u[size_t(k)] = int(g.genes[size_t(k)]);
        return u;
    }
    std::vector<double> es_of(const ga::Genome& g) const {
        return {g.genes.begin() + n(), g.genes.end()};
    }
};

// Activation-time encoding for the xEV: C distinct steps drawn from the
// feasible window, followed by the ES currents (length C + N_H).
struct ActivationEs {
    const HorizonProblem* p;
    std::vector<int> allowed;  // feasible, non-tabu steps, ascending
    int c;
    double i_max;

    explicit ActivationEs(const HorizonProblem& prob) : p(&prob), c(prob.ev_req.completion) {
        i_max = prob.es.max_current_A > 0 ? prob.es.max_current_A : 2.5 * prob.es.n_series;
        const int lo = std::max(0, prob.ev_req.enable);
        const int hi = std::min(prob.n_steps - 1, prob.ev_req.deadline);
        for (int k = lo; k <= hi; ++k)
            if (!prob.tabu.xev[size_t(k)]) allowed.push_back(k);
    }

    bool feasible() const { return int(allowed.size()) >= c && c > 0; }
    int n() const { return p->n_steps; }

    ga::Genome random(std::mt19937_64& rng) const {
        ga::Genome g;
        g.genes.reserve(size_t(c + n()));
        std::vector<int> pool = allowed;
        for (int i = 0; i < c; ++i) {  // partial Fisher-Yates
            std::uniform_int_distribution<size_t> pick(size_t(i), pool.size() - 1);
            std::swap(pool[size_t(i)], pool[pick(rng)]);
            g.genes.push_back(double(pool[size_t(i)]));
        }
        std::sort(g.genes.begin(), g.genes.begin() + c);
        std::uniform_real_distribution<double> amp(-i_max, i_max);
        for (int k = 0; k < n(); ++k) g.genes.push_back(amp(rng));
        return g;
    }

    ga::Genome crossover(const ga::Genome& a, const ga::Genome& b, std::mt19937_64& rng) const {
        // uniform gene swap on the activation set, single point on the ES tail
        ga::Genome child = a;
        std::uniform_int_distribution<int> coin(0, 1);
        for (int i = 0; i < c; ++i)
            if (coin(rng)) child.genes[size_t(i)] = b.genes[size_t(i)];
        std::uniform_int_distribution<size_t> cut(size_t(c), child.genes.size() - 1);
        const size_t cp = cut(rng);
        std::copy(b.genes.begin() + long(cp), b.genes.end(), child.genes.begin() + long(cp));
        return child;
    }

    void mutate(ga::Genome& g, std::mt19937_64& rng) const {
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::uniform_int_distribution<size_t> pick(0, allowed.size() - 1);
        std::uniform_real_distribution<double> amp(-i_max, i_max);
        const double rate = 1.0 / double(g.genes.size());
        for (int i = 0; i < c; ++i)
            if (u01(rng) < rate) g.genes[size_t(i)] = double(allowed[pick(rng)]);
        for (size_t i = size_t(c); i < g.genes.size(); ++i)
            if (u01(rng) < rate) g.genes[i] = amp(rng);
    }

    // clamp into the window, resample duplicates to unused allowed steps
    void repair(ga::Genome& g, std::mt19937_64& rng) const {
        std::vector<uint8_t> used(size_t(n()), 0);
        for (int i = 0; i < c; ++i) {
            int k = int(std::lround(g.genes[size_t(i)]));
            k = snap_to_allowed(k);
            if (used[size_t(k)]) k = -1;  // duplicate, resample below
            if (k >= 0) used[size_t(k)] = 1;
            g.genes[size_t(i)] = double(k);
        }
        for (int i = 0; i < c; ++i) {
            if (g.genes[size_t(i)] >= 0) continue;
            std::uniform_int_distribution<size_t> pick(0, allowed.size() - 1);
            size_t j = pick(rng);
            for (size_t tries = 0; tries < allowed.size(); ++tries) {
                const int k = allowed[(j + tries) % allowed.size()];
                if (!used[size_t(k)]) {
                    used[size_t(k)] = 1;
                    g.genes[size_t(i)] = double(k);
                    break;
                }
            }
        }
        std::sort(g.genes.begin(), g.genes.begin() + c);
        for (size_t i = size_t(c); i < g.genes.size(); ++i)
            g.genes[i] = std::clamp(g.genes[i], -i_max, i_max);
    }

    int snap_to_allowed(int k) const {
        auto it = std::lower_bound(allowed.begin(), allowed.end(), k);
        if (it == allowed.end()) return allowed.back();
        if (it == allowed.begin()) return allowed.front();
        return (*it - k) < (k - *(it - 1)) ? *it : *(it - 1);
    }

    std::vector<uint8_t> xev_of(const ga::Genome& g) const {
        std::vector<int> steps(size_t(c));
        for (int i = 0; i < c; ++i) steps[size_t(i)] = int(g.genes[size_t(i)]);
        return ga::decode_xev(steps, n());
    }
    std::vector<double> es_of(const ga::Genome& g) const {
        return {g.genes.begin() + c, g.genes.end()};
    }
};

// Start-time encoding for the non-interruptible appliances: one gene per
// pending block plus the ES currents. Feasibility (window and tabu overlap)
// holds by construction of the allowed start lists.
struct StartTimesEs {
    const HorizonProblem* p;
    std::vector<int> starts_l, starts_d;
    bool has_l, has_d;
    double i_max;

    explicit StartTimesEs(const HorizonProblem& prob)
        : p(&prob), has_l(prob.laundry.present), has_d(prob.dishwasher.present) {
        i_max = prob.es.max_current_A > 0 ? prob.es.max_current_A : 2.5 * prob.es.n_series;
        if (has_l) starts_l = allowed_starts(prob, prob.laundry, prob.tabu.laundry);
        if (has_d) starts_d = allowed_starts(prob, prob.dishwasher, prob.tabu.dishwasher);
    }

    static std::vector<int> allowed_starts(const HorizonProblem& prob, const PendingBlock& b,
                                           const std::vector<uint8_t>& tabu) {
        std::vector<int> out;
        const int lo = std::max(0, b.enable);
        const int hi = std::min(b.deadline - b.completion + 1, prob.n_steps - b.completion);
        for (int s = lo; s <= hi; ++s) {
            bool clean = true;
            for (int k = s; k < s + b.completion && clean; ++k)
                if (tabu[size_t(k)]) clean = false;
            if (clean) out.push_back(s);
        }
        return out;
    }

    bool feasible() const { return (!has_l || !starts_l.empty()) && (!has_d || !starts_d.empty()); }
    int n() const { return p->n_steps; }
    int head() const { return (has_l ? 1 : 0) + (has_d ? 1 : 0); }

    ga::Genome random(std::mt19937_64& rng) const {
        ga::Genome g;
        if (has_l) {
            std::uniform_int_distribution<size_t> pick(0, starts_l.size() - 1);
            g.genes.push_back(double(starts_l[pick(rng)]));
        }
        if (has_d) {
            std::uniform_int_distribution<size_t> pick(0, starts_d.size() - 1);
            g.genes.push_back(double(starts_d[pick(rng)]));
        }
        std::uniform_real_distribution<double> amp(-i_max, i_max);
        for (int k = 0; k < n(); ++k) g.genes.push_back(amp(rng));
        return g;
    }

    ga::Genome crossover(const ga::Genome& a, const ga::Genome& b, std::mt19937_64& rng) const {
        std::uniform_int_distribution<size_t> cut(1, a.genes.size() - 1);
        const size_t c = cut(rng);
        ga::Genome child = a;
        std::copy(b.genes.begin() + long(c), b.genes.end(), child.genes.begin() + long(c));
        return child;
    }

    void mutate(ga::Genome& g, std::mt19937_64& rng) const {
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::uniform_real_distribution<double> amp(-i_max, i_max);
        const double rate = 1.0 / double(g.genes.size());
        size_t i = 0;
        if (has_l) {
            if (u01(rng) < rate) {
                std::uniform_int_distribution<size_t> pick(0, starts_l.size() - 1);
                g.genes[i] = double(starts_l[pick(rng)]);
            }
            ++i;
        }
        if (has_d) {
            if (u01(rng) < rate) {
                std::uniform_int_distribution<size_t> pick(0, starts_d.size() - 1);
                g.genes[i] = double(starts_d[pick(rng)]);
            }
            ++i;
        }
        for (; i < g.genes.size(); ++i)
            if (u01(rng) < rate) g.genes[i] = amp(rng);
    }

    void repair(ga::Genome& g, std::mt19937_64&) const {
        size_t i = 0;
        if (has_l) g.genes[i] = double(snap(starts_l, int(std::lround(g.genes[i])))), ++i;
        if (has_d) g.genes[i] = double(snap(starts_d, int(std::lround(g.genes[i])))), ++i;
        for (; i < g.genes.size(); ++i) g.genes[i] = std::clamp(g.genes[i], -i_max, i_max);
    }

    static int snap(const std::vector<int>& starts, int k) {
        auto it = std::lower_bound(starts.begin(), starts.end(), k);
        if (it == starts.end()) return starts.back();
        if (it == starts.begin()) return starts.front();
        return (*it - k) < (k - *(it - 1)) ? *it : *(it - 1);
    }

    int k_l_of(const ga::Genome& g) const { return has_l ? int(g.genes[0]) : -1; }
    int k_d_of(const ga::Genome& g) const { return has_d ? int(g.genes[has_l ? 1 : 0]) : -1; }
    std::vector<double> es_of(const ga::Genome& g) const {
        return {g.genes.begin() + head(), g.genes.end()};
    }
};

}  // namespace enc

// ---------------------------------------------------------------------------
// Plans and solver wrappers
// ---------------------------------------------------------------------------

struct SolveTelemetry {
    int generations = 0;
    int evaluations = 0;
    bool timeout = false;
    double wall_s = 0.0;
};

struct ControlPlan {
    std::vector<double> u_hvac;     // command values per step
    std::vector<int> u_hvac_level;  // index into problem.hvac_levels
    std::vector<double> u_es_A;     // commanded ES currents (pre-dispatch)
    std::vector<uint8_t> u_xev;
    int k_l = -1;
    int k_d = -1;
    HorizonSeries series;           // realized under this sub-problem's model
    double objective = 0.0;
    double money = 0.0;
    double band_violation = 0.0;    // C^2-steps outside the comfort band
    bool least_violation = false;   // no feasible plan existed, best effort returned
    std::string note;
    SolveTelemetry telemetry;
};

struct GaSettings {
    ga::GaConfig hvac_summer = ga::hvac_settings(true);
    ga::GaConfig hvac_winter = ga::hvac_settings(false);
    ga::GaConfig xev = ga::xev_settings();
    ga::GaConfig appliances = ga::appliance_settings();
};

namespace detail {

template <class F>
SolveTelemetry timed(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto res = f();
    SolveTelemetry t;
    t.generations = res.generations;
    t.evaluations = res.evaluations;
    t.timeout = res.timeout;
    t.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return t;
}

}  // namespace detail

// Sub-problem 1: HVAC and energy storage. Returns the least-violation plan
// with a report when the comfort band cannot be held.
inline ControlPlan solve_hvac_es(const HorizonProblem& p, const ga::GaConfig& cfg,
                                 std::mt19937_64 rng) {
    ControlPlan plan;
    if (p.n_steps == 0) return plan;
    const enc::DirectHvacEs e(p);
    const HvacStepModel model(p);

    const auto objective = [&](const ga::Genome& g) {
        return eval_hvac_es(p, model, e.levels_of(g), e.es_of(g)).objective;
    };

    ga::EvolveResult best;
    plan.telemetry = detail::timed([&] {
        best = ga::evolve(e, objective, cfg, rng);
        return best;
    });

    plan.u_hvac_level = e.levels_of(best.best);
    plan.u_es_A = e.es_of(best.best);
    plan.u_hvac.resize(size_t(p.n_steps));
    for (int k = 0; k < p.n_steps; ++k)
        plan.u_hvac[size_t(k)] = p.hvac_levels[size_t(plan.u_hvac_level[size_t(k)])];
    plan.series.resize(p.n_steps);
    const auto cost = eval_hvac_es(p, model, plan.u_hvac_level, plan.u_es_A, &plan.series);
    plan.objective = cost.objective;
    plan.money = cost.money;
    plan.band_violation = cost.band_violation;
    if (cost.band_violation > 1e-9) {
        plan.least_violation = true;
        plan.note = "comfort band not fully attainable; violation " +
                    std::to_string(cost.band_violation) + " C^2-steps";
    }
    return plan;
}

// Sub-problem 2: xEV charging and energy storage with the HVAC power fixed.
// An impossible completion falls back to charging every admissible step.
inline ControlPlan solve_xev_es(const HorizonProblem& p, const ControlPlan& hvac_plan,
                                const ga::GaConfig& cfg, std::mt19937_64 rng) {
    ControlPlan plan;
    if (p.n_steps == 0 || !p.ev_req.present) return plan;
    plan.u_hvac = hvac_plan.u_hvac;
    plan.u_hvac_level = hvac_plan.u_hvac_level;

    const enc::ActivationEs e(p);
    if (!e.feasible()) {
        plan.least_violation = true;
        plan.note = "xev: completion of " + std::to_string(p.ev_req.completion) +
                    " steps does not fit the window of " + std::to_string(e.allowed.size()) +
                    " admissible steps (earliest feasible completion " +
                    std::to_string(e.allowed.size()) + ")";
        plan.u_xev.assign(size_t(p.n_steps), 0);
        for (int k : e.allowed) plan.u_xev[size_t(k)] = 1;
        plan.u_es_A.assign(size_t(p.n_steps), 0.0);
        plan.series.resize(p.n_steps);
        const auto cost = eval_xev_es(p, hvac_plan.series.hvac_W, plan.u_xev, plan.u_es_A, &plan.series);
        plan.objective = cost.objective;
        plan.money = cost.money;
        return plan;
    }

    const auto objective = [&](const ga::Genome& g) {
        return eval_xev_es(p, hvac_plan.series.hvac_W, e.xev_of(g), e.es_of(g)).objective;
    };

    ga::EvolveResult best;
    plan.telemetry = detail::timed([&] {
        best = ga::evolve(e, objective, cfg, rng);
        return best;
    });

    plan.u_xev = e.xev_of(best.best);
    plan.u_es_A = e.es_of(best.best);
    plan.series.resize(p.n_steps);
    const auto cost = eval_xev_es(p, hvac_plan.series.hvac_W, plan.u_xev, plan.u_es_A, &plan.series);
    plan.objective = cost.objective;
    plan.money = cost.money;
    return plan;
}

// Sub-problem 3: laundry / dishwasher and energy storage with HVAC and xEV
// power fixed.
inline ControlPlan solve_appliances_es(const HorizonProblem& p, const ControlPlan& hvac_plan,
                                       const ControlPlan& xev_plan, const ga::GaConfig& cfg,
                                       std::mt19937_64 rng) {
    ControlPlan plan;
    if (p.n_steps == 0 || (!p.laundry.present && !p.dishwasher.present)) return plan;

    const std::vector<double> zeros(size_t(p.n_steps), 0.0);
    const auto& hvac_W = hvac_plan.series.hvac_W.empty() ? zeros : hvac_plan.series.hvac_W;
    const auto& xev_W = xev_plan.series.xev_W.empty() ? zeros : xev_plan.series.xev_W;

    enc::StartTimesEs e(p);
    if (!e.feasible()) {
        // no admissible start before the deadline: start as early as possible
        plan.least_violation = true;
        plan.note = "appliances: no feasible start before deadline";
        plan.k_l = p.laundry.present && p.n_steps >= p.laundry.completion
                       ? std::max(0, p.laundry.enable) : -1;
        plan.k_d = p.dishwasher.present && p.n_steps >= p.dishwasher.completion
                       ? std::max(0, p.dishwasher.enable) : -1;
        if (plan.k_l >= 0) plan.k_l = std::min(plan.k_l, p.n_steps - p.laundry.completion);
        if (plan.k_d >= 0) plan.k_d = std::min(plan.k_d, p.n_steps - p.dishwasher.completion);
        plan.u_es_A.assign(size_t(p.n_steps), 0.0);
        plan.series.resize(p.n_steps);
        const auto cost = eval_appliances_es(p, hvac_W, xev_W, plan.k_l, plan.k_d, plan.u_es_A,
                                             &plan.series);
        plan.objective = cost.objective;
        plan.money = cost.money;
        return plan;
    }

    const auto objective = [&](const ga::Genome& g) {
        return eval_appliances_es(p, hvac_W, xev_W, e.k_l_of(g), e.k_d_of(g), e.es_of(g)).objective;
    };

    ga::EvolveResult best;
    plan.telemetry = detail::timed([&] {
        best = ga::evolve(e, objective, cfg, rng);
        return best;
    });

    plan.k_l = e.k_l_of(best.best);
    plan.k_d = e.k_d_of(best.best);
    plan.u_es_A = e.es_of(best.best);
    plan.series.resize(p.n_steps);
    const auto cost = eval_appliances_es(p, hvac_W, xev_W, plan.k_l, plan.k_d, plan.u_es_A,
                                         &plan.series);
    plan.objective = cost.objective;
    plan.money = cost.money;
    return plan;
}

// ---------------------------------------------------------------------------
// Power capping
// ---------------------------------------------------------------------------

enum class TabuKind { Hvac, Xev, Laundry, Dishwasher };

struct TabuAppliance {
    TabuKind kind = TabuKind::Hvac;
    std::vector<int> steps;
};

// Recomputes the total grid series from the finalized sub-plans (the last
// solved sub-problem owns the ES command) and flags the appliance with the
// largest demand inside the violation window.
struct FinalAssembly {
    HorizonSeries series;
    double money = 0.0;
};

inline FinalAssembly assemble_final(const HorizonProblem& p, const ControlPlan& hvac_plan,
                                    const ControlPlan* xev_plan, const ControlPlan* app_plan) {
    FinalAssembly out;
    out.series.resize(p.n_steps);
    if (p.n_steps == 0) return out;
    const std::vector<double> zeros(size_t(p.n_steps), 0.0);
    const auto& hvac_W = hvac_plan.series.hvac_W.empty() ? zeros : hvac_plan.series.hvac_W;
    const auto& xev_W = (xev_plan && !xev_plan->series.xev_W.empty()) ? xev_plan->series.xev_W : zeros;
    const int k_l = app_plan ? app_plan->k_l : -1;
    const int k_d = app_plan ? app_plan->k_d : -1;
    const std::vector<double>* u_es = &zeros;
    if (app_plan && !app_plan->u_es_A.empty()) u_es = &app_plan->u_es_A;
    else if (xev_plan && !xev_plan->u_es_A.empty()) u_es = &xev_plan->u_es_A;
    else if (!hvac_plan.u_es_A.empty()) u_es = &hvac_plan.u_es_A;

    const auto cost = eval_appliances_es(p, hvac_W, xev_W, k_l, k_d, *u_es, &out.series);
    out.money = cost.money;
    // carry the indoor trajectory from the HVAC plan (sub-problem 3 does not model it)
    if (!hvac_plan.series.t_a_C.empty()) out.series.t_a_C = hvac_plan.series.t_a_C;
    if (xev_plan && !xev_plan->series.soc_ev.empty()) out.series.soc_ev = xev_plan->series.soc_ev;
    return out;
}

// Violating steps of the assembled grid series; the tabu candidate is the
// schedulable appliance with the largest demand inside that window. Committed
// blocks are not candidates (they can no longer move), and an appliance is
// skipped once it has already been tabued across the whole window.
inline std::optional<TabuAppliance> capping_check(const HorizonProblem& p,
                                                  const FinalAssembly& fin,
                                                  const ControlPlan* app_plan,
                                                  const TabuSet& already) {
    std::vector<int> violating;
    for (int k = 0; k < p.n_steps; ++k)
        if (fin.series.grid_W[size_t(k)] > p.p_cap_W + 1e-6) violating.push_back(k);
    if (violating.empty()) return std::nullopt;

    auto peak_of = [&](const std::vector<double>& series) {
        double m = 0.0;
        for (int k : violating) m = std::max(m, series[size_t(k)]);
        return m;
    };
    auto block_peak = [&](Request::Kind kind, int start, int comp) {
        double m = 0.0;
        if (start < 0) return m;
        for (int k : violating)
            if (k >= start && k < start + comp)
                m = std::max(m, appliance_block_power(kind, k - start, p.dt_s));
        return m;
    };
    auto fresh_for = [&](const std::vector<uint8_t>& t) {
        for (int k : violating)
            if (!t[size_t(k)]) return true;
        return false;
    };

    struct Cand {
        TabuKind kind;
        double peak;
        bool fresh;
    };
    const Cand cands[] = {
        {TabuKind::Hvac, peak_of(fin.series.hvac_W), fresh_for(already.hvac)},
        {TabuKind::Xev, peak_of(fin.series.xev_W), fresh_for(already.xev)},
        {TabuKind::Laundry,
         block_peak(Request::Kind::Laundry, app_plan ? app_plan->k_l : -1, p.laundry.completion),
         fresh_for(already.laundry)},
        {TabuKind::Dishwasher,
         block_peak(Request::Kind::Dishwasher, app_plan ? app_plan->k_d : -1, p.dishwasher.completion),
         fresh_for(already.dishwasher)},
    };

    TabuAppliance best;
    double best_peak = 0.0;
    for (const auto& c : cands) {
        if (!c.fresh || c.peak <= best_peak) continue;
        best_peak = c.peak;
        best.kind = c.kind;
    }
    if (best_peak <= 0.0) return std::nullopt;  // nothing schedulable left to tabu
    best.steps = violating;
    return best;
}

inline void add_tabu(TabuSet& tabu, const TabuAppliance& t) {
    auto& v = t.kind == TabuKind::Hvac ? tabu.hvac
              : t.kind == TabuKind::Xev ? tabu.xev
              : t.kind == TabuKind::Laundry ? tabu.laundry
                                            : tabu.dishwasher;
    for (int k : t.steps) v[size_t(k)] = 1;
}

// ---------------------------------------------------------------------------
// Scenario aggregate and the per-step MPC driver
// ---------------------------------------------------------------------------

struct Scenario {
    CaseStudy case_study;
    uint64_t seed = 7;
    int days = 7;
    int start_day = 0;  // day-of-year offset into the weather trace
    int start_weekday = 0;
    double dt_s = 600.0;
    double area_ft2 = 2000.0;

    WeatherTraces weather;
    TouSchedule tou = default_tou();
    SolarArray solar;
    HvacUnit hvac;
    ThermalHouse house;   // indoor_temp_C = initial state
    BatteryPack es_pack;  // soc = initial
    BatteryPack ev_pack;
    DeadbandConfig deadband;
    OptimizerConfig opt;
    GaSettings ga_settings;
    ActivityStream activities;
    std::vector<EvEvent> ev_events;
    std::vector<uint8_t> summer_by_day;  // GA season flag per simulated day
    double baseline_soc_lo = 0.2;        // rule controller bounds (Eq. of the
    double baseline_soc_hi = 0.9;        // baseline, wider than the MPC's)
    std::string fingerprint;

    double t0_s() const { return start_day * 86400.0; }
    int steps_per_day() const { return int(std::llround(86400.0 / dt_s)); }
    int n_steps() const { return days * steps_per_day(); }
    double t_end_s() const { return days * 86400.0; }
    double abs_time(int k) const { return t0_s() + k * dt_s; }
    bool summer_at(int k) const {
        if (summer_by_day.empty()) return true;
        const int d = std::clamp(k / steps_per_day(), 0, int(summer_by_day.size()) - 1);
        return summer_by_day[size_t(d)] != 0;
    }
};

// daily mean ambient above the mode threshold selects the summer GA settings
inline std::vector<uint8_t> summer_flags(const WeatherTraces& w, double t0_s, int days,
                                         double t_ref_C) {
    std::vector<uint8_t> out;
    for (int d = 0; d < days; ++d) {
        double sum = 0.0;
        for (int h = 0; h < 24; ++h) sum += w.ambient_C(t0_s + d * 86400.0 + h * 3600.0);
        out.push_back(sum / 24.0 > t_ref_C ? 1 : 0);
    }
    return out;
}

struct ActiveBlock {
    bool active = false;
    int start_step = -1;
    int request_idx = -1;
};

struct SimState {
    double t_a_C = 21.0;
    double soc_es = 0.2;
    double soc_ev = 0.8;
    int ev_event_idx = -1;  // index into scenario.ev_events while plugged, else -1
    ActiveBlock laundry, dishwasher;
    std::vector<uint8_t> request_started;  // one flag per appliance request
    int prev_hvac_on = 0;                  // baseline hysteresis memory
};

// Frozen-forecast horizon instance for one MPC step: external inputs held at
// their current observations, tariff expanded over the (possibly shrunken)
// horizon, pending requests translated to horizon-relative windows.
inline HorizonProblem build_horizon(const SimState& st, int k_abs, const Scenario& sc) {
    HorizonProblem p;
    p.dt_s = sc.dt_s;
    const double clock = k_abs * sc.dt_s;
    const double t_h = shrink_horizon(clock, sc.opt.horizon_hours * 3600.0, sc.t_end_s());
    p.n_steps = int(std::llround(t_h / sc.dt_s));

    const double t_abs = sc.abs_time(k_abs);
    p.ambient_C = sc.weather.ambient_C(t_abs);
    p.solar_W = solar_power_W(sc.solar, t_abs, p.ambient_C);
    p.nd_W = k_abs < int(sc.activities.nd_power_W.size()) ? sc.activities.nd_power_W[size_t(k_abs)] : 0.0;
    p.t_set_C = p.ambient_C <= sc.opt.t_ref_C ? sc.opt.heat_set_C : sc.opt.cool_set_C;
    p.band_C = sc.opt.band_C;
    p.band_penalty = sc.opt.band_penalty;
    p.soc_lo = sc.opt.soc_lo;
    p.soc_hi = sc.opt.soc_hi;
    p.p_cap_W = sc.opt.p_cap_W;
    p.c_d = sc.opt.deferral_weight;

    p.price.resize(size_t(p.n_steps));
    for (int j = 0; j < p.n_steps; ++j) p.price[size_t(j)] = price(sc.tou, clock + j * sc.dt_s);
    const double stress = 1.0 + std::abs(p.ambient_C - p.t_set_C) / sc.opt.comfort_t_norm_C;
    p.c_t.assign(size_t(p.n_steps), sc.opt.comfort_weight0 * stress);

    p.hvac = sc.hvac;
    p.house = sc.house;
    p.house.indoor_temp_C = st.t_a_C;
    p.es = sc.es_pack;
    p.es.soc = st.soc_es;
    p.ev = sc.ev_pack;
    p.ev.soc = st.soc_ev;
    p.es_temp_C = p.es.temperature(p.ambient_C, st.t_a_C);
    p.ev_temp_C = sc.ev_pack.fixed_temp_C;

    // committed non-interruptible blocks become a fixed load overlay
    p.committed_defer_W.assign(size_t(p.n_steps), 0.0);
    auto overlay = [&](const ActiveBlock& b, Request::Kind kind) {
        if (!b.active) return;
        const int comp = completion_steps_for(kind, sc.dt_s);
        for (int j = 0; j < p.n_steps; ++j) {
            const int idx = k_abs + j - b.start_step;
            if (idx >= 0 && idx < comp)
                p.committed_defer_W[size_t(j)] += appliance_block_power(kind, idx, sc.dt_s);
        }
    };
    overlay(st.laundry, Request::Kind::Laundry);
    overlay(st.dishwasher, Request::Kind::Dishwasher);

    // earliest pending (enabled, not yet started) request of each kind
    for (size_t i = 0; i < sc.activities.appliance_requests.size(); ++i) {
        const auto& r = sc.activities.appliance_requests[i];
        if (r.enable_step > k_abs || st.request_started[i]) continue;
        PendingBlock& slot = r.kind == Request::Kind::Laundry ? p.laundry : p.dishwasher;
        if (slot.present) continue;
        slot.present = true;
        slot.kind = r.kind;
        slot.enable = r.enable_step - k_abs;
        slot.deadline = std::min(r.deadline_step - k_abs, p.n_steps - 1);
        slot.completion = r.completion_steps;
    }
    if (st.laundry.active) p.laundry.present = false;
    if (st.dishwasher.active) p.dishwasher.present = false;

    if (st.ev_event_idx >= 0) {
        const auto& e = sc.ev_events[size_t(st.ev_event_idx)];
        if (st.soc_ev < e.target_soc - 1e-9) {
            p.ev_req.present = true;
            p.ev_req.enable = e.plug_step - k_abs;
            const int deadline_abs = std::min(e.plug_step + deadline_steps(sc.dt_s), e.depart_step - 1);
            p.ev_req.deadline = std::clamp(deadline_abs - k_abs, 0, p.n_steps - 1);
            p.ev_req.target_soc = e.target_soc;
            const double cap_wh = sc.ev_pack.nominal_voltage() * sc.ev_pack.pack_capacity_Ah();
            const double need_wh = (e.target_soc - st.soc_ev) * cap_wh / sc.ev_pack.round_trip_eff;
            const double step_wh = kLevel2ChargerW * sc.dt_s / 3600.0;
            p.ev_req.completion = std::max(1, int(std::ceil(need_wh / step_wh - 1e-9)));
            const int window = p.ev_req.deadline - std::max(0, p.ev_req.enable) + 1;
            p.ev_req.completion = std::min(p.ev_req.completion, std::max(1, window));
        }
    }

    p.finalize();
    return p;
}

struct StepCommands {
    double hvac = 0.0;  // applied fan command
    double es_current_A = 0.0;
    bool ev_on = false;
    bool start_laundry = false;
    bool start_dishwasher = false;
};

struct MpcTelemetry {
    int ga_generations[3] = {0, 0, 0};
    bool ga_timeout[3] = {false, false, false};
    double ga_wall_s[3] = {0.0, 0.0, 0.0};
    int tabu_passes = 0;
    double wall_s = 0.0;
    bool band_least_violation = false;
    bool cap_unsatisfied = false;
    bool infeasible_request = false;
    double planned_money = 0.0;
    std::string notes;
};

// One HEM control step: build the horizon, run the three sub-problems in
// sequence, enforce the grid cap through the tabu loop, and return the
// first-step commands. Deterministic for a fixed (state, clock, scenario,
// seed).
inline StepCommands mpc_step(const SimState& st, int k_abs, const Scenario& sc, MpcTelemetry& tel) {
    const auto wall0 = std::chrono::steady_clock::now();
    StepCommands cmd;
    HorizonProblem p = build_horizon(st, k_abs, sc);
    if (p.n_steps == 0) return cmd;

    const bool summer = sc.summer_at(k_abs);
    const ga::GaConfig& cfg1 = summer ? sc.ga_settings.hvac_summer : sc.ga_settings.hvac_winter;

    auto sub_rng = [&](int sub, int pass) {
        return make_rng(sc.seed, stream::kGaBase + uint64_t(k_abs) * 64 + uint64_t(sub) * 8 +
                                     uint64_t(pass));
    };

    ControlPlan plan1, plan2, plan3;
    bool has2 = false, has3 = false;
    FinalAssembly fin;
    for (int pass = 0;; ++pass) {
        plan1 = solve_hvac_es(p, cfg1, sub_rng(0, pass));
        has2 = p.ev_req.present;
        if (has2) plan2 = solve_xev_es(p, plan1, sc.ga_settings.xev, sub_rng(1, pass));
        has3 = p.laundry.present || p.dishwasher.present;
        if (has3)
            plan3 = solve_appliances_es(p, plan1, has2 ? plan2 : ControlPlan{},
                                        sc.ga_settings.appliances, sub_rng(2, pass));

        fin = assemble_final(p, plan1, has2 ? &plan2 : nullptr, has3 ? &plan3 : nullptr);
        const auto viol = capping_check(p, fin, has3 ? &plan3 : nullptr, p.tabu);
        if (!viol || pass >= sc.opt.max_tabu_passes) {
            if (viol) {
                // shed ES charging in the violation window, then give up
                ControlPlan& owner = has3 ? plan3 : has2 ? plan2 : plan1;
                for (int k : viol->steps)
                    owner.u_es_A[size_t(k)] = std::max(0.0, owner.u_es_A[size_t(k)]);
                fin = assemble_final(p, plan1, has2 ? &plan2 : nullptr, has3 ? &plan3 : nullptr);
                const auto still = capping_check(p, fin, has3 ? &plan3 : nullptr, p.tabu);
                tel.cap_unsatisfied = still.has_value();
                if (tel.cap_unsatisfied) tel.notes += "grid cap unsatisfied after tabu+shed; ";
            }
            break;
        }
        add_tabu(p.tabu, *viol);
        ++tel.tabu_passes;
    }

    tel.ga_generations[0] = plan1.telemetry.generations;
    tel.ga_timeout[0] = plan1.telemetry.timeout;
    tel.ga_wall_s[0] = plan1.telemetry.wall_s;
    if (has2) {
        tel.ga_generations[1] = plan2.telemetry.generations;
        tel.ga_timeout[1] = plan2.telemetry.timeout;
        tel.ga_wall_s[1] = plan2.telemetry.wall_s;
        if (plan2.least_violation) {
            tel.infeasible_request = true;
            tel.notes += plan2.note + "; ";
        }
    }
    if (has3) {
        tel.ga_generations[2] = plan3.telemetry.generations;
        tel.ga_timeout[2] = plan3.telemetry.timeout;
        tel.ga_wall_s[2] = plan3.telemetry.wall_s;
        if (plan3.least_violation) {
            tel.infeasible_request = true;
            tel.notes += plan3.note + "; ";
        }
    }
    tel.band_least_violation = plan1.least_violation;
    tel.planned_money = fin.money;

    const ControlPlan& owner = has3 ? plan3 : has2 ? plan2 : plan1;
    cmd.hvac = plan1.u_hvac.empty() ? 0.0 : plan1.u_hvac[0];
    cmd.es_current_A = owner.u_es_A.empty() ? 0.0 : owner.u_es_A[0];
    cmd.ev_on = has2 && !plan2.u_xev.empty() && plan2.u_xev[0] != 0;
    cmd.start_laundry = has3 && plan3.k_l == 0;
    cmd.start_dishwasher = has3 && plan3.k_d == 0;
    tel.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return cmd;
}

}  // namespace hemsim
