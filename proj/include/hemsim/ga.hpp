#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace hemsim::ga {

// Settings per sub-problem (maximum generations, stall limit, elite count,
// objective tolerance, time limit, population size, crossover fraction).
struct GaConfig {
    int max_generations = 500;
    int max_stalled = 50;
    int elite_count = 10;
    double objective_tolerance = 1e-2;
    double time_limit_s = 30.0;
    int population_size = 100;
    double crossover_fraction = 0.4;

    void validate() const {
        if (elite_count >= population_size)
            throw std::invalid_argument("ga: elite_count must be < population_size");
        if (crossover_fraction < 0.0 || crossover_fraction > 1.0)
            throw std::invalid_argument("ga: crossover_fraction must be in [0,1]");
        if (population_size < 2 || max_generations < 1)
            throw std::invalid_argument("ga: degenerate population/generations");
    }
};

inline GaConfig hvac_settings(bool summer) {
    GaConfig c;
    c.elite_count = 10;
    c.objective_tolerance = summer ? 1e-2 : 1e-3;
    c.population_size = summer ? 100 : 50;
    c.crossover_fraction = summer ? 0.4 : 0.2;
    return c;
}

inline GaConfig xev_settings() {
    GaConfig c;
    c.elite_count = 15;
    c.objective_tolerance = 1e-4;
    c.population_size = 250;
    c.crossover_fraction = 0.4;
    return c;
}

inline GaConfig appliance_settings() {
    GaConfig c;
    c.elite_count = 20;
    c.objective_tolerance = 1e-3;
    c.population_size = 250;
    c.crossover_fraction = 0.2;
    return c;
}

// One candidate solution. The meaning of the genes is owned by the encoding.
struct Genome {
    std::vector<double> genes;
};

// Binary command vector with ones exactly at the listed activation steps.
inline std::vector<uint8_t> decode_xev(const std::vector<int>& activation_steps, int n_h) {
    std::vector<uint8_t> u(size_t(n_h), 0);
    for (int k : activation_steps) {
        if (k < 0 || k >= n_h)
            throw std::invalid_argument("decode_xev: activation step out of range");
        if (u[size_t(k)])
            throw std::invalid_argument("decode_xev: duplicate activation step");
        u[size_t(k)] = 1;
    }
    return u;
}

// Single contiguous block of ones of length c starting at k_start.
inline std::vector<uint8_t> decode_block(int k_start, int c, int n_h) {
    if (k_start < 0 || c < 1 || k_start + c > n_h)
        throw std::invalid_argument("decode_block: block exceeds horizon");
    std::vector<uint8_t> u(size_t(n_h), 0);
    std::fill(u.begin() + k_start, u.begin() + k_start + c, 1);
    return u;
}

template <class Encoding>
std::vector<Genome> init_population(const Encoding& enc, int size, std::mt19937_64& rng) {
    std::vector<Genome> pop;
    pop.reserve(size_t(size));
    for (int i = 0; i < size; ++i) pop.push_back(enc.random(rng));
    return pop;
}

struct EvolveResult {
    Genome best;
    double fitness = std::numeric_limits<double>::infinity();
    int generations = 0;
    int evaluations = 0;
    bool timeout = false;
    bool stalled = false;
};

// Elitist generational GA (selection = elites, children from crossover and
// mutation of elite parents). Stops on generation cap, stall count (no
// improvement beyond the objective tolerance), or the wall-clock limit.
template <class Encoding, class Objective>
EvolveResult evolve(const Encoding& enc, const Objective& objective, const GaConfig& cfg,
                    std::mt19937_64& rng) {
    cfg.validate();
    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed_s = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    };

    std::vector<Genome> pop = init_population(enc, cfg.population_size, rng);
    std::vector<double> fit(pop.size());
    std::vector<size_t> order(pop.size());

    EvolveResult res;
    int stall = 0;

    for (int gen = 0; gen < cfg.max_generations; ++gen) {
        for (size_t i = 0; i < pop.size(); ++i) fit[i] = objective(pop[i]);
        res.evaluations += int(pop.size());
        res.generations = gen + 1;

        std::iota(order.begin(), order.end(), size_t(0));
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return fit[a] < fit[b]; });

        const double gen_best = fit[order[0]];
        if (gen_best < res.fitness - cfg.objective_tolerance) {
            stall = 0;
        } else {
            ++stall;
        }
        if (gen_best < res.fitness) {
            res.fitness = gen_best;
            res.best = pop[order[0]];
        }

        if (stall >= cfg.max_stalled) {
            res.stalled = true;
            break;
        }
        if (elapsed_s() > cfg.time_limit_s) {
            res.timeout = true;
            break;
        }

        // next generation: elites survive unchanged, elite parents breed the rest
        const int n_elite = std::min<int>(cfg.elite_count, int(pop.size()));
        std::vector<Genome> next;
        next.reserve(pop.size());
        for (int e = 0; e < n_elite; ++e) next.push_back(pop[order[size_t(e)]]);

        const int n_children = int(pop.size()) - n_elite;
        const int n_cross = int(std::lround(cfg.crossover_fraction * n_children));
        std::uniform_int_distribution<int> pick(0, n_elite - 1);
        for (int i = 0; i < n_children; ++i) {
            if (i < n_cross && n_elite >= 2) {
                int a = pick(rng), b = pick(rng);
                while (b == a) b = pick(rng);
                Genome child = enc.crossover(next[size_t(a)], next[size_t(b)], rng);
                enc.repair(child, rng);
                next.push_back(std::move(child));
            } else {
                Genome child = next[size_t(pick(rng))];
                enc.mutate(child, rng);
                enc.repair(child, rng);
                next.push_back(std::move(child));
            }
        }
        pop.swap(next);
    }
    return res;
}

}  // namespace hemsim::ga
