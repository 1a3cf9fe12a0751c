#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pnas/archspace.hpp"
#include "pnas/fitness.hpp"

// Per-budget genetic search. Generational GA with tournament selection,
// single-point crossover on the flat gene string (d || e || w), per-gene
// mutation, elitism, and rejection sampling against the hard constraints
// (MACs budget, optional params/latency budgets, rho <= rho0).
//
// Deterministic: one RNG stream per search; fixed seed => bit-identical
// winner and trace regardless of thread count.

namespace pnas {

struct GaConfig {
    int population_size = 64;
    int generations = 100;
    int tournament_size = 4;
    double mutation_prob = 0.1;
    int elitism_count = 1;
    int max_rejection_attempts = 10000; // consecutive failures => InfeasibleError

    void validate() const; // throws ConfigError
};

void to_json(json& j, const GaConfig& c);
void from_json(const json& j, GaConfig& c);

struct BudgetConstraint {
    std::int64_t macs_budget = 0;
    std::optional<std::int64_t> params_budget;
    std::optional<double> latency_budget_ms; // requires a latency fn
    double rho0 = 0.5;
};

// Predicted latency for a genome (ms). Empty function = latency unused.
using LatencyFn = std::function<double(const ArchGenome&)>;

struct Candidate {
    ArchGenome genome;
    std::vector<int> flat;  // index form, kept for tie-breaks and output
    FitnessReport report;
    std::int64_t macs = 0;
    std::int64_t params = 0;
    double latency_ms = 0.0; // meaningful only when latency fn present
    double objective = 0.0;  // report.total, minus delta*latency in soft mode
};

// Total preference order: higher objective, then lower MACs, then
// lexicographically smaller flat genome.
bool candidate_better(const Candidate& a, const Candidate& b);

struct GaTraceRow {
    int generation = 0;
    double best_f = 0.0;
    double mean_f = 0.0;
    // Accepted / attempted offspring this generation (population members are
    // feasible by construction, so this is the informative ratio).
    double feasible_fraction = 0.0;
};

struct SearchResult {
    Candidate best;
    std::vector<GaTraceRow> trace; // row 0 = initial population
    long long evaluations = 0;
};

// Exposed GA primitives (unit-tested directly).
std::pair<ArchGenome, ArchGenome> crossover(const ArchGenome& a, const ArchGenome& b,
                                            std::size_t cut, const SearchSpaceConfig& cfg);
ArchGenome mutate(const ArchGenome& g, const SearchSpaceConfig& cfg,
                  double per_gene_prob, Rng& rng);

// Everything the search needs bundled; deploy extends it with latency.
struct SearchProblem {
    const SearchSpaceConfig* cfg = nullptr;
    const FitnessWeights* weights = nullptr;
    BudgetConstraint constraint;
    LatencyFn latency;     // optional
    double delta = 0.0;    // soft latency penalty weight

    Candidate evaluate(const ArchGenome& g) const;
    bool feasible(const Candidate& c) const;
};

// Rejection-sampled feasible population of exactly size n.
// attempts/accepted are accumulated for the trace when non-null.
std::vector<Candidate> init_population(const SearchProblem& problem, const GaConfig& ga,
                                       Rng& rng, long long* attempts = nullptr,
                                       long long* accepted = nullptr);

SearchResult evolve(const SearchProblem& problem, const GaConfig& ga, std::uint64_t seed);

// Plain budget-constrained search (no latency terms).
SearchResult search_budget(const SearchSpaceConfig& cfg, const FitnessWeights& weights,
                           const GaConfig& ga, const BudgetConstraint& constraint,
                           std::uint64_t seed);

// generation,best_f,mean_f,feasible_fraction
std::string trace_to_csv(const std::vector<GaTraceRow>& trace);

} // namespace pnas
