#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "pnas/ga.hpp"

// Pareto path cache: one GA winner per MACs budget, sorted by budget.
// Budget searches are independent (derived seed per budget index) and run
// in parallel; results are deterministic for a fixed master seed.

namespace pnas {

struct CacheEntry {
    double budget_macs = 0.0;
    ArchGenome genome;
    double fitness = 0.0;
    std::int64_t macs = 0;
    std::int64_t params = 0;
};

struct ParetoCache {
    int version = 1;
    std::uint64_t space_hash = 0;
    std::uint64_t weights_hash = 0;
    std::uint64_t master_seed = 0;
    std::vector<CacheEntry> entries; // sorted by budget ascending
};

// n equidistant budgets including both endpoints. n >= 2, min < max.
std::vector<double> discretize_budgets(double min_macs, double max_macs, int n);

struct CacheBuildResult {
    ParetoCache cache;
    std::vector<double> budget_seconds; // wall clock per budget (manifest only)
    double total_seconds = 0.0;
};

CacheBuildResult build_cache(const SearchSpaceConfig& cfg, const FitnessWeights& weights,
                             const GaConfig& ga, const std::vector<double>& budgets,
                             std::uint64_t master_seed);

struct CacheStats {
    double mean_fitness = 0.0;
    double std_fitness = 0.0; // population std
};

CacheStats cache_stats(const ParetoCache& cache);

struct SweepRow {
    int n = 0;
    double mean_fitness = 0.0;
    double std_fitness = 0.0;
};

// Rebuilds the cache at each n over the same budget range; each n gets its
// own derived master seed so rows are independent but reproducible.
std::vector<SweepRow> sensitivity_sweep(const SearchSpaceConfig& cfg,
                                        const FitnessWeights& weights, const GaConfig& ga,
                                        const std::vector<int>& n_values, double min_macs,
                                        double max_macs, std::uint64_t master_seed);

// Versioned JSON with embedded config hashes; loading verifies them
// against the active config and refuses mismatches.
json cache_to_json(const ParetoCache& cache, const SearchSpaceConfig& cfg);
ParetoCache cache_from_json(const json& j, const SearchSpaceConfig& cfg,
                            const FitnessWeights& weights);

void save_cache(const std::string& path, const ParetoCache& cache,
                const SearchSpaceConfig& cfg);
ParetoCache load_cache(const std::string& path, const SearchSpaceConfig& cfg,
                       const FitnessWeights& weights);

// budget_macs,macs,params,fitness — the plotting table.
std::string cache_to_csv(const ParetoCache& cache);

} // namespace pnas
