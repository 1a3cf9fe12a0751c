#include "pnas/pareto_cache.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "pnas/errors.hpp"
#include "pnas/io.hpp"

namespace pnas {

std::vector<double> discretize_budgets(double min_macs, double max_macs, int n) {
    if (n < 2) throw ConfigError("budget grid needs n >= 2");
    if (!(min_macs < max_macs)) throw ConfigError("budget grid needs min < max");
    std::vector<double> budgets(static_cast<std::size_t>(n));
    const double step = (max_macs - min_macs) / static_cast<double>(n - 1);
    for (int i = 0; i < n; ++i) budgets[static_cast<std::size_t>(i)] = min_macs + step * i;
    budgets.front() = min_macs;
    budgets.back() = max_macs; // exact endpoints
    return budgets;
}

CacheBuildResult build_cache(const SearchSpaceConfig& cfg, const FitnessWeights& weights,
                             const GaConfig& ga, const std::vector<double>& budgets,
                             std::uint64_t master_seed) {
    cfg.validate();
    if (budgets.empty()) throw ConfigError("build_cache needs at least one budget");

    const int n = static_cast<int>(budgets.size());
    CacheBuildResult out;
    out.cache.space_hash = cfg.hash();
    out.cache.weights_hash = weights.hash();
    out.cache.master_seed = master_seed;
    out.cache.entries.resize(static_cast<std::size_t>(n));
    out.budget_seconds.assign(static_cast<std::size_t>(n), 0.0);

    const auto t0 = std::chrono::steady_clock::now();
    std::string error;
    // Budget searches are independent; each draws from its own derived seed,
    // so the result is identical at any thread count.
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        try {
            const auto b0 = std::chrono::steady_clock::now();
            BudgetConstraint constraint;
            constraint.macs_budget =
                static_cast<std::int64_t>(std::floor(budgets[static_cast<std::size_t>(i)]));
            constraint.rho0 = weights.rho0;
            const SearchResult res = search_budget(
                cfg, weights, ga, constraint,
                mix_seed(master_seed, static_cast<std::uint64_t>(i)));
            CacheEntry& e = out.cache.entries[static_cast<std::size_t>(i)];
            e.budget_macs = budgets[static_cast<std::size_t>(i)];
            e.genome = res.best.genome;
            e.fitness = res.best.report.total;
            e.macs = res.best.macs;
            e.params = res.best.params;
            out.budget_seconds[static_cast<std::size_t>(i)] =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - b0).count();
        } catch (const std::exception& ex) {
#pragma omp critical
            if (error.empty()) error = ex.what();
        }
    }
    if (!error.empty()) throw InfeasibleError(error);
    out.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // budgets may arrive in any order; entries are kept sorted.
    std::sort(out.cache.entries.begin(), out.cache.entries.end(),
              [](const CacheEntry& a, const CacheEntry& b) {
                  return a.budget_macs < b.budget_macs;
              });
    return out;
}

CacheStats cache_stats(const ParetoCache& cache) {
    if (cache.entries.empty()) throw ConfigError("cache is empty");
    CacheStats s;
    for (const CacheEntry& e : cache.entries) s.mean_fitness += e.fitness;
    s.mean_fitness /= static_cast<double>(cache.entries.size());
    double var = 0.0;
    for (const CacheEntry& e : cache.entries) {
        const double d = e.fitness - s.mean_fitness;
        var += d * d;
    }
    var /= static_cast<double>(cache.entries.size()); // population variance
    s.std_fitness = std::sqrt(var);
    return s;
}

std::vector<SweepRow> sensitivity_sweep(const SearchSpaceConfig& cfg,
                                        const FitnessWeights& weights, const GaConfig& ga,
                                        const std::vector<int>& n_values, double min_macs,
                                        double max_macs, std::uint64_t master_seed) {
    std::vector<SweepRow> rows;
    rows.reserve(n_values.size());
    for (int n : n_values) {
        const std::vector<double> budgets = discretize_budgets(min_macs, max_macs, n);
        const CacheBuildResult built =
            build_cache(cfg, weights, ga, budgets,
                        mix_seed(master_seed, static_cast<std::uint64_t>(n)));
        const CacheStats stats = cache_stats(built.cache);
        rows.push_back({n, stats.mean_fitness, stats.std_fitness});
    }
    return rows;
}

json cache_to_json(const ParetoCache& cache, const SearchSpaceConfig& cfg) {
    json entries = json::array();
    for (const CacheEntry& e : cache.entries) {
        entries.push_back(json{{"budget_macs", e.budget_macs},
                               {"genome", genome_to_json(e.genome, cfg)},
                               {"fitness", e.fitness},
                               {"macs", e.macs},
                               {"params", e.params}});
    }
    return json{{"format", "pareto-cache"},
                {"version", cache.version},
                {"space_hash", hex64(cache.space_hash)},
                {"weights_hash", hex64(cache.weights_hash)},
                {"master_seed", cache.master_seed},
                {"space", cfg},
                {"entries", entries}};
}

ParetoCache cache_from_json(const json& j, const SearchSpaceConfig& cfg,
                            const FitnessWeights& weights) {
    if (j.value("format", "") != "pareto-cache") throw ConfigError("not a pareto-cache file");
    ParetoCache cache;
    cache.version = j.at("version").get<int>();
    if (cache.version != 1) throw ConfigError("unsupported cache version");
    cache.space_hash = std::stoull(j.at("space_hash").get<std::string>(), nullptr, 16);
    cache.weights_hash = std::stoull(j.at("weights_hash").get<std::string>(), nullptr, 16);
    cache.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (cache.space_hash != cfg.hash())
        throw ConfigError("cache was built for a different search space (hash mismatch)");
    if (cache.weights_hash != weights.hash())
        throw ConfigError("cache was built with different fitness weights (hash mismatch)");
    for (const json& ej : j.at("entries")) {
        CacheEntry e;
        e.budget_macs = ej.at("budget_macs").get<double>();
        e.genome = genome_from_json(ej.at("genome"), cfg);
        e.fitness = ej.at("fitness").get<double>();
        e.macs = ej.at("macs").get<std::int64_t>();
        e.params = ej.at("params").get<std::int64_t>();
        cache.entries.push_back(std::move(e));
    }
    if (!std::is_sorted(cache.entries.begin(), cache.entries.end(),
                        [](const CacheEntry& a, const CacheEntry& b) {
                            return a.budget_macs < b.budget_macs;
                        }))
        throw ConfigError("cache entries are not sorted by budget");
    return cache;
}

void save_cache(const std::string& path, const ParetoCache& cache,
                const SearchSpaceConfig& cfg) {
    atomic_write_text(path, cache_to_json(cache, cfg).dump(2) + "\n");
}

ParetoCache load_cache(const std::string& path, const SearchSpaceConfig& cfg,
                       const FitnessWeights& weights) {
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw IoError("bad cache JSON in " + path + ": " + e.what());
    }
    return cache_from_json(j, cfg, weights);
}

std::string cache_to_csv(const ParetoCache& cache) {
    std::ostringstream out;
    out << "budget_macs,macs,params,fitness\n";
    for (const CacheEntry& e : cache.entries)
        out << fmt_double(e.budget_macs) << ',' << e.macs << ',' << e.params << ','
            << fmt_double(e.fitness) << '\n';
    return out.str();
}

} // namespace pnas
