#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "pnas/errors.hpp"
#include "pnas/pareto_cache.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace pnas;

namespace {
// Small-but-real space so per-budget searches stay fast.
SearchSpaceConfig cache_space() {
    SearchSpaceConfig cfg;
    cfg.num_stages = 2;
    cfg.base_channels = {32, 64};
    cfg.depth_choices = {1, 2, 3};
    cfg.width_choices = {0.25, 0.5, 0.75, 1.0};
    cfg.expansion_choices = {0.25, 0.5};
    cfg.input_resolution = 16;
    cfg.num_classes = 10;
    cfg.stage_strides = {1, 2};
    cfg.min_bottleneck_width = 4;
    return cfg;
}

GaConfig small_ga() {
    GaConfig ga;
    ga.population_size = 16;
    ga.generations = 10;
    return ga;
}
} // namespace

TEST_CASE("budget discretization is equidistant and endpoint-inclusive") {
    const std::vector<double> b = discretize_budgets(100.0, 500.0, 5);
    REQUIRE(b.size() == 5);
    CHECK(b.front() == 100.0);
    CHECK(b.back() == 500.0);
    CHECK(b[1] == doctest::Approx(200.0));
    CHECK(b[2] == doctest::Approx(300.0));
    CHECK(b[3] == doctest::Approx(400.0));

    const std::vector<double> two = discretize_budgets(1.0, 2.0, 2);
    CHECK(two == std::vector<double>{1.0, 2.0});

    CHECK_THROWS_AS(discretize_budgets(1.0, 2.0, 1), ConfigError);
    CHECK_THROWS_AS(discretize_budgets(2.0, 1.0, 4), ConfigError);
    CHECK_THROWS_AS(discretize_budgets(1.0, 1.0, 4), ConfigError);
}

TEST_CASE("cache build produces one sorted feasible entry per budget") {
    const SearchSpaceConfig cfg = cache_space();
    const FitnessWeights w;
    const SpaceBounds bounds = space_bounds(cfg);
    const std::vector<double> budgets = discretize_budgets(
        static_cast<double>(bounds.min_macs) * 1.2, static_cast<double>(bounds.max_macs), 6);

    const CacheBuildResult res = build_cache(cfg, w, small_ga(), budgets, 77);
    const ParetoCache& cache = res.cache;
    REQUIRE(cache.entries.size() == budgets.size());
    CHECK(cache.space_hash == cfg.hash());
    CHECK(cache.weights_hash == w.hash());
    CHECK(cache.master_seed == 77);
    CHECK(res.budget_seconds.size() == budgets.size());

    for (std::size_t i = 0; i < cache.entries.size(); ++i) {
        const CacheEntry& e = cache.entries[i];
        CHECK(e.budget_macs == budgets[i]);
        CHECK(static_cast<double>(e.macs) <= e.budget_macs);
        CHECK(validate(e.genome, cfg));
        CHECK(e.macs == macs(decode(e.genome, cfg)));
        CHECK(e.params == params(decode(e.genome, cfg)));
        if (i > 0) CHECK(e.budget_macs > cache.entries[i - 1].budget_macs);
    }
}

TEST_CASE("cache build is deterministic across thread counts") {
    const SearchSpaceConfig cfg = cache_space();
    const FitnessWeights w;
    const SpaceBounds bounds = space_bounds(cfg);
    const std::vector<double> budgets = discretize_budgets(
        static_cast<double>(bounds.min_macs) * 1.2, static_cast<double>(bounds.max_macs), 5);

#ifdef _OPENMP
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
#endif
    const CacheBuildResult serial = build_cache(cfg, w, small_ga(), budgets, 123);
#ifdef _OPENMP
    omp_set_num_threads(saved);
#endif
    const CacheBuildResult parallel = build_cache(cfg, w, small_ga(), budgets, 123);

    REQUIRE(serial.cache.entries.size() == parallel.cache.entries.size());
    for (std::size_t i = 0; i < serial.cache.entries.size(); ++i) {
        CHECK(serial.cache.entries[i].genome == parallel.cache.entries[i].genome);
        CHECK(serial.cache.entries[i].fitness == parallel.cache.entries[i].fitness);
    }
}

TEST_CASE("larger budgets never hurt the achievable fitness much") {
    // monotone in expectation; with independent seeds allow small dips
    const SearchSpaceConfig cfg = cache_space();
    const FitnessWeights w;
    const SpaceBounds bounds = space_bounds(cfg);
    GaConfig ga;
    ga.population_size = 32;
    ga.generations = 20;
    const std::vector<double> budgets = discretize_budgets(
        static_cast<double>(bounds.min_macs) * 1.5, static_cast<double>(bounds.max_macs), 8);
    const CacheBuildResult res = build_cache(cfg, w, ga, budgets, 5);
    double best_so_far = res.cache.entries.front().fitness;
    for (const CacheEntry& e : res.cache.entries) {
        CHECK(e.fitness >= best_so_far * 0.99 - 1e-9);
        best_so_far = std::max(best_so_far, e.fitness);
    }
}

TEST_CASE("cache JSON and file round-trips preserve everything") {
    const SearchSpaceConfig cfg = cache_space();
    const FitnessWeights w;
    const SpaceBounds bounds = space_bounds(cfg);
    const std::vector<double> budgets = discretize_budgets(
        static_cast<double>(bounds.min_macs) * 1.2, static_cast<double>(bounds.max_macs), 4);
    const ParetoCache cache = build_cache(cfg, w, small_ga(), budgets, 9).cache;

    const json j = cache_to_json(cache, cfg);
    const ParetoCache back = cache_from_json(j, cfg, w);
    REQUIRE(back.entries.size() == cache.entries.size());
    for (std::size_t i = 0; i < cache.entries.size(); ++i) {
        CHECK(back.entries[i].genome == cache.entries[i].genome);
        CHECK(back.entries[i].fitness == cache.entries[i].fitness);
        CHECK(back.entries[i].budget_macs == cache.entries[i].budget_macs);
        CHECK(back.entries[i].macs == cache.entries[i].macs);
        CHECK(back.entries[i].params == cache.entries[i].params);
    }

    const std::string path =
        (std::filesystem::temp_directory_path() / "pnas_cache_rt.json").string();
    save_cache(path, cache, cfg);
    const ParetoCache loaded = load_cache(path, cfg, w);
    CHECK(loaded.entries.size() == cache.entries.size());
    CHECK(loaded.master_seed == cache.master_seed);
    std::filesystem::remove(path);
}

TEST_CASE("cache loading refuses config mismatches") {
    const SearchSpaceConfig cfg = cache_space();
    const FitnessWeights w;
    const SpaceBounds bounds = space_bounds(cfg);
    const std::vector<double> budgets = discretize_budgets(
        static_cast<double>(bounds.min_macs) * 1.2, static_cast<double>(bounds.max_macs), 3);
    const ParetoCache cache = build_cache(cfg, w, small_ga(), budgets, 1).cache;
    const json j = cache_to_json(cache, cfg);

    SearchSpaceConfig other = cfg;
    other.num_classes = 17;
    CHECK_THROWS_AS(cache_from_json(j, other, w), ConfigError);

    FitnessWeights w2;
    w2.omega = 3.0;
    CHECK_THROWS_AS(cache_from_json(j, cfg, w2), ConfigError);
}

TEST_CASE("cache stats use the population standard deviation") {
    ParetoCache cache;
    for (double f : {1.0, 2.0, 3.0, 4.0}) {
        CacheEntry e;
        e.fitness = f;
        cache.entries.push_back(e);
    }
    const CacheStats s = cache_stats(cache);
    CHECK(s.mean_fitness == 2.5);
    CHECK(s.std_fitness == doctest::Approx(std::sqrt(1.25)).epsilon(1e-12));
}

TEST_CASE("sensitivity sweep returns one row per n with sane stats") {
    const SearchSpaceConfig cfg = cache_space();
    const FitnessWeights w;
    const SpaceBounds bounds = space_bounds(cfg);
    const std::vector<int> ns{3, 5};
    const std::vector<SweepRow> rows =
        sensitivity_sweep(cfg, w, small_ga(), ns, static_cast<double>(bounds.min_macs) * 1.2,
                          static_cast<double>(bounds.max_macs), 33);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].n == 3);
    CHECK(rows[1].n == 5);
    for (const SweepRow& r : rows) {
        CHECK(r.mean_fitness > 0.0);
        CHECK(r.std_fitness >= 0.0);
    }
    // reproducible
    const std::vector<SweepRow> again =
        sensitivity_sweep(cfg, w, small_ga(), ns, static_cast<double>(bounds.min_macs) * 1.2,
                          static_cast<double>(bounds.max_macs), 33);
    CHECK(again[0].mean_fitness == rows[0].mean_fitness);
    CHECK(again[1].std_fitness == rows[1].std_fitness);
}

TEST_CASE("cache CSV has the documented column layout") {
    ParetoCache cache;
    CacheEntry e;
    e.budget_macs = 1.5e8;
    e.fitness = 42.25;
    e.macs = 123;
    e.params = 456;
    cache.entries.push_back(e);
    CHECK(cache_to_csv(cache) == "budget_macs,macs,params,fitness\n"
                                 "1.5e+08,123,456,42.25\n");
}

TEST_CASE("unsatisfiable budgets surface as InfeasibleError") {
    const SearchSpaceConfig cfg = cache_space();
    const FitnessWeights w;
    GaConfig ga = small_ga();
    ga.max_rejection_attempts = 100;
    CHECK_THROWS_AS(build_cache(cfg, w, ga, {10.0, 20.0}, 0), InfeasibleError);
}
