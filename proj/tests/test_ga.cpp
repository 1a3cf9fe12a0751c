#include <doctest.h>

#include <algorithm>
#include <vector>

#include "pnas/errors.hpp"
#include "pnas/ga.hpp"

using namespace pnas;

namespace {

// Small space (512 genomes) for exhaustive ground truth.
SearchSpaceConfig toy_space() {
    SearchSpaceConfig cfg;
    cfg.num_stages = 2;
    cfg.base_channels = {8, 16};
    cfg.depth_choices = {1, 2};
    cfg.width_choices = {0.5, 1.0};
    cfg.expansion_choices = {0.25, 0.5};
    cfg.input_resolution = 8;
    cfg.num_classes = 10;
    cfg.stage_strides = {1, 2};
    cfg.min_bottleneck_width = 1;
    return cfg;
}

// All genomes of a space, by odometer over the flat index form.
std::vector<ArchGenome> enumerate_space(const SearchSpaceConfig& cfg) {
    const int len = cfg.genome_length();
    std::vector<int> radix;
    for (int i = 0; i < cfg.num_stages; ++i)
        radix.push_back(static_cast<int>(cfg.depth_choices.size()));
    for (int i = 0; i < cfg.num_stages * cfg.max_blocks_per_stage(); ++i)
        radix.push_back(static_cast<int>(cfg.expansion_choices.size()));
    for (int i = 0; i < cfg.num_stages + 1; ++i)
        radix.push_back(static_cast<int>(cfg.width_choices.size()));
    std::vector<ArchGenome> all;
    std::vector<int> flat(static_cast<std::size_t>(len), 0);
    while (true) {
        all.push_back(from_indices(flat, cfg));
        int pos = len - 1;
        while (pos >= 0 && ++flat[static_cast<std::size_t>(pos)] ==
                               radix[static_cast<std::size_t>(pos)]) {
            flat[static_cast<std::size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
    return all;
}

} // namespace

TEST_CASE("crossover splices the flat gene string at the cut") {
    const SearchSpaceConfig cfg;
    Rng rng(1);
    const ArchGenome a = random_genome(cfg, rng);
    const ArchGenome b = random_genome(cfg, rng);
    const std::vector<int> fa = to_indices(a, cfg);
    const std::vector<int> fb = to_indices(b, cfg);
    const std::size_t len = fa.size();

    SUBCASE("cut 0 and cut L reproduce the parents") {
        auto [c0a, c0b] = crossover(a, b, 0, cfg);
        CHECK(c0a == b);
        CHECK(c0b == a);
        auto [cLa, cLb] = crossover(a, b, len, cfg);
        CHECK(cLa == a);
        CHECK(cLb == b);
    }

    SUBCASE("interior cuts take the prefix from one parent, suffix from the other") {
        for (std::size_t cut = 1; cut < len; ++cut) {
            auto [ca, cb] = crossover(a, b, cut, cfg);
            const std::vector<int> ia = to_indices(ca, cfg);
            const std::vector<int> ib = to_indices(cb, cfg);
            for (std::size_t i = 0; i < len; ++i) {
                CHECK(ia[i] == (i < cut ? fa[i] : fb[i]));
                CHECK(ib[i] == (i < cut ? fb[i] : fa[i]));
            }
        }
    }

    SUBCASE("out-of-range cut throws") {
        CHECK_THROWS_AS(crossover(a, b, len + 1, cfg), ConfigError);
    }
}

TEST_CASE("mutation resamples genes at the given rate") {
    const SearchSpaceConfig cfg;
    Rng rng(2);
    const ArchGenome g = random_genome(cfg, rng);

    SUBCASE("probability zero is the identity") {
        Rng r(7);
        CHECK(mutate(g, cfg, 0.0, r) == g);
    }

    SUBCASE("mutants stay valid and same seed gives the same mutant") {
        Rng r1(42), r2(42);
        const ArchGenome m1 = mutate(g, cfg, 0.5, r1);
        const ArchGenome m2 = mutate(g, cfg, 0.5, r2);
        CHECK(m1 == m2);
        CHECK(validate(m1, cfg));
    }

    SUBCASE("rate one touches roughly every gene") {
        // with resampling a gene can land on its old value; count draws instead
        Rng r(3);
        int changed = 0;
        const int trials = 50;
        for (int t = 0; t < trials; ++t) {
            const ArchGenome m = mutate(g, cfg, 1.0, r);
            if (!(m == g)) ++changed;
        }
        CHECK(changed == trials); // 21 genes, all resampled: collision odds ~0
    }
}

TEST_CASE("candidate ordering is total and matches the documented tie-breaks") {
    Candidate a, b;
    a.objective = 2.0;
    b.objective = 1.0;
    CHECK(candidate_better(a, b));
    CHECK_FALSE(candidate_better(b, a));

    b.objective = 2.0;
    a.macs = 100;
    b.macs = 200;
    CHECK(candidate_better(a, b));

    b.macs = 100;
    a.flat = {0, 1, 2};
    b.flat = {0, 2, 0};
    CHECK(candidate_better(a, b));
    b.flat = a.flat;
    CHECK_FALSE(candidate_better(a, b)); // equal: strict order
    CHECK_FALSE(candidate_better(b, a));
}

TEST_CASE("budget search is deterministic and respects the budget") {
    const SearchSpaceConfig cfg;
    const FitnessWeights w;
    GaConfig ga;
    ga.population_size = 24;
    ga.generations = 12;

    BudgetConstraint budget;
    budget.macs_budget = 600'000'000;

    const SearchResult r1 = search_budget(cfg, w, ga, budget, 9001);
    const SearchResult r2 = search_budget(cfg, w, ga, budget, 9001);
    CHECK(r1.best.genome == r2.best.genome);
    CHECK(r1.best.objective == r2.best.objective);
    CHECK(r1.evaluations == r2.evaluations);
    REQUIRE(r1.trace.size() == r2.trace.size());
    for (std::size_t i = 0; i < r1.trace.size(); ++i) {
        CHECK(r1.trace[i].best_f == r2.trace[i].best_f);
        CHECK(r1.trace[i].mean_f == r2.trace[i].mean_f);
        CHECK(r1.trace[i].feasible_fraction == r2.trace[i].feasible_fraction);
    }

    CHECK(r1.best.macs <= budget.macs_budget);
    CHECK(r1.best.report.feasible);
    CHECK(r1.trace.size() == static_cast<std::size_t>(ga.generations) + 1);
    CHECK(r1.trace.front().generation == 0);

    // elitism: best fitness never regresses
    for (std::size_t i = 1; i < r1.trace.size(); ++i)
        CHECK(r1.trace[i].best_f >= r1.trace[i - 1].best_f);

    // feasible fractions are sane
    for (const GaTraceRow& row : r1.trace) {
        CHECK(row.feasible_fraction > 0.0);
        CHECK(row.feasible_fraction <= 1.0);
    }
}

TEST_CASE("different seeds explore differently") {
    const SearchSpaceConfig cfg;
    const FitnessWeights w;
    GaConfig ga;
    ga.population_size = 16;
    ga.generations = 4;
    BudgetConstraint budget;
    budget.macs_budget = 600'000'000;
    const SearchResult a = search_budget(cfg, w, ga, budget, 1);
    const SearchResult b = search_budget(cfg, w, ga, budget, 2);
    // traces differ somewhere (same would mean the seed is ignored)
    bool differs = false;
    for (std::size_t i = 0; i < a.trace.size(); ++i)
        differs = differs || a.trace[i].mean_f != b.trace[i].mean_f;
    CHECK(differs);
}

TEST_CASE("GA finds the exhaustive optimum on the toy space") {
    const SearchSpaceConfig cfg = toy_space();
    const FitnessWeights w;

    const std::vector<ArchGenome> all = enumerate_space(cfg);
    CHECK(all.size() == 512);

    SearchProblem problem;
    problem.cfg = &cfg;
    problem.weights = &w;
    // median-ish budget so about half the space is infeasible
    std::vector<std::int64_t> costs;
    for (const ArchGenome& g : all) costs.push_back(macs(decode(g, cfg)));
    std::sort(costs.begin(), costs.end());
    problem.constraint.macs_budget = costs[costs.size() / 2];

    // exhaustive feasible objective distribution (descending)
    std::vector<double> objs;
    for (const ArchGenome& g : all) {
        const Candidate c = problem.evaluate(g);
        if (problem.feasible(c)) objs.push_back(c.objective);
    }
    REQUIRE(objs.size() > 20);
    std::sort(objs.rbegin(), objs.rend());
    const double top5_cut = objs[objs.size() / 20]; // 5th percentile from the top

    // The top genome here sits across a fitness valley (3 coordinated gene
    // flips from the runner-up), so exact optimality on every seed is not a
    // property a GA has. Rank quality is: every run must land in the top 5%
    // of the feasible distribution, and most runs find the exact optimum.
    GaConfig ga; // production defaults: 64 x 100
    int exact = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const SearchResult r = evolve(problem, ga, seed);
        CHECK(r.best.macs <= problem.constraint.macs_budget);
        CHECK(r.best.objective >= top5_cut);
        if (r.best.objective == objs.front()) ++exact;
    }
    CHECK(exact >= 10);
}

TEST_CASE("impossible budgets raise InfeasibleError") {
    const SearchSpaceConfig cfg;
    const FitnessWeights w;
    GaConfig ga;
    ga.population_size = 8;
    ga.generations = 2;
    ga.max_rejection_attempts = 200;
    BudgetConstraint budget;
    budget.macs_budget = 1000; // far below the smallest genome
    CHECK_THROWS_AS(search_budget(cfg, w, ga, budget, 0), InfeasibleError);
}

TEST_CASE("params budget also constrains the search") {
    const SearchSpaceConfig cfg;
    const FitnessWeights w;
    GaConfig ga;
    ga.population_size = 16;
    ga.generations = 8;
    BudgetConstraint budget;
    budget.macs_budget = 1'000'000'000;
    budget.params_budget = 5'000'000;
    const SearchResult r = search_budget(cfg, w, ga, budget, 5);
    CHECK(r.best.macs <= *&budget.macs_budget);
    CHECK(r.best.params <= *budget.params_budget);
}

TEST_CASE("GA config validation") {
    GaConfig ga;
    ga.validate();
    ga.population_size = 1;
    CHECK_THROWS_AS(ga.validate(), ConfigError);
    ga = GaConfig{};
    ga.tournament_size = 0;
    CHECK_THROWS_AS(ga.validate(), ConfigError);
    ga = GaConfig{};
    ga.mutation_prob = 1.5;
    CHECK_THROWS_AS(ga.validate(), ConfigError);
    ga = GaConfig{};
    ga.elitism_count = ga.population_size;
    CHECK_THROWS_AS(ga.validate(), ConfigError);
}

TEST_CASE("trace CSV is stable and parseable") {
    std::vector<GaTraceRow> trace{{0, 1.5, 1.0, 0.5}, {1, 2.0, 1.5, 0.25}};
    const std::string csv = trace_to_csv(trace);
    CHECK(csv == "generation,best_f,mean_f,feasible_fraction\n"
                 "0,1.5,1,0.5\n"
                 "1,2,1.5,0.25\n");
}
