// Times the OpenMP kernels against their scalar reference twins and checks
// that both produce bit-identical results while doing so. Usage:
//   bench_kernels [reps]

#include <omp.h>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <vector>

#include "pnas/archspace.hpp"
#include "pnas/fedsim.hpp"
#include "pnas/fitness.hpp"
#include "pnas/ga.hpp"
#include "pnas/pareto_cache.hpp"
#include "pnas/rng.hpp"

using namespace pnas;
namespace chrono = std::chrono;

namespace {

double now_ms() {
    return chrono::duration<double, std::milli>(
               chrono::steady_clock::now().time_since_epoch())
        .count();
}

bool same_bits(const TensorSet& a, const TensorSet& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t t = 0; t < a.size(); ++t)
        if (a[t] != b[t]) return false;
    return true;
}

double checksum(const TensorSet& ts) {
    double s = 0.0;
    for (const auto& v : ts)
        for (double x : v) s += x;
    return s;
}

// Quarter-width copy of the full space: big enough that the parallel loops
// have real work, small enough that five client deltas fit in memory.
SearchSpaceConfig bench_space() {
    SearchSpaceConfig cfg;
    cfg.base_channels = {64, 128, 256, 512};
    return cfg;
}

void report(const char* name, double serial_ms, double omp_ms, bool identical) {
    std::cout << name << "  serial " << serial_ms << " ms  omp " << omp_ms
              << " ms  speedup " << serial_ms / omp_ms << "x  identical "
              << (identical ? "yes" : "NO") << '\n';
}

} // namespace

int main(int argc, char** argv) {
    const int reps = argc > 1 ? std::atoi(argv[1]) : 5;
    std::cout << "threads " << omp_get_max_threads() << "  reps " << reps << '\n';

    const SearchSpaceConfig cfg = bench_space();
    const SupernetState state = init_supernet(cfg, 1);
    std::cout << "supernet params " << state.layout.total_params() << '\n';

    FedsimConfig fed;
    const std::vector<ClientState> clients = make_clients(state.layout, fed, 2);

    // one subnet per client, the widest net for client 0
    Rng rng(3);
    std::vector<Subnet> subnets;
    subnets.push_back(extract_subnet(state, cfg, max_genome(cfg)));
    for (int k = 1; k < 5; ++k)
        subnets.push_back(extract_subnet(state, cfg, random_genome(cfg, rng)));

    // ---- local_train: E full-batch GD steps on the masked quadratic
    TensorSet delta_omp, delta_ser;
    double t_ser = 0.0, t_omp = 0.0;
    for (int r = 0; r < reps; ++r) {
        double t0 = now_ms();
        delta_ser = local_train_serial(subnets[0], clients[0], fed.local_epochs, fed.eta);
        t_ser += now_ms() - t0;
        t0 = now_ms();
        delta_omp = local_train(subnets[0], clients[0], fed.local_epochs, fed.eta);
        t_omp += now_ms() - t0;
    }
    const bool train_same = same_bits(delta_omp, delta_ser);
    report("local_train      ", t_ser / reps, t_omp / reps, train_same);

    // ---- maxnet_aggregate: overlap-aware merge of five client deltas
    std::vector<TensorSet> deltas;
    for (int k = 0; k < 5; ++k)
        deltas.push_back(local_train(subnets[k], clients[k], fed.local_epochs, fed.eta));
    std::vector<Contribution> contribs;
    for (int k = 0; k < 5; ++k)
        contribs.push_back({&deltas[k], &subnets[k].mask});

    TensorSet agg_omp, agg_ser;
    t_ser = t_omp = 0.0;
    for (int r = 0; r < reps; ++r) {
        double t0 = now_ms();
        agg_ser = maxnet_aggregate_serial(contribs, 0, 0.5, fed.epsilon);
        t_ser += now_ms() - t0;
        t0 = now_ms();
        agg_omp = maxnet_aggregate(contribs, 0, 0.5, fed.epsilon);
        t_omp += now_ms() - t0;
    }
    const bool agg_same = same_bits(agg_omp, agg_ser);
    report("maxnet_aggregate ", t_ser / reps, t_omp / reps, agg_same);
    std::cout << "aggregate checksum " << checksum(agg_omp) << '\n';

    // ---- build_cache: independent GA runs, one per budget, OpenMP across
    // budgets. Same master seed => same cache no matter the thread count.
    GaConfig ga;
    ga.population_size = 24;
    ga.generations = 10;
    FitnessWeights weights;
    const SpaceBounds b = space_bounds(cfg);
    const std::vector<double> budgets = discretize_budgets(
        0.15 * static_cast<double>(b.max_macs), static_cast<double>(b.max_macs), 8);

    const int hw_threads = omp_get_max_threads();
    omp_set_num_threads(1);
    double t0 = now_ms();
    const CacheBuildResult one = build_cache(cfg, weights, ga, budgets, 7);
    const double cache_ser = now_ms() - t0;
    omp_set_num_threads(hw_threads);
    t0 = now_ms();
    const CacheBuildResult many = build_cache(cfg, weights, ga, budgets, 7);
    const double cache_omp = now_ms() - t0;

    bool cache_same = one.cache.entries.size() == many.cache.entries.size();
    for (std::size_t i = 0; cache_same && i < one.cache.entries.size(); ++i)
        cache_same = one.cache.entries[i].fitness == many.cache.entries[i].fitness &&
                     one.cache.entries[i].genome == many.cache.entries[i].genome;
    report("build_cache      ", cache_ser, cache_omp, cache_same);

    if (!train_same || !agg_same || !cache_same) {
        std::cout << "MISMATCH between serial and parallel kernels\n";
        return 1;
    }
    return 0;
}
