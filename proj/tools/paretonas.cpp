// paretonas — one binary for the whole pipeline: space bounds, Pareto cache
// builds and stats, cache-size sensitivity, simulated federated supernet
// training, latency data/predictor handling, deployment search, and the
// random-search baseline. All randomness flows from --seed; every output file
// is byte-reproducible from (config, seed, command). Wall-clock data goes to
// manifest.json only.

#include <omp.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pnas/archspace.hpp"
#include "pnas/config.hpp"
#include "pnas/deploy.hpp"
#include "pnas/errors.hpp"
#include "pnas/fedsim.hpp"
#include "pnas/fitness.hpp"
#include "pnas/ga.hpp"
#include "pnas/io.hpp"
#include "pnas/latency.hpp"
#include "pnas/manifest.hpp"
#include "pnas/pareto_cache.hpp"
#include "pnas/rng.hpp"

namespace fs = std::filesystem;
using namespace pnas;

namespace {

// "600M", "0.6G", "458.2M", "130397" -> ops/bytes as an integer count
std::int64_t parse_size(const std::string& text) {
    if (text.empty()) throw ConfigError("size value is empty");
    double scale = 1.0;
    std::string num = text;
    switch (std::toupper(static_cast<unsigned char>(text.back()))) {
        case 'K': scale = 1e3; num.pop_back(); break;
        case 'M': scale = 1e6; num.pop_back(); break;
        case 'G': scale = 1e9; num.pop_back(); break;
        default: break;
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(num, &used);
    } catch (const std::exception&) {
        throw ConfigError("cannot parse size '" + text + "'");
    }
    if (used != num.size() || !(v > 0.0))
        throw ConfigError("cannot parse size '" + text + "'");
    return static_cast<std::int64_t>(std::llround(v * scale));
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string item = text.substr(pos, comma - pos);
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("cannot parse integer list entry '" + item + "'");
        }
        pos = comma + 1;
    }
    if (out.empty()) throw ConfigError("integer list is empty");
    return out;
}

// Collects outputs and timings, then drops manifest.json next to them.
struct Run {
    RunManifest man;
    fs::path dir;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    Run(const std::string& command, const std::string& invocation, std::uint64_t seed,
        const ProjectConfig& cfg, const std::string& out_dir)
        : dir(out_dir) {
        man.command = command;
        man.invocation = invocation;
        man.seed = seed;
        man.config_hash = hex64(cfg.hash());
        man.started_at = iso8601_utc_now();
        fs::create_directories(dir);
    }

    std::string path(const std::string& name) {
        man.outputs.push_back(name);
        return (dir / name).string();
    }
    void timing(const std::string& name, double seconds) { man.timings_s[name] = seconds; }
    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    void finish() {
        man.wall_seconds = elapsed();
        man.finished_at = iso8601_utc_now();
        write_manifest((dir / "manifest.json").string(), man);
    }
};

std::string join_argv(int argc, char** argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i) s += ' ';
        s += argv[i];
    }
    return s;
}

void write_json_file(const std::string& path, const json& j) {
    atomic_write_text(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------- commands

int cmd_bounds(Run& run, const ProjectConfig& cfg) {
    const SpaceBounds b = space_bounds(cfg.space);
    std::cout << "max_macs " << b.max_macs << '\n'
              << "max_params " << b.max_params << '\n'
              << "min_macs " << b.min_macs << '\n'
              << "min_params " << b.min_params << '\n'
              << "max_macs_m " << fmt_double(static_cast<double>(b.max_macs) * 1e-6) << '\n'
              << "max_params_m " << fmt_double(static_cast<double>(b.max_params) * 1e-6) << '\n'
              << "min_macs_m " << fmt_double(static_cast<double>(b.min_macs) * 1e-6) << '\n'
              << "min_params_m " << fmt_double(static_cast<double>(b.min_params) * 1e-6) << '\n'
              << "space_size " << fmt_double(b.space_size) << '\n';
    write_json_file(run.path("bounds.json"),
                    json{{"max_macs", b.max_macs},
                         {"max_params", b.max_params},
                         {"min_macs", b.min_macs},
                         {"min_params", b.min_params},
                         {"space_size", b.space_size}});
    return 0;
}

std::vector<double> budget_grid(const ProjectConfig& cfg, const std::string& min_text,
                                const std::string& max_text, int n) {
    const SpaceBounds b = space_bounds(cfg.space);
    const double lo = static_cast<double>(parse_size(min_text));
    const double hi = max_text.empty() ? static_cast<double>(b.max_macs)
                                       : static_cast<double>(parse_size(max_text));
    return discretize_budgets(lo, hi, n);
}

int cmd_gen_cache(Run& run, const ProjectConfig& cfg, std::uint64_t seed,
                  const std::string& min_text, const std::string& max_text, int n) {
    const std::vector<double> budgets = budget_grid(cfg, min_text, max_text, n);
    const CacheBuildResult built = build_cache(cfg.space, cfg.weights, cfg.ga, budgets, seed);
    save_cache(run.path("cache.json"), built.cache, cfg.space);
    atomic_write_text(run.path("cache.csv"), cache_to_csv(built.cache));
    for (std::size_t i = 0; i < built.budget_seconds.size(); ++i)
        run.timing("budget_" + std::to_string(i), built.budget_seconds[i]);
    run.timing("build_total", built.total_seconds);
    const CacheStats stats = cache_stats(built.cache);
    std::cout << "entries " << built.cache.entries.size() << '\n'
              << "mean_fitness " << fmt_double(stats.mean_fitness) << '\n'
              << "std_fitness " << fmt_double(stats.std_fitness) << '\n'
              << "build_seconds " << fmt_double(built.total_seconds) << '\n';
    return 0;
}

int cmd_cache_stats(Run& run, const ProjectConfig& cfg, const std::string& cache_path) {
    const ParetoCache cache = load_cache(cache_path, cfg.space, cfg.weights);
    const CacheStats stats = cache_stats(cache);
    std::cout << "entries " << cache.entries.size() << '\n'
              << "mean_fitness " << fmt_double(stats.mean_fitness) << '\n'
              << "std_fitness " << fmt_double(stats.std_fitness) << '\n';
    write_json_file(run.path("cache_stats.json"),
                    json{{"entries", cache.entries.size()},
                         {"mean_fitness", stats.mean_fitness},
                         {"std_fitness", stats.std_fitness}});
    return 0;
}

int cmd_sensitivity(Run& run, const ProjectConfig& cfg, std::uint64_t seed,
                    const std::string& min_text, const std::string& max_text,
                    const std::string& n_list) {
    const std::vector<int> n_values = parse_int_list(n_list);
    const SpaceBounds b = space_bounds(cfg.space);
    const double lo = static_cast<double>(parse_size(min_text));
    const double hi = max_text.empty() ? static_cast<double>(b.max_macs)
                                       : static_cast<double>(parse_size(max_text));
    const std::vector<SweepRow> rows =
        sensitivity_sweep(cfg.space, cfg.weights, cfg.ga, n_values, lo, hi, seed);
    std::string csv = "n,mean_fitness,std_fitness\n";
    for (const SweepRow& r : rows) {
        csv += std::to_string(r.n) + ',' + fmt_double(r.mean_fitness) + ',' +
               fmt_double(r.std_fitness) + '\n';
        std::cout << "n " << r.n << " mean_fitness " << fmt_double(r.mean_fitness)
                  << " std_fitness " << fmt_double(r.std_fitness) << '\n';
    }
    atomic_write_text(run.path("sensitivity.csv"), csv);
    return 0;
}

int cmd_fedsim(Run& run, const ProjectConfig& cfg, std::uint64_t seed,
               const std::string& cache_path) {
    std::vector<ArchGenome> genomes;
    if (!cache_path.empty()) {
        const ParetoCache cache = load_cache(cache_path, cfg.space, cfg.weights);
        for (const CacheEntry& e : cache.entries) genomes.push_back(e.genome);
    } else {
        genomes.push_back(min_genome(cfg.space));
        genomes.push_back(max_genome(cfg.space));
    }
    const TrainResult res = run_training(cfg.space, cfg.fedsim, genomes, seed);
    atomic_write_text(run.path("fed_trace.csv"), trace_to_csv(res.trace));
    save_checkpoint(run.path("supernet.bin"), res.state);
    const RoundTrace& last = res.trace.back();
    std::cout << "rounds " << res.state.round << '\n'
              << "final_loss_min_genome " << fmt_double(last.loss_min_genome) << '\n'
              << "final_loss_max_genome " << fmt_double(last.loss_max_genome) << '\n';
    return 0;
}

const DeviceProfile& profile_or_throw(const std::string& device) {
    static DeviceProfile prof;
    const auto p = builtin_profile(device);
    if (!p) throw ConfigError("unknown device profile '" + device + "' (cpu or gpu)");
    prof = *p;
    return prof;
}

int cmd_lat_gen(Run& run, const ProjectConfig& cfg, std::uint64_t seed,
                const std::string& device, int samples) {
    const DeviceProfile& prof = profile_or_throw(device);
    const LatencyDataset ds = generate_latency_dataset(cfg.space, prof, samples, seed);
    atomic_write_text(run.path("latency_" + device + ".csv"), latency_csv(ds, cfg.space));
    std::cout << "samples " << ds.genomes.size() << '\n' << "device " << ds.device << '\n';
    return 0;
}

int cmd_lat_train(Run& run, const ProjectConfig& cfg, std::uint64_t seed,
                  const std::string& data_path, const std::string& device, int samples) {
    LatencyDataset ds;
    if (!data_path.empty()) {
        ds = latency_from_csv(read_text(data_path), cfg.space);
    } else {
        // no measurements: fall back to the synthetic oracle for the device
        ds = generate_latency_dataset(cfg.space, profile_or_throw(device), samples, seed);
    }
    const LatencyModel model = train_lpm(samples_from_dataset(ds, cfg.space), cfg.latency,
                                         seed, cfg.space.hash(), ds.device);
    save_model(run.path("lpm_" + ds.device + ".bin"), model);
    write_json_file(run.path("lpm_metrics.json"),
                    json{{"device", ds.device},
                         {"samples", ds.genomes.size()},
                         {"train_mse", model.train_mse},
                         {"val_mse", model.val_mse},
                         {"train_rmse_ms", std::sqrt(model.train_mse)},
                         {"val_rmse_ms", std::sqrt(model.val_mse)}});
    std::cout << "device " << ds.device << '\n'
              << "train_rmse_ms " << fmt_double(std::sqrt(model.train_mse)) << '\n'
              << "val_rmse_ms " << fmt_double(std::sqrt(model.val_mse)) << '\n';
    return 0;
}

int cmd_deploy(Run& run, const ProjectConfig& cfg, std::uint64_t seed,
               const std::string& macs_text, const std::string& params_text,
               double latency_ms, const std::string& mode, double delta,
               const std::string& device, const std::string& model_path) {
    DeploymentSpec spec;
    spec.macs_budget = parse_size(macs_text);
    if (!params_text.empty()) spec.params_budget = parse_size(params_text);
    if (latency_ms > 0.0) spec.latency_budget_ms = latency_ms;
    if (mode == "hard")
        spec.latency_mode = LatencyMode::hard;
    else if (mode == "soft")
        spec.latency_mode = LatencyMode::soft;
    else
        throw ConfigError("latency mode must be 'hard' or 'soft', got '" + mode + "'");
    spec.delta = delta;
    spec.device = device;

    LatencyModel model;
    const LatencyModel* model_ptr = nullptr;
    if (!model_path.empty()) {
        model = load_model(model_path);
        model_ptr = &model;
    }

    const DeployResult res =
        deployment_search(cfg.space, cfg.weights, cfg.ga, spec, model_ptr, seed);
    write_json_file(run.path("deploy.json"), deploy_result_to_json(res, spec, cfg.space));
    atomic_write_text(run.path("deploy_trace.csv"), trace_to_csv(res.trace));
    std::cout << "fitness " << fmt_double(res.best.report.total) << '\n'
              << "objective " << fmt_double(res.best.objective) << '\n'
              << "macs " << res.best.macs << '\n'
              << "params " << res.best.params << '\n';
    if (res.used_latency)
        std::cout << "latency_ms " << fmt_double(res.best.latency_ms) << '\n';
    return 0;
}

int cmd_random_baseline(Run& run, const ProjectConfig& cfg, std::uint64_t seed,
                        const std::string& min_text, const std::string& max_text,
                        int n_budgets, int samples) {
    const std::vector<double> budgets = budget_grid(cfg, min_text, max_text, n_budgets);
    std::string csv = "budget_macs,best_fitness,mean_fitness\n";
    for (std::size_t i = 0; i < budgets.size(); ++i) {
        SearchProblem problem;
        problem.cfg = &cfg.space;
        problem.weights = &cfg.weights;
        problem.constraint.macs_budget = static_cast<std::int64_t>(budgets[i]);
        problem.constraint.rho0 = cfg.weights.rho0;

        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
        double best = 0.0, sum = 0.0;
        int found = 0, misses = 0;
        while (found < samples) {
            const Candidate c = problem.evaluate(random_genome(cfg.space, rng));
            if (!problem.feasible(c)) {
                if (++misses > cfg.ga.max_rejection_attempts)
                    throw InfeasibleError("no feasible sample at budget " +
                                          fmt_double(budgets[i]));
                continue;
            }
            misses = 0;
            const double f = c.report.total;
            best = (found == 0) ? f : std::max(best, f);
            sum += f;
            ++found;
        }
        csv += fmt_double(budgets[i]) + ',' + fmt_double(best) + ',' +
               fmt_double(sum / static_cast<double>(samples)) + '\n';
        std::cout << "budget " << fmt_double(budgets[i]) << " best_fitness "
                  << fmt_double(best) << '\n';
    }
    atomic_write_text(run.path("random_baseline.csv"), csv);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pareto-cache architecture search pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    int threads = 0;
    app.add_option("--config", config_path, "JSON config file (defaults baked in)")
        ->envname("PARETONAS_CONFIG");
    app.add_option("--seed", seed, "master seed; all randomness derives from it")
        ->envname("PARETONAS_SEED");
    app.add_option("--out", out_dir, "output directory (default: out)")
        ->envname("PARETONAS_OUT");
    app.add_option("--threads", threads, "cap OpenMP worker threads (0 = library default)")
        ->envname("PARETONAS_THREADS");

    auto* bounds_cmd =
        app.add_subcommand("bounds", "print search-space MACs/params extremes and size");

    auto* gen_cache = app.add_subcommand("gen-cache", "build the per-budget Pareto cache "
                                                      "(cache.json, cache.csv)");
    std::string min_macs = "458.2M", max_macs;
    int n_budgets = 60;
    gen_cache->add_option("--budgets", n_budgets, "number of equidistant budgets");
    gen_cache->add_option("--min-macs", min_macs, "lowest budget (suffix K/M/G)");
    gen_cache->add_option("--max-macs", max_macs, "highest budget (default: space max)");

    auto* stats_cmd = app.add_subcommand("cache-stats", "fitness stats of a cache file");
    std::string cache_path;
    stats_cmd->add_option("--cache", cache_path, "cache.json to inspect")->required();

    auto* sens_cmd = app.add_subcommand(
        "sensitivity", "rebuild the cache at several sizes (sensitivity.csv)");
    std::string n_list = "4,8,12,16,20,30,45,60";
    std::string s_min_macs = "458.2M", s_max_macs;
    sens_cmd->add_option("--n-values", n_list, "comma-separated cache sizes");
    sens_cmd->add_option("--min-macs", s_min_macs, "lowest budget (suffix K/M/G)");
    sens_cmd->add_option("--max-macs", s_max_macs, "highest budget (default: space max)");

    auto* fedsim_cmd = app.add_subcommand(
        "fedsim", "simulated federated supernet training (fed_trace.csv, supernet.bin)");
    std::string fed_cache;
    fedsim_cmd->add_option("--cache", fed_cache,
                           "cache.json whose genomes form the sampling menu "
                           "(default: space min/max)");

    auto* lat_gen = app.add_subcommand(
        "lat-gen", "sample the synthetic latency oracle (latency_<device>.csv)");
    std::string lg_device = "cpu";
    int lg_samples = 500;
    lat_gen->add_option("--device", lg_device, "builtin profile: cpu or gpu");
    lat_gen->add_option("--samples", lg_samples, "dataset size");

    auto* lat_train = app.add_subcommand(
        "lat-train", "train the latency predictor (lpm_<device>.bin, lpm_metrics.json)");
    std::string lt_data, lt_device = "cpu";
    int lt_samples = 500;
    lat_train->add_option("--data", lt_data, "measured-sample CSV (overrides the oracle)");
    lat_train->add_option("--device", lt_device, "oracle profile when no --data given");
    lat_train->add_option("--samples", lt_samples, "oracle dataset size when no --data");

    auto* deploy_cmd = app.add_subcommand(
        "deploy-search", "constrained search for one deployment target (deploy.json)");
    std::string d_macs, d_params, d_mode = "hard", d_device, d_model;
    double d_latency = 0.0, d_delta = 0.0;
    deploy_cmd->add_option("--macs", d_macs, "MACs budget (suffix K/M/G)")->required();
    deploy_cmd->add_option("--params", d_params, "params budget (suffix K/M/G)");
    deploy_cmd->add_option("--latency", d_latency, "latency budget in ms");
    deploy_cmd->add_option("--latency-mode", d_mode, "hard or soft");
    deploy_cmd->add_option("--delta", d_delta, "soft-mode latency penalty weight");
    deploy_cmd->add_option("--device", d_device, "device tag the model must match");
    deploy_cmd->add_option("--model", d_model, "trained predictor file");

    auto* rand_cmd = app.add_subcommand(
        "random-baseline", "best-of-N random feasible sampling per budget "
                           "(random_baseline.csv)");
    std::string r_min_macs = "458.2M", r_max_macs;
    int r_budgets = 10, r_samples = 500;
    rand_cmd->add_option("--budgets", r_budgets, "number of equidistant budgets");
    rand_cmd->add_option("--samples", r_samples, "random feasible samples per budget");
    rand_cmd->add_option("--min-macs", r_min_macs, "lowest budget (suffix K/M/G)");
    rand_cmd->add_option("--max-macs", r_max_macs, "highest budget (default: space max)");

    // let --seed/--out/... appear after the subcommand too
    for (CLI::App* sc : {bounds_cmd, gen_cache, stats_cmd, sens_cmd, fedsim_cmd, lat_gen,
                         lat_train, deploy_cmd, rand_cmd})
        sc->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e); // prints the message
        return 2;
    }

    try {
        if (threads > 0) omp_set_num_threads(threads);
        const ProjectConfig cfg =
            config_path.empty() ? default_config() : load_config(config_path);
        const std::string invocation = join_argv(argc, argv);

        auto with_run = [&](const std::string& name, auto&& body) {
            Run run(name, invocation, seed, cfg, out_dir);
            const int rc = body(run);
            run.finish();
            return rc;
        };

        if (bounds_cmd->parsed())
            return with_run("bounds", [&](Run& r) { return cmd_bounds(r, cfg); });
        if (gen_cache->parsed())
            return with_run("gen-cache", [&](Run& r) {
                return cmd_gen_cache(r, cfg, seed, min_macs, max_macs, n_budgets);
            });
        if (stats_cmd->parsed())
            return with_run("cache-stats",
                            [&](Run& r) { return cmd_cache_stats(r, cfg, cache_path); });
        if (sens_cmd->parsed())
            return with_run("sensitivity", [&](Run& r) {
                return cmd_sensitivity(r, cfg, seed, s_min_macs, s_max_macs, n_list);
            });
        if (fedsim_cmd->parsed())
            return with_run("fedsim",
                            [&](Run& r) { return cmd_fedsim(r, cfg, seed, fed_cache); });
        if (lat_gen->parsed())
            return with_run("lat-gen", [&](Run& r) {
                return cmd_lat_gen(r, cfg, seed, lg_device, lg_samples);
            });
        if (lat_train->parsed())
            return with_run("lat-train", [&](Run& r) {
                return cmd_lat_train(r, cfg, seed, lt_data, lt_device, lt_samples);
            });
        if (deploy_cmd->parsed())
            return with_run("deploy-search", [&](Run& r) {
                return cmd_deploy(r, cfg, seed, d_macs, d_params, d_latency, d_mode,
                                  d_delta, d_device, d_model);
            });
        if (rand_cmd->parsed())
            return with_run("random-baseline", [&](Run& r) {
                return cmd_random_baseline(r, cfg, seed, r_min_macs, r_max_macs, r_budgets,
                                           r_samples);
            });
        std::cerr << "no subcommand dispatched\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
