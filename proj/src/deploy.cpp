#include "pnas/deploy.hpp"

#include "pnas/errors.hpp"
#include "pnas/io.hpp"

namespace pnas {

DeployResult deployment_search(const SearchSpaceConfig& cfg, const FitnessWeights& weights,
                               const GaConfig& ga, const DeploymentSpec& spec,
                               const LatencyModel* model, std::uint64_t seed) {
    cfg.validate();
    weights.validate(cfg.num_stages);
    ga.validate();
    if (spec.macs_budget <= 0) throw ConfigError("deployment needs a positive MACs budget");
    if (spec.params_budget && *spec.params_budget <= 0)
        throw ConfigError("params budget must be positive");
    if (spec.latency_budget_ms && *spec.latency_budget_ms <= 0.0)
        throw ConfigError("latency budget must be positive");
    if (spec.delta < 0.0) throw ConfigError("delta must be non-negative");

    const bool wants_hard = spec.latency_budget_ms && spec.latency_mode == LatencyMode::hard;
    const bool wants_soft = spec.latency_mode == LatencyMode::soft && spec.delta > 0.0;
    const bool needs_model = wants_hard || wants_soft;
    if (needs_model && model == nullptr)
        throw ConfigError("latency constraint or penalty requested but no model given");
    if (model != nullptr) {
        if (model->space_hash != 0 && model->space_hash != cfg.hash())
            throw ConfigError("latency model was trained on a different search space");
        if (!spec.device.empty() && !model->device.empty() && spec.device != model->device)
            throw ConfigError("deployment targets device '" + spec.device +
                              "' but the model is for '" + model->device + "'");
    }

    SearchProblem problem;
    problem.cfg = &cfg;
    problem.weights = &weights;
    problem.constraint.macs_budget = spec.macs_budget;
    problem.constraint.params_budget = spec.params_budget;
    problem.constraint.rho0 = weights.rho0;
    if (needs_model) {
        problem.latency = [model, &cfg](const ArchGenome& g) { return predict(*model, g, cfg); };
        if (wants_hard) problem.constraint.latency_budget_ms = spec.latency_budget_ms;
        if (wants_soft) problem.delta = spec.delta;
    }

    SearchResult sr = evolve(problem, ga, seed);
    DeployResult res;
    res.best = std::move(sr.best);
    res.trace = std::move(sr.trace);
    res.evaluations = sr.evaluations;
    res.used_latency = needs_model;
    return res;
}

json deploy_result_to_json(const DeployResult& res, const DeploymentSpec& spec,
                           const SearchSpaceConfig& cfg) {
    json jspec{{"macs_budget", spec.macs_budget},
               {"latency_mode", spec.latency_mode == LatencyMode::hard ? "hard" : "soft"},
               {"delta", spec.delta}};
    if (spec.params_budget) jspec["params_budget"] = *spec.params_budget;
    if (spec.latency_budget_ms) jspec["latency_budget_ms"] = *spec.latency_budget_ms;
    if (!spec.device.empty()) jspec["device"] = spec.device;

    const Candidate& b = res.best;
    json jbest{{"genome", genome_to_json(b.genome, cfg)},
               {"macs", b.macs},
               {"params", b.params},
               {"fitness", b.report.total},
               {"objective", b.objective},
               {"effectiveness", b.report.effectiveness},
               {"depth_penalty", b.report.depth_penalty},
               {"channel_penalty", b.report.channel_penalty},
               {"stage_entropies", b.report.stage_entropies}};
    if (res.used_latency) jbest["latency_ms"] = b.latency_ms;

    return json{{"spec", std::move(jspec)},
                {"best", std::move(jbest)},
                {"evaluations", res.evaluations},
                {"used_latency", res.used_latency},
                {"generations", res.trace.empty() ? 0
                                                  : res.trace.back().generation}};
}

} // namespace pnas
