#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "pnas/ga.hpp"
#include "pnas/latency.hpp"

// Deployment-time search: the budget GA with an extended feasibility
// predicate (params / latency budgets) and, in soft mode, the latency-aware
// objective F - delta * L_pred. With delta = 0 and no hard latency budget
// the search is bit-identical to the plain budget search under the same
// seed (the RNG stream is untouched by latency evaluation).

namespace pnas {

enum class LatencyMode { hard, soft };

struct DeploymentSpec {
    std::int64_t macs_budget = 0;
    std::optional<std::int64_t> params_budget;
    std::optional<double> latency_budget_ms;
    LatencyMode latency_mode = LatencyMode::hard;
    double delta = 0.0;
    std::string device; // must match the model's device tag when both set
};

struct DeployResult {
    Candidate best;
    std::vector<GaTraceRow> trace;
    long long evaluations = 0;
    bool used_latency = false;
};

DeployResult deployment_search(const SearchSpaceConfig& cfg, const FitnessWeights& weights,
                               const GaConfig& ga, const DeploymentSpec& spec,
                               const LatencyModel* model, std::uint64_t seed);

// Deterministic result document (no wall-clock data; timings go to the
// run manifest).
json deploy_result_to_json(const DeployResult& res, const DeploymentSpec& spec,
                           const SearchSpaceConfig& cfg);

} // namespace pnas
