#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "pnas/archspace.hpp"

// Multi-objective architecture fitness:
//
//   F(A) = sum_j alpha_j * H_j(A) - omega * Q(A) + lambda * rho(A) - gamma * V(A)
//
//   H_j  = ln(r_j^2 * c_out,j) * sum_{l in stage j} ln(c_in,l * k_l^2)
//   rho  = L / exp(mean_l ln(c_in,l * k_l^2))   (L = conv layer count)
//   Q    = exp(popvar(d))
//   V    = sum_i max(0, width_i - width_{i+1})  over (stem, stage widths)
//
// Layer sets for H and rho: all conv layers including shortcut projections,
// excluding the classifier. rho additionally counts the stem. Natural logs
// throughout. Feasibility = (rho <= rho0); F itself is never clamped.

namespace pnas {

struct FitnessWeights {
    // Per-stage entropy weights. Empty => all 1. Size 1 => broadcast.
    std::vector<double> alpha;
    double omega = 1.0;
    double lambda = 1.0;
    double gamma = 1.0;
    double rho0 = 0.5;
    double delta = 0.0; // latency trade-off used by deployment search

    double alpha_for(int stage) const;
    void validate(int num_stages) const; // throws ConfigError
    std::uint64_t hash() const;
};

void to_json(json& j, const FitnessWeights& w);
void from_json(const json& j, FitnessWeights& w);

// H_j for 0-based stage index.
double stage_entropy(const ArchInstance& inst, int stage);
// rho: layer count over geometric mean fan-in mass.
double effectiveness(const ArchInstance& inst);
// Q from the genome's depth vector (population variance).
double depth_penalty(const ArchGenome& g);
// V over raw channel counts (stem first).
double channel_penalty(const ArchInstance& inst);

struct FitnessReport {
    std::vector<double> stage_entropies;
    double effectiveness = 0.0;
    double depth_penalty = 0.0;
    double channel_penalty = 0.0;
    double total = 0.0;
    bool feasible = false;
};

void to_json(json& j, const FitnessReport& r);

FitnessReport fitness(const ArchGenome& g, const SearchSpaceConfig& cfg,
                      const FitnessWeights& w);
// Same but reuses an already-decoded instance.
FitnessReport fitness(const ArchGenome& g, const ArchInstance& inst,
                      const FitnessWeights& w);

// F_deploy = F - delta * predicted_latency_ms.
double deploy_fitness(double base_fitness, double predicted_latency_ms, double delta);

} // namespace pnas
