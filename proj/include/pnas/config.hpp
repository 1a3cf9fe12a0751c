#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "pnas/archspace.hpp"
#include "pnas/fedsim.hpp"
#include "pnas/fitness.hpp"
#include "pnas/ga.hpp"
#include "pnas/latency.hpp"

// One JSON config file drives every subcommand. Every section is optional;
// missing sections fall back to the defaults below (the reference 4-stage
// space). Unknown keys are rejected to catch typos.

namespace pnas {

struct ProjectConfig {
    SearchSpaceConfig space;
    FitnessWeights weights;
    GaConfig ga;
    FedsimConfig fedsim;
    LpmConfig latency;

    void validate() const;
    // Fingerprint of space + weights; stamped into manifests.
    std::uint64_t hash() const;
};

ProjectConfig default_config();

ProjectConfig config_from_json(const json& j);
json config_to_json(const ProjectConfig& cfg);

// Loads, parses, validates. Throws ConfigError/IoError.
ProjectConfig load_config(const std::string& path);

} // namespace pnas
