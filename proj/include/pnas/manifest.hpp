#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

// Run manifest written atomically next to every command's outputs. This is
// the one artifact allowed to differ between reruns: it carries timestamps
// and wall-clock timings. All other output files are byte-reproducible from
// (config, seed, command).

namespace pnas {

using json = nlohmann::json;

struct RunManifest {
    int version = 1;
    std::string command;                    // subcommand name
    std::string invocation;                 // full argv join
    std::uint64_t seed = 0;
    std::string config_hash;                // hex fingerprint of space+weights
    std::vector<std::string> outputs;       // files produced (relative paths)
    std::map<std::string, double> timings_s;
    double wall_seconds = 0.0;
    std::string started_at;                 // ISO-8601 UTC
    std::string finished_at;
};

std::string iso8601_utc_now();

json manifest_to_json(const RunManifest& m);
void write_manifest(const std::string& path, const RunManifest& m);

} // namespace pnas
