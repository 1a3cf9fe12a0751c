#include "pnas/config.hpp"

#include <fstream>

#include "pnas/errors.hpp"
#include "pnas/io.hpp"

namespace pnas {

void ProjectConfig::validate() const {
    space.validate();
    weights.validate(space.num_stages);
    ga.validate();
    fedsim.validate();
    latency.validate();
}

std::uint64_t ProjectConfig::hash() const { return mix_seed(space.hash(), weights.hash()); }

ProjectConfig default_config() { return ProjectConfig{}; }

ProjectConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    static const char* known[] = {"space", "weights", "ga", "fedsim", "latency"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || (it.key() == k);
        if (!ok) throw ConfigError("unknown config section: " + it.key());
    }
    ProjectConfig cfg;
    if (j.contains("space")) j.at("space").get_to(cfg.space);
    if (j.contains("weights")) j.at("weights").get_to(cfg.weights);
    if (j.contains("ga")) j.at("ga").get_to(cfg.ga);
    if (j.contains("fedsim")) j.at("fedsim").get_to(cfg.fedsim);
    if (j.contains("latency")) j.at("latency").get_to(cfg.latency);
    cfg.validate();
    return cfg;
}

json config_to_json(const ProjectConfig& cfg) {
    return json{{"space", cfg.space},
                {"weights", cfg.weights},
                {"ga", cfg.ga},
                {"fedsim", cfg.fedsim},
                {"latency", cfg.latency}};
}

ProjectConfig load_config(const std::string& path) {
    const std::string text = read_text(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    try {
        return config_from_json(j);
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
}

} // namespace pnas
