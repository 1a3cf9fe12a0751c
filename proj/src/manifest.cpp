#include "pnas/manifest.hpp"

#include <ctime>

#include "pnas/io.hpp"

namespace pnas {

std::string iso8601_utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json manifest_to_json(const RunManifest& m) {
    return json{{"version", m.version},
                {"command", m.command},
                {"invocation", m.invocation},
                {"seed", m.seed},
                {"config_hash", m.config_hash},
                {"outputs", m.outputs},
                {"timings_s", m.timings_s},
                {"wall_seconds", m.wall_seconds},
                {"started_at", m.started_at},
                {"finished_at", m.finished_at}};
}

void write_manifest(const std::string& path, const RunManifest& m) {
    atomic_write_text(path, manifest_to_json(m).dump(2) + "\n");
}

} // namespace pnas
