#include "pnas/archspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pnas/errors.hpp"
#include "pnas/io.hpp"

namespace pnas {

namespace {

// round-half-up; gene values are small positive reals so floor(x+0.5) is safe.
int round_channels(double x) {
    return static_cast<int>(std::floor(x + 0.5));
}

int stage_width(double w, int base) {
    return std::max(1, round_channels(w * base));
}

int bottleneck_width(double e, int c_out, int floor_width) {
    return std::max(floor_width, round_channels(e * c_out));
}

// exact membership: gene values are copies of choice-set elements.
template <typename T>
bool in_set(const std::vector<T>& set, T v) {
    return std::find(set.begin(), set.end(), v) != set.end();
}

template <typename T>
int index_in_set(const std::vector<T>& set, T v, const char* what) {
    auto it = std::find(set.begin(), set.end(), v);
    if (it == set.end()) throw ConfigError(std::string("gene value not in choice set: ") + what);
    return static_cast<int>(it - set.begin());
}

} // namespace

int SearchSpaceConfig::max_blocks_per_stage() const {
    return *std::max_element(depth_choices.begin(), depth_choices.end());
}

int SearchSpaceConfig::genome_length() const {
    return num_stages + num_stages * max_blocks_per_stage() + (num_stages + 1);
}

double SearchSpaceConfig::space_size() const {
    const int n = max_blocks_per_stage();
    double size = 1.0;
    for (int i = 0; i < num_stages; ++i) size *= static_cast<double>(depth_choices.size());
    for (int i = 0; i < num_stages * n; ++i) size *= static_cast<double>(expansion_choices.size());
    for (int i = 0; i < num_stages + 1; ++i) size *= static_cast<double>(width_choices.size());
    return size;
}

void SearchSpaceConfig::validate() const {
    if (num_stages < 1) throw ConfigError("num_stages must be >= 1");
    if (static_cast<int>(base_channels.size()) != num_stages)
        throw ConfigError("base_channels size must equal num_stages");
    if (static_cast<int>(stage_strides.size()) != num_stages)
        throw ConfigError("stage_strides size must equal num_stages");
    for (int b : base_channels)
        if (b < 1) throw ConfigError("base_channels must be strictly positive");
    for (int s : stage_strides)
        if (s < 1) throw ConfigError("stage_strides must be >= 1");
    if (depth_choices.empty() || expansion_choices.empty() || width_choices.empty())
        throw ConfigError("choice sets must be non-empty");
    for (int d : depth_choices)
        if (d < 1) throw ConfigError("depth choices must be >= 1");
    for (double e : expansion_choices)
        if (!(e > 0.0 && e <= 1.0)) throw ConfigError("expansion choices must be in (0, 1]");
    for (double w : width_choices)
        if (!(w > 0.0 && w <= 1.0)) throw ConfigError("width choices must be in (0, 1]");
    auto increasing = [](const auto& v) {
        return std::adjacent_find(v.begin(), v.end(),
                                  [](auto a, auto b) { return a >= b; }) == v.end();
    };
    if (!increasing(depth_choices) || !increasing(expansion_choices) ||
        !increasing(width_choices))
        throw ConfigError("choice sets must be strictly increasing");
    if (input_resolution < 1 || input_channels < 1 || num_classes < 1)
        throw ConfigError("input_resolution, input_channels, num_classes must be >= 1");
    if (min_bottleneck_width < 1) throw ConfigError("min_bottleneck_width must be >= 1");
}

std::uint64_t SearchSpaceConfig::hash() const {
    json j = *this;
    return fnv1a64(j.dump());
}

void to_json(json& j, const SearchSpaceConfig& cfg) {
    j = json{{"num_stages", cfg.num_stages},
             {"base_channels", cfg.base_channels},
             {"depth_choices", cfg.depth_choices},
             {"width_choices", cfg.width_choices},
             {"expansion_choices", cfg.expansion_choices},
             {"input_resolution", cfg.input_resolution},
             {"input_channels", cfg.input_channels},
             {"num_classes", cfg.num_classes},
             {"stage_strides", cfg.stage_strides},
             {"min_bottleneck_width", cfg.min_bottleneck_width}};
}

void from_json(const json& j, SearchSpaceConfig& cfg) {
    SearchSpaceConfig def;
    cfg = def;
    static const char* known[] = {"num_stages",        "base_channels",
                                  "depth_choices",     "width_choices",
                                  "expansion_choices", "input_resolution",
                                  "input_channels",    "num_classes",
                                  "stage_strides",     "min_bottleneck_width"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || (it.key() == k);
        if (!ok) throw ConfigError("unknown space config key: " + it.key());
    }
    if (j.contains("num_stages")) j.at("num_stages").get_to(cfg.num_stages);
    if (j.contains("base_channels")) j.at("base_channels").get_to(cfg.base_channels);
    if (j.contains("depth_choices")) j.at("depth_choices").get_to(cfg.depth_choices);
    if (j.contains("width_choices")) j.at("width_choices").get_to(cfg.width_choices);
    if (j.contains("expansion_choices")) j.at("expansion_choices").get_to(cfg.expansion_choices);
    if (j.contains("input_resolution")) j.at("input_resolution").get_to(cfg.input_resolution);
    if (j.contains("input_channels")) j.at("input_channels").get_to(cfg.input_channels);
    if (j.contains("num_classes")) j.at("num_classes").get_to(cfg.num_classes);
    if (j.contains("stage_strides")) j.at("stage_strides").get_to(cfg.stage_strides);
    if (j.contains("min_bottleneck_width"))
        j.at("min_bottleneck_width").get_to(cfg.min_bottleneck_width);
}

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::stem: return "stem";
        case LayerKind::bottleneck_reduce: return "reduce";
        case LayerKind::bottleneck_expand: return "expand";
        case LayerKind::shortcut_projection: return "proj";
        case LayerKind::classifier: return "classifier";
    }
    return "?";
}

bool validate(const ArchGenome& g, const SearchSpaceConfig& cfg) {
    const int s = cfg.num_stages;
    const int n = cfg.max_blocks_per_stage();
    if (static_cast<int>(g.depths.size()) != s) return false;
    if (static_cast<int>(g.expansions.size()) != s * n) return false;
    if (static_cast<int>(g.widths.size()) != s + 1) return false;
    for (int d : g.depths)
        if (!in_set(cfg.depth_choices, d)) return false;
    for (double e : g.expansions)
        if (!in_set(cfg.expansion_choices, e)) return false;
    for (double w : g.widths)
        if (!in_set(cfg.width_choices, w)) return false;
    return true;
}

void require_valid(const ArchGenome& g, const SearchSpaceConfig& cfg) {
    const int s = cfg.num_stages;
    const int n = cfg.max_blocks_per_stage();
    if (static_cast<int>(g.depths.size()) != s)
        throw ConfigError("genome depth vector has wrong length");
    if (static_cast<int>(g.expansions.size()) != s * n)
        throw ConfigError("genome expansion vector has wrong length");
    if (static_cast<int>(g.widths.size()) != s + 1)
        throw ConfigError("genome width vector has wrong length");
    for (int d : g.depths)
        if (!in_set(cfg.depth_choices, d)) throw ConfigError("depth gene not in choice set");
    for (double e : g.expansions)
        if (!in_set(cfg.expansion_choices, e))
            throw ConfigError("expansion gene not in choice set");
    for (double w : g.widths)
        if (!in_set(cfg.width_choices, w)) throw ConfigError("width gene not in choice set");
}

ArchInstance decode(const ArchGenome& g, const SearchSpaceConfig& cfg) {
    require_valid(g, cfg);
    const int n = cfg.max_blocks_per_stage();

    ArchInstance inst;
    inst.depths = g.depths;
    inst.stem_width = stage_width(g.widths[0], cfg.base_channels[0]);
    inst.layers.push_back({LayerKind::stem, cfg.input_channels, inst.stem_width, 3, 1,
                           cfg.input_resolution});

    int c_prev = inst.stem_width;
    int res = cfg.input_resolution;
    for (int i = 0; i < cfg.num_stages; ++i) {
        const int stride = cfg.stage_strides[i];
        res = std::max(1, res / stride);
        const int c_out = stage_width(g.widths[i + 1], cfg.base_channels[i]);

        StageInfo info;
        info.first_layer = static_cast<int>(inst.layers.size());
        info.out_width = c_out;
        info.out_resolution = res;

        for (int b = 0; b < g.depths[i]; ++b) {
            const int c_in = (b == 0) ? c_prev : c_out;
            const int bw = bottleneck_width(g.expansions[i * n + b], c_out,
                                            cfg.min_bottleneck_width);
            const int s_in = (b == 0) ? stride : 1;
            inst.layers.push_back({LayerKind::bottleneck_reduce, c_in, bw, 3, s_in, res});
            inst.layers.push_back({LayerKind::bottleneck_expand, bw, c_out, 3, 1, res});
            if (b == 0)
                inst.layers.push_back(
                    {LayerKind::shortcut_projection, c_in, c_out, 1, stride, res});
        }
        info.layer_count = static_cast<int>(inst.layers.size()) - info.first_layer;
        inst.stages.push_back(info);
        c_prev = c_out;
    }
    inst.layers.push_back({LayerKind::classifier, c_prev, cfg.num_classes, 1, 1, 1});
    return inst;
}

std::int64_t macs(const ArchInstance& inst) {
    std::int64_t total = 0;
    for (const LayerSpec& l : inst.layers) {
        if (l.kind == LayerKind::shortcut_projection) continue;
        total += static_cast<std::int64_t>(l.c_in) * l.c_out * l.kernel * l.kernel *
                 l.r_out * l.r_out;
    }
    return total;
}

std::int64_t params(const ArchInstance& inst) {
    std::int64_t total = 0;
    for (const LayerSpec& l : inst.layers)
        total += static_cast<std::int64_t>(l.c_in) * l.c_out * l.kernel * l.kernel;
    return total;
}

ArchGenome random_genome(const SearchSpaceConfig& cfg, Rng& rng) {
    const int n = cfg.max_blocks_per_stage();
    ArchGenome g;
    g.depths.resize(cfg.num_stages);
    g.expansions.resize(static_cast<std::size_t>(cfg.num_stages) * n);
    g.widths.resize(cfg.num_stages + 1);
    for (auto& d : g.depths) d = cfg.depth_choices[uniform_index(rng, cfg.depth_choices.size())];
    for (auto& e : g.expansions)
        e = cfg.expansion_choices[uniform_index(rng, cfg.expansion_choices.size())];
    for (auto& w : g.widths) w = cfg.width_choices[uniform_index(rng, cfg.width_choices.size())];
    return g;
}

ArchGenome min_genome(const SearchSpaceConfig& cfg) {
    const int n = cfg.max_blocks_per_stage();
    ArchGenome g;
    g.depths.assign(cfg.num_stages, cfg.depth_choices.front());
    g.expansions.assign(static_cast<std::size_t>(cfg.num_stages) * n,
                        cfg.expansion_choices.front());
    g.widths.assign(cfg.num_stages + 1, cfg.width_choices.front());
    return g;
}

ArchGenome max_genome(const SearchSpaceConfig& cfg) {
    const int n = cfg.max_blocks_per_stage();
    ArchGenome g;
    g.depths.assign(cfg.num_stages, cfg.depth_choices.back());
    g.expansions.assign(static_cast<std::size_t>(cfg.num_stages) * n,
                        cfg.expansion_choices.back());
    g.widths.assign(cfg.num_stages + 1, cfg.width_choices.back());
    return g;
}

SpaceBounds space_bounds(const SearchSpaceConfig& cfg) {
    cfg.validate();
    const ArchInstance lo = decode(min_genome(cfg), cfg);
    const ArchInstance hi = decode(max_genome(cfg), cfg);
    SpaceBounds b;
    b.min_macs = macs(lo);
    b.max_macs = macs(hi);
    b.min_params = params(lo);
    b.max_params = params(hi);
    b.space_size = cfg.space_size();
    return b;
}

std::vector<int> to_indices(const ArchGenome& g, const SearchSpaceConfig& cfg) {
    std::vector<int> flat;
    flat.reserve(cfg.genome_length());
    for (int d : g.depths) flat.push_back(index_in_set(cfg.depth_choices, d, "depth"));
    for (double e : g.expansions)
        flat.push_back(index_in_set(cfg.expansion_choices, e, "expansion"));
    for (double w : g.widths) flat.push_back(index_in_set(cfg.width_choices, w, "width"));
    return flat;
}

ArchGenome from_indices(const std::vector<int>& flat, const SearchSpaceConfig& cfg) {
    const int s = cfg.num_stages;
    const int n = cfg.max_blocks_per_stage();
    if (static_cast<int>(flat.size()) != cfg.genome_length())
        throw ConfigError("flat genome has wrong length");
    auto pick = [](const auto& set, int idx, const char* what) {
        if (idx < 0 || idx >= static_cast<int>(set.size()))
            throw ConfigError(std::string("gene index out of range: ") + what);
        return set[static_cast<std::size_t>(idx)];
    };
    ArchGenome g;
    int p = 0;
    for (int i = 0; i < s; ++i) g.depths.push_back(pick(cfg.depth_choices, flat[p++], "depth"));
    for (int i = 0; i < s * n; ++i)
        g.expansions.push_back(pick(cfg.expansion_choices, flat[p++], "expansion"));
    for (int i = 0; i < s + 1; ++i)
        g.widths.push_back(pick(cfg.width_choices, flat[p++], "width"));
    return g;
}

json genome_to_json(const ArchGenome& g, const SearchSpaceConfig& cfg) {
    const std::vector<int> flat = to_indices(g, cfg);
    const int s = cfg.num_stages;
    const int n = cfg.max_blocks_per_stage();
    json idx;
    idx["d"] = std::vector<int>(flat.begin(), flat.begin() + s);
    idx["e"] = std::vector<int>(flat.begin() + s, flat.begin() + s + s * n);
    idx["w"] = std::vector<int>(flat.begin() + s + s * n, flat.end());
    json val;
    val["d"] = g.depths;
    val["e"] = g.expansions;
    val["w"] = g.widths;
    return json{{"index", idx}, {"value", val}};
}

ArchGenome genome_from_json(const json& j, const SearchSpaceConfig& cfg) {
    if (j.contains("index")) {
        const json& idx = j.at("index");
        std::vector<int> flat;
        for (int v : idx.at("d").get<std::vector<int>>()) flat.push_back(v);
        for (int v : idx.at("e").get<std::vector<int>>()) flat.push_back(v);
        for (int v : idx.at("w").get<std::vector<int>>()) flat.push_back(v);
        return from_indices(flat, cfg);
    }
    if (!j.contains("value")) throw ConfigError("genome JSON lacks index/value form");
    const json& val = j.at("value");
    ArchGenome g;
    val.at("d").get_to(g.depths);
    val.at("e").get_to(g.expansions);
    val.at("w").get_to(g.widths);
    // value form may come from hand-written files: snap to nearest set member.
    auto snap = [](std::vector<double>& genes, const std::vector<double>& set) {
        for (double& v : genes) {
            double best = set.front();
            for (double s : set)
                if (std::abs(s - v) < std::abs(best - v)) best = s;
            if (std::abs(best - v) > 1e-9) throw ConfigError("gene value not in choice set");
            v = best;
        }
    };
    snap(g.expansions, cfg.expansion_choices);
    snap(g.widths, cfg.width_choices);
    require_valid(g, cfg);
    return g;
}

} // namespace pnas
