#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "pnas/rng.hpp"

// Architecture search space: genome encoding (d, e, w), decode to a concrete
// layer list, and the MACs/params accounting that the rest of the pipeline
// is calibrated against.
//
// Supernet structure (per stage i, stride applied on the first block):
//   stem:  3x3 conv, stride 1, width round_half_up(w0 * base[0])
//   block: 3x3 conv (c_in -> b) then 3x3 conv (b -> c_out) with
//          b = max(min_bottleneck_width, round_half_up(e * c_out)),
//          plus a 1x1 shortcut projection on the first block of each stage
//   head:  global pool + linear classifier (c_last -> num_classes)
//
// Accounting conventions (calibrated against the reference operating points):
//   MACs   = stem + block convs + classifier, shortcut projections excluded
//   params = every conv weight including shortcut projections + classifier
// No biases or norm layers are counted.

namespace pnas {

using json = nlohmann::json;

struct SearchSpaceConfig {
    int num_stages = 4;
    std::vector<int> base_channels = {256, 512, 1024, 2048};
    std::vector<int> depth_choices = {1, 2, 3};                 // D: total blocks per stage
    std::vector<double> width_choices = {0.1, 0.2, 0.3, 0.4, 0.5,
                                         0.6, 0.7, 0.8, 0.9, 1.0}; // C: stem + per-stage
    std::vector<double> expansion_choices = {0.1, 0.14, 0.18, 0.22, 0.25}; // E
    int input_resolution = 32;
    int input_channels = 3;
    int num_classes = 100;
    std::vector<int> stage_strides = {1, 2, 2, 2};
    int min_bottleneck_width = 8;

    int max_blocks_per_stage() const; // N = max(D); e genes per stage
    int genome_length() const;        // S + S*N + (S+1)
    double space_size() const;        // |D|^S * |E|^(S*N) * |C|^(S+1)
    void validate() const;            // throws ConfigError
    std::uint64_t hash() const;       // fingerprint of the canonical JSON form
};

void to_json(json& j, const SearchSpaceConfig& cfg);
void from_json(const json& j, SearchSpaceConfig& cfg);

// Genome stores gene *values* drawn from the choice sets. Inactive expansion
// slots (block index >= depth) are carried but ignored by decode.
struct ArchGenome {
    std::vector<int> depths;        // size S
    std::vector<double> expansions; // size S*N, row-major [stage][block]
    std::vector<double> widths;     // size S+1, [0] = stem

    bool operator==(const ArchGenome&) const = default;
};

enum class LayerKind {
    stem,
    bottleneck_reduce,   // 3x3, c_in -> b
    bottleneck_expand,   // 3x3, b -> c_out
    shortcut_projection, // 1x1, first block of each stage (params only)
    classifier,          // linear, modeled as 1x1 at r_out = 1
};

const char* layer_kind_name(LayerKind k);

struct LayerSpec {
    LayerKind kind;
    int c_in = 0;
    int c_out = 0;
    int kernel = 1;
    int stride = 1;
    int r_out = 1; // output feature-map resolution
};

struct StageInfo {
    int first_layer = 0; // index into ArchInstance::layers
    int layer_count = 0;
    int out_width = 0;
    int out_resolution = 0;
};

struct ArchInstance {
    std::vector<LayerSpec> layers;  // stem, stage blocks, classifier
    std::vector<StageInfo> stages;  // size S
    std::vector<int> depths;        // active depths (copy of genome)
    int stem_width = 0;
};

// Gene membership + shape checks; never throws.
bool validate(const ArchGenome& g, const SearchSpaceConfig& cfg);
// Same checks, but throws ConfigError with a reason.
void require_valid(const ArchGenome& g, const SearchSpaceConfig& cfg);

ArchInstance decode(const ArchGenome& g, const SearchSpaceConfig& cfg);

std::int64_t macs(const ArchInstance& inst);
std::int64_t params(const ArchInstance& inst);

ArchGenome random_genome(const SearchSpaceConfig& cfg, Rng& rng);

// Extreme genomes; every per-layer quantity is monotone in every gene, so
// these realize the space bounds.
ArchGenome min_genome(const SearchSpaceConfig& cfg);
ArchGenome max_genome(const SearchSpaceConfig& cfg);

struct SpaceBounds {
    std::int64_t min_macs = 0;
    std::int64_t max_macs = 0;
    std::int64_t min_params = 0;
    std::int64_t max_params = 0;
    double space_size = 0.0;
};

SpaceBounds space_bounds(const SearchSpaceConfig& cfg);

// Flat index form: d genes, then e genes, then w genes, each as an index
// into its choice set. This is the GA's crossover/mutation substrate and
// the canonical serialized form.
std::vector<int> to_indices(const ArchGenome& g, const SearchSpaceConfig& cfg);
ArchGenome from_indices(const std::vector<int>& flat, const SearchSpaceConfig& cfg);

// JSON carries both the index form and the readable value form.
json genome_to_json(const ArchGenome& g, const SearchSpaceConfig& cfg);
ArchGenome genome_from_json(const json& j, const SearchSpaceConfig& cfg);

} // namespace pnas
