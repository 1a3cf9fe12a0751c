#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pnas/archspace.hpp"
#include "pnas/rng.hpp"

// Hardware latency modeling. Features are the raw genome plus GMACs and
// params (M); the predictor is a small MLP trained on z-scored features and
// targets. A synthetic oracle (affine in GMACs and layer count, plus
// Gaussian noise) stands in for device measurements.

namespace pnas {

struct DeviceProfile {
    std::string name;
    double ms_per_gmac = 0.0;
    double ms_per_layer = 0.0;
    double base_ms = 0.0;
    double noise_sigma = 0.0;
};

// Compute-bound profile: latency tracks GMACs closely.
DeviceProfile cpu_like_profile();
// Mostly flat profile: fixed overhead dominates, tiny MACs slope.
DeviceProfile gpu_like_profile();
std::optional<DeviceProfile> builtin_profile(const std::string& name);

// [d genes, e genes, w genes, GMACs, params_M]; length S + S*N + (S+1) + 2.
std::vector<double> featurize(const ArchGenome& g, const SearchSpaceConfig& cfg);

// a*GMACs + b*active_layer_count + c (+ noise when rng given and sigma > 0),
// clamped positive. Layer count includes stem and shortcut projections.
double synth_latency(const ArchGenome& g, const SearchSpaceConfig& cfg,
                     const DeviceProfile& profile, Rng* rng = nullptr);

struct LatencySample {
    std::vector<double> features;
    double latency_ms = 0.0;
    std::string device;
};

// Genome-keyed dataset; the CSV form stores genome indices, not features.
struct LatencyDataset {
    std::vector<ArchGenome> genomes;
    std::vector<double> latency_ms;
    std::string device;
};

LatencyDataset generate_latency_dataset(const SearchSpaceConfig& cfg,
                                        const DeviceProfile& profile, int n,
                                        std::uint64_t seed);

std::vector<LatencySample> samples_from_dataset(const LatencyDataset& ds,
                                                const SearchSpaceConfig& cfg);

// d0..,e0..,w0..,latency_ms,device (genome gene indices).
std::string latency_csv(const LatencyDataset& ds, const SearchSpaceConfig& cfg);
LatencyDataset latency_from_csv(const std::string& text, const SearchSpaceConfig& cfg);

struct LpmConfig {
    int hidden_units = 64;
    int hidden_layers = 2;
    int epochs = 200;
    double learning_rate = 1e-3;
    int batch_size = 32;
    double val_fraction = 0.2;
    double momentum = 0.9;
    int ensemble = 8; // independently seeded nets; prediction is their mean

    void validate() const;
};

void to_json(json& j, const LpmConfig& c);
void from_json(const json& j, LpmConfig& c);

struct LatencyModel {
    int input_dim = 0;
    std::vector<int> layer_sizes; // [in, hidden.., 1] for every ensemble member
    int ensemble = 1;
    // member-major: member k's layer l sits at index k*(layer_sizes.size()-1)+l;
    // each weight matrix is row-major (out x in)
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
    std::vector<double> feat_mean;
    std::vector<double> feat_scale; // 1/std; 0 drops a constant feature
    double target_mean = 0.0;
    double target_std = 1.0;
    std::string device;
    std::uint64_t space_hash = 0;
    double train_mse = 0.0;        // final ensemble-mean MSE, in ms^2
    double val_mse = 0.0;
    std::vector<double> epoch_mse; // mean running train MSE per epoch (ms^2); not persisted
};

// Mini-batch SGD (momentum) on MSE over z-scored features/targets with an
// 80/20 split. Throws DataError (<50 samples, mixed devices) and
// DivergenceError (non-finite loss).
LatencyModel train_lpm(const std::vector<LatencySample>& samples, const LpmConfig& cfg,
                       std::uint64_t seed, std::uint64_t space_hash,
                       const std::string& device);

double predict(const LatencyModel& model, const std::vector<double>& features);
// Featurizes and checks dimensions/space fingerprint first.
double predict(const LatencyModel& model, const ArchGenome& g,
               const SearchSpaceConfig& cfg);

// Same JSON-header + float64-payload container as checkpoints.
void save_model(const std::string& path, const LatencyModel& model);
LatencyModel load_model(const std::string& path);

} // namespace pnas
