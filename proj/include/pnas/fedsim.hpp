#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "pnas/archspace.hpp"
#include "pnas/rng.hpp"

// Simulated federated supernet training. The supernet holds one tensor per
// conv of the maximal architecture; subnets are first-k channel slices.
// Clients optimize a synthetic masked quadratic
//
//   L_k(w) = 1/2 || mask ⊙ (w - w*_k) ||^2
//
// by full-batch gradient descent (one step per local epoch), and the server
// merges deltas with overlap-aware MaxNet aggregation:
//
//   delta(θ) = [ β·I_max(θ)·Δ_kmax(θ) + (1-β)·Σ_{k≠kmax} I_k(θ)·Δ_k(θ) ]
//            / [ β·I_max(θ) + (1-β)·Σ_{k≠kmax} I_k(θ) + ε ]
//
//   W_{t+1}(θ) = W_t(θ) + η_g · delta(θ)
//
// β anneals as 0.5(1+cos(π·t/(0.8T))) for t ≤ 0.8T, else 0.
//
// The OpenMP kernels parallelize over parameters/clients with a fixed
// per-parameter summation order, so results are bit-identical to the serial
// reference implementations at any thread count.

namespace pnas {

using json = nlohmann::json;

struct TensorShape {
    int rows = 0; // c_out (classes for the classifier)
    int cols = 0; // c_in
    int kh = 1;
    int kw = 1;

    std::size_t size() const {
        return static_cast<std::size_t>(rows) * cols * kh * kw;
    }
    bool operator==(const TensorShape&) const = default;
};

// Tensor names/shapes of the maximal architecture, in decode order.
struct SupernetLayout {
    std::vector<std::string> names;
    std::vector<TensorShape> shapes;
    std::vector<LayerKind> kinds;
    std::vector<int> stage_of; // -1 for stem/classifier
    std::vector<int> block_of; // -1 for non-block tensors

    std::size_t tensor_count() const { return names.size(); }
    std::size_t total_params() const;
};

SupernetLayout make_layout(const SearchSpaceConfig& cfg);

using TensorSet = std::vector<std::vector<double>>; // one vector per tensor

struct SupernetState {
    SupernetLayout layout;
    TensorSet values;
    std::uint64_t space_hash = 0;
    int round = 0;
};

SupernetState init_supernet(const SearchSpaceConfig& cfg, std::uint64_t seed,
                            double init_scale = 0.1);

// First-k channel activity per tensor entry: output index < active c_out
// and input index < active upstream width; inactive blocks are all zero.
struct ActivityMask {
    std::vector<std::vector<std::uint8_t>> active;
    std::size_t active_count() const;
};

ActivityMask build_mask(const SupernetLayout& layout, const SearchSpaceConfig& cfg,
                        const ArchGenome& g);

struct Subnet {
    TensorSet weights; // full-size copy, zero outside the mask
    ActivityMask mask;
};

Subnet extract_subnet(const SupernetState& state, const SearchSpaceConfig& cfg,
                      const ArchGenome& g);

double beta_schedule(int t, int total_rounds);

struct ClientState {
    int id = 0;
    double data_weight = 1.0;
    TensorSet target; // w*_k, full size
    long long min_count = 0;
    long long max_count = 0;
};

struct FedsimConfig {
    int clients = 8;
    double participation = 1.0; // ceil(C*K) selected per round
    int rounds = 200;
    int local_epochs = 5;
    double eta = 0.1;
    double eta_g = 1.0;
    double sigma = 0.0;   // per-client target spread; 0 = IID
    double epsilon = 1e-8;
    int data_weight_min = 50;
    int data_weight_max = 150;

    void validate() const;
};

void to_json(json& j, const FedsimConfig& c);
void from_json(const json& j, FedsimConfig& c);

std::vector<ClientState> make_clients(const SupernetLayout& layout, const FedsimConfig& cfg,
                                      std::uint64_t seed);

// One round's assignment. genome_index points into the caller's genome list
// (cache order, ascending budget); kmax_pos indexes `clients`.
struct RoundPlan {
    std::vector<int> clients; // selected ids, ascending
    std::vector<int> genome_index;
    int kmax_pos = -1;
    double beta = 0.0;
};

// Least-frequently-assigned client gets the min genome, the least-frequent
// of the rest gets the max genome (ties broken by lowest id), everyone else
// draws uniformly from the cache. Updates the per-client counters.
RoundPlan path_sample(std::vector<ClientState>& clients, const std::vector<int>& selected,
                      int n_genomes, double beta, Rng& rng);

// ceil(participation * K) distinct ids, ascending.
std::vector<int> select_clients(int n_clients, double participation, Rng& rng);

// Masked quadratic loss of `weights` against the client target.
double client_loss(const TensorSet& weights, const ActivityMask& mask,
                   const ClientState& client);

// E full-batch GD steps on the masked quadratic; returns the accumulated
// delta (w' - w), zero outside the mask.
TensorSet local_train(const Subnet& received, const ClientState& client, int epochs,
                      double eta);
TensorSet local_train_serial(const Subnet& received, const ClientState& client, int epochs,
                             double eta);

struct Contribution {
    const TensorSet* delta = nullptr;
    const ActivityMask* mask = nullptr;
};

// Scalar reference: plain per-parameter loops, no OpenMP. This is the oracle
// the parallel kernel is checked against (bit-for-bit).
TensorSet maxnet_aggregate_serial(const std::vector<Contribution>& contribs, int kmax_pos,
                                  double beta, double epsilon);
// OpenMP over parameters; identical inner summation order.
TensorSet maxnet_aggregate(const std::vector<Contribution>& contribs, int kmax_pos,
                           double beta, double epsilon);

void apply_update(SupernetState& state, const TensorSet& delta, double eta_g);

struct RoundTrace {
    int round = 0;
    double beta = 0.0;
    // Data-weighted mean loss of the selected clients on their assigned
    // subnets, measured on the weights they received (pre-update).
    double global_objective = 0.0;
    // Fixed-mask losses over all clients at the cache endpoints (pre-update).
    double loss_min_genome = 0.0;
    double loss_max_genome = 0.0;
};

struct TrainResult {
    SupernetState state;
    std::vector<RoundTrace> trace;
};

TrainResult run_training(const SearchSpaceConfig& cfg, const FedsimConfig& fed,
                         const std::vector<ArchGenome>& cache_genomes, std::uint64_t seed);

// round,beta,global_objective,loss_min_genome,loss_max_genome
std::string trace_to_csv(const std::vector<RoundTrace>& trace);

// Checkpoint container: JSON header (version, space hash, round, shapes),
// then all tensor values as little-endian float64.
void save_checkpoint(const std::string& path, const SupernetState& state);
SupernetState load_checkpoint(const std::string& path, const SearchSpaceConfig& cfg);

} // namespace pnas
