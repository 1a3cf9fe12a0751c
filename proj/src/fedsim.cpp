#include "pnas/fedsim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pnas/errors.hpp"
#include "pnas/io.hpp"

namespace pnas {

namespace {

int round_channels(double x) { return static_cast<int>(std::floor(x + 0.5)); }
int stage_width(double w, int base) { return std::max(1, round_channels(w * base)); }
int bottleneck_width(double e, int c_out, int floor_width) {
    return std::max(floor_width, round_channels(e * c_out));
}

constexpr double kPi = 3.14159265358979323846;

} // namespace

std::size_t SupernetLayout::total_params() const {
    std::size_t n = 0;
    for (const TensorShape& s : shapes) n += s.size();
    return n;
}

SupernetLayout make_layout(const SearchSpaceConfig& cfg) {
    cfg.validate();
    const ArchGenome g = max_genome(cfg);
    const ArchInstance inst = decode(g, cfg);

    // Walk the maximal instance in decode order, assigning stable names.
    SupernetLayout layout;
    layout.names.push_back("stem");
    layout.shapes.push_back({inst.stem_width, cfg.input_channels, 3, 3});
    layout.kinds.push_back(LayerKind::stem);
    layout.stage_of.push_back(-1);
    layout.block_of.push_back(-1);

    std::size_t li = 1;
    for (int i = 0; i < cfg.num_stages; ++i) {
        for (int b = 0; b < g.depths[static_cast<std::size_t>(i)]; ++b) {
            const LayerSpec& reduce = inst.layers[li++];
            const LayerSpec& expand = inst.layers[li++];
            const std::string prefix = "s" + std::to_string(i) + ".b" + std::to_string(b);
            layout.names.push_back(prefix + ".reduce");
            layout.shapes.push_back({reduce.c_out, reduce.c_in, 3, 3});
            layout.kinds.push_back(LayerKind::bottleneck_reduce);
            layout.stage_of.push_back(i);
            layout.block_of.push_back(b);
            layout.names.push_back(prefix + ".expand");
            layout.shapes.push_back({expand.c_out, expand.c_in, 3, 3});
            layout.kinds.push_back(LayerKind::bottleneck_expand);
            layout.stage_of.push_back(i);
            layout.block_of.push_back(b);
            if (b == 0) {
                const LayerSpec& proj = inst.layers[li++];
                layout.names.push_back("s" + std::to_string(i) + ".proj");
                layout.shapes.push_back({proj.c_out, proj.c_in, 1, 1});
                layout.kinds.push_back(LayerKind::shortcut_projection);
                layout.stage_of.push_back(i);
                layout.block_of.push_back(0);
            }
        }
    }
    const LayerSpec& cls = inst.layers.back();
    layout.names.push_back("classifier");
    layout.shapes.push_back({cls.c_out, cls.c_in, 1, 1});
    layout.kinds.push_back(LayerKind::classifier);
    layout.stage_of.push_back(-1);
    layout.block_of.push_back(-1);
    return layout;
}

SupernetState init_supernet(const SearchSpaceConfig& cfg, std::uint64_t seed,
                            double init_scale) {
    SupernetState state;
    state.layout = make_layout(cfg);
    state.space_hash = cfg.hash();
    state.values.resize(state.layout.tensor_count());
    Rng rng(seed);
    for (std::size_t t = 0; t < state.layout.tensor_count(); ++t) {
        state.values[t].resize(state.layout.shapes[t].size());
        for (double& v : state.values[t]) v = init_scale * gaussian(rng);
    }
    return state;
}

std::size_t ActivityMask::active_count() const {
    std::size_t n = 0;
    for (const auto& t : active)
        for (std::uint8_t b : t) n += b;
    return n;
}

ActivityMask build_mask(const SupernetLayout& layout, const SearchSpaceConfig& cfg,
                        const ArchGenome& g) {
    require_valid(g, cfg);
    const int n = cfg.max_blocks_per_stage();

    // Active widths per stage under this genome.
    const int stem_active = stage_width(g.widths[0], cfg.base_channels[0]);
    std::vector<int> stage_active(static_cast<std::size_t>(cfg.num_stages));
    for (int i = 0; i < cfg.num_stages; ++i)
        stage_active[static_cast<std::size_t>(i)] =
            stage_width(g.widths[static_cast<std::size_t>(i) + 1], cfg.base_channels[i]);
    auto prev_active = [&](int stage) {
        return stage == 0 ? stem_active : stage_active[static_cast<std::size_t>(stage) - 1];
    };

    ActivityMask mask;
    mask.active.resize(layout.tensor_count());
    for (std::size_t t = 0; t < layout.tensor_count(); ++t) {
        const TensorShape& shape = layout.shapes[t];
        std::vector<std::uint8_t>& m = mask.active[t];
        m.assign(shape.size(), 0);

        int out_a = 0, in_a = 0;
        const int stage = layout.stage_of[t];
        const int block = layout.block_of[t];
        switch (layout.kinds[t]) {
            case LayerKind::stem:
                out_a = stem_active;
                in_a = cfg.input_channels;
                break;
            case LayerKind::bottleneck_reduce:
                if (block < g.depths[static_cast<std::size_t>(stage)]) {
                    out_a = bottleneck_width(
                        g.expansions[static_cast<std::size_t>(stage) * n + block],
                        stage_active[static_cast<std::size_t>(stage)],
                        cfg.min_bottleneck_width);
                    in_a = (block == 0) ? prev_active(stage)
                                        : stage_active[static_cast<std::size_t>(stage)];
                }
                break;
            case LayerKind::bottleneck_expand:
                if (block < g.depths[static_cast<std::size_t>(stage)]) {
                    out_a = stage_active[static_cast<std::size_t>(stage)];
                    in_a = bottleneck_width(
                        g.expansions[static_cast<std::size_t>(stage) * n + block],
                        stage_active[static_cast<std::size_t>(stage)],
                        cfg.min_bottleneck_width);
                }
                break;
            case LayerKind::shortcut_projection:
                out_a = stage_active[static_cast<std::size_t>(stage)];
                in_a = prev_active(stage);
                break;
            case LayerKind::classifier:
                out_a = cfg.num_classes;
                in_a = stage_active[static_cast<std::size_t>(cfg.num_stages) - 1];
                break;
        }
        out_a = std::min(out_a, shape.rows);
        in_a = std::min(in_a, shape.cols);
        const int kk = shape.kh * shape.kw;
        for (int o = 0; o < out_a; ++o) {
            for (int ci = 0; ci < in_a; ++ci) {
                const std::size_t base =
                    (static_cast<std::size_t>(o) * shape.cols + ci) * kk;
                std::fill(m.begin() + static_cast<std::ptrdiff_t>(base),
                          m.begin() + static_cast<std::ptrdiff_t>(base + kk),
                          std::uint8_t{1});
            }
        }
    }
    return mask;
}

namespace {

Subnet extract_with_mask(const SupernetState& state, ActivityMask mask) {
    Subnet sub;
    sub.weights.resize(state.values.size());
    for (std::size_t t = 0; t < state.values.size(); ++t) {
        const std::vector<double>& src = state.values[t];
        const std::vector<std::uint8_t>& m = mask.active[t];
        std::vector<double>& dst = sub.weights[t];
        dst.assign(src.size(), 0.0);
        for (std::size_t i = 0; i < src.size(); ++i)
            if (m[i]) dst[i] = src[i];
    }
    sub.mask = std::move(mask);
    return sub;
}

} // namespace

Subnet extract_subnet(const SupernetState& state, const SearchSpaceConfig& cfg,
                      const ArchGenome& g) {
    if (state.space_hash != cfg.hash())
        throw ConfigError("supernet state does not match the search space (hash mismatch)");
    return extract_with_mask(state, build_mask(state.layout, cfg, g));
}

double beta_schedule(int t, int total_rounds) {
    if (total_rounds < 1) throw ConfigError("beta schedule needs total_rounds >= 1");
    if (t < 0) throw ConfigError("beta schedule needs t >= 0");
    const double cutoff = 0.8 * static_cast<double>(total_rounds);
    if (static_cast<double>(t) >= cutoff) return 0.0;
    return 0.5 * (1.0 + std::cos(kPi * static_cast<double>(t) / cutoff));
}

void FedsimConfig::validate() const {
    if (clients < 2) throw ConfigError("fedsim needs at least 2 clients");
    if (!(participation > 0.0 && participation <= 1.0))
        throw ConfigError("participation must be in (0, 1]");
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (local_epochs < 1) throw ConfigError("local_epochs must be >= 1");
    if (eta <= 0.0) throw ConfigError("eta must be positive");
    if (epsilon <= 0.0) throw ConfigError("epsilon must be positive");
    if (sigma < 0.0) throw ConfigError("sigma must be >= 0");
    if (data_weight_min < 1 || data_weight_max < data_weight_min)
        throw ConfigError("data weight range is invalid");
    const int m = static_cast<int>(std::ceil(participation * clients));
    if (m < 2) throw ConfigError("participation selects fewer than 2 clients per round");
}

void to_json(json& j, const FedsimConfig& c) {
    j = json{{"clients", c.clients},
             {"participation", c.participation},
             {"rounds", c.rounds},
             {"local_epochs", c.local_epochs},
             {"eta", c.eta},
             {"eta_g", c.eta_g},
             {"sigma", c.sigma},
             {"epsilon", c.epsilon},
             {"data_weight_min", c.data_weight_min},
             {"data_weight_max", c.data_weight_max}};
}

void from_json(const json& j, FedsimConfig& c) {
    c = FedsimConfig{};
    static const char* known[] = {"clients", "participation",   "rounds",
                                  "local_epochs", "eta",        "eta_g",
                                  "sigma",   "epsilon",         "data_weight_min",
                                  "data_weight_max"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || (it.key() == k);
        if (!ok) throw ConfigError("unknown fedsim config key: " + it.key());
    }
    if (j.contains("clients")) j.at("clients").get_to(c.clients);
    if (j.contains("participation")) j.at("participation").get_to(c.participation);
    if (j.contains("rounds")) j.at("rounds").get_to(c.rounds);
    if (j.contains("local_epochs")) j.at("local_epochs").get_to(c.local_epochs);
    if (j.contains("eta")) j.at("eta").get_to(c.eta);
    if (j.contains("eta_g")) j.at("eta_g").get_to(c.eta_g);
    if (j.contains("sigma")) j.at("sigma").get_to(c.sigma);
    if (j.contains("epsilon")) j.at("epsilon").get_to(c.epsilon);
    if (j.contains("data_weight_min")) j.at("data_weight_min").get_to(c.data_weight_min);
    if (j.contains("data_weight_max")) j.at("data_weight_max").get_to(c.data_weight_max);
}

std::vector<ClientState> make_clients(const SupernetLayout& layout, const FedsimConfig& cfg,
                                      std::uint64_t seed) {
    Rng rng(seed);
    // One shared base target; per-client offsets scale with sigma.
    TensorSet base(layout.tensor_count());
    for (std::size_t t = 0; t < layout.tensor_count(); ++t) {
        base[t].resize(layout.shapes[t].size());
        for (double& v : base[t]) v = gaussian(rng);
    }
    std::vector<ClientState> clients(static_cast<std::size_t>(cfg.clients));
    for (int k = 0; k < cfg.clients; ++k) {
        ClientState& c = clients[static_cast<std::size_t>(k)];
        c.id = k;
        const int span = cfg.data_weight_max - cfg.data_weight_min + 1;
        c.data_weight = static_cast<double>(
            cfg.data_weight_min + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(span))));
        c.target = base;
        if (cfg.sigma > 0.0) {
            for (auto& tensor : c.target)
                for (double& v : tensor) v += cfg.sigma * gaussian(rng);
        }
    }
    return clients;
}

std::vector<int> select_clients(int n_clients, double participation, Rng& rng) {
    const int m = std::min(
        n_clients, std::max(1, static_cast<int>(std::ceil(participation * n_clients))));
    std::vector<int> ids(static_cast<std::size_t>(n_clients));
    std::iota(ids.begin(), ids.end(), 0);
    for (int i = 0; i < m; ++i) {
        const std::size_t j =
            static_cast<std::size_t>(i) +
            uniform_index(rng, static_cast<std::size_t>(n_clients - i));
        std::swap(ids[static_cast<std::size_t>(i)], ids[j]);
    }
    ids.resize(static_cast<std::size_t>(m));
    std::sort(ids.begin(), ids.end());
    return ids;
}

RoundPlan path_sample(std::vector<ClientState>& clients, const std::vector<int>& selected,
                      int n_genomes, double beta, Rng& rng) {
    if (selected.size() < 2)
        throw ConfigError("path sampling needs at least 2 selected clients");
    if (n_genomes < 1) throw ConfigError("path sampling needs a non-empty cache");

    // Least-frequently-assigned endpoints; ties go to the lowest client id.
    auto pick = [&](auto counter, int exclude) {
        int best = -1;
        long long best_count = 0;
        for (int id : selected) {
            if (id == exclude) continue;
            const long long c = counter(clients[static_cast<std::size_t>(id)]);
            if (best < 0 || c < best_count) {
                best = id;
                best_count = c;
            }
        }
        return best;
    };
    const int min_assignee =
        pick([](const ClientState& c) { return c.min_count; }, -1);
    const int max_assignee =
        pick([](const ClientState& c) { return c.max_count; }, min_assignee);

    RoundPlan plan;
    plan.clients = selected;
    plan.beta = beta;
    plan.genome_index.resize(selected.size());
    for (std::size_t i = 0; i < selected.size(); ++i) {
        const int id = selected[i];
        if (id == min_assignee) {
            plan.genome_index[i] = 0;
        } else if (id == max_assignee) {
            plan.genome_index[i] = n_genomes - 1;
            plan.kmax_pos = static_cast<int>(i);
        } else {
            plan.genome_index[i] =
                static_cast<int>(uniform_index(rng, static_cast<std::size_t>(n_genomes)));
        }
    }
    clients[static_cast<std::size_t>(min_assignee)].min_count += 1;
    clients[static_cast<std::size_t>(max_assignee)].max_count += 1;
    return plan;
}

double client_loss(const TensorSet& weights, const ActivityMask& mask,
                   const ClientState& client) {
    double loss = 0.0;
    for (std::size_t t = 0; t < weights.size(); ++t) {
        const std::vector<double>& w = weights[t];
        const std::vector<double>& tgt = client.target[t];
        const std::vector<std::uint8_t>& m = mask.active[t];
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (!m[i]) continue;
            const double d = w[i] - tgt[i];
            loss += 0.5 * d * d;
        }
    }
    return loss;
}

namespace {

// Shared body; OpenMP toggles on the entry loop. Delta is accumulated from
// the actual steps so a single eta=1 epoch yields exactly target - w.
template <bool Parallel>
TensorSet local_train_impl(const Subnet& received, const ClientState& client, int epochs,
                           double eta) {
    if (epochs < 1) throw ConfigError("local_train needs epochs >= 1");
    TensorSet delta(received.weights.size());
    for (std::size_t t = 0; t < received.weights.size(); ++t) {
        const std::vector<double>& w0 = received.weights[t];
        const std::vector<double>& tgt = client.target[t];
        const std::vector<std::uint8_t>& m = received.mask.active[t];
        std::vector<double>& d = delta[t];
        d.assign(w0.size(), 0.0);
        const std::int64_t n = static_cast<std::int64_t>(w0.size());
#pragma omp parallel for schedule(static) if (Parallel)
        for (std::int64_t i = 0; i < n; ++i) {
            if (!m[static_cast<std::size_t>(i)]) continue;
            double w = w0[static_cast<std::size_t>(i)];
            double acc = 0.0;
            for (int e = 0; e < epochs; ++e) {
                const double step = eta * (w - tgt[static_cast<std::size_t>(i)]);
                w -= step;
                acc -= step;
            }
            d[static_cast<std::size_t>(i)] = acc;
        }
    }
    return delta;
}

} // namespace

TensorSet local_train(const Subnet& received, const ClientState& client, int epochs,
                      double eta) {
    return local_train_impl<true>(received, client, epochs, eta);
}

TensorSet local_train_serial(const Subnet& received, const ClientState& client, int epochs,
                             double eta) {
    return local_train_impl<false>(received, client, epochs, eta);
}

namespace {

// One parameter's aggregate. Shared by the serial reference and the OpenMP
// kernel so the summation order is identical by construction; the kernels
// stay bit-for-bit equal at any thread count.
inline double aggregate_one(const std::vector<Contribution>& contribs, int kmax_pos,
                            double beta, double epsilon, std::size_t t, std::size_t i) {
    double num = 0.0;
    double den = 0.0;
    const Contribution& cm = contribs[static_cast<std::size_t>(kmax_pos)];
    if (cm.mask->active[t][i]) {
        num += beta * (*cm.delta)[t][i];
        den += beta;
    }
    const double rest = 1.0 - beta;
    for (std::size_t k = 0; k < contribs.size(); ++k) {
        if (static_cast<int>(k) == kmax_pos) continue;
        const Contribution& c = contribs[k];
        if (!c.mask->active[t][i]) continue;
        num += rest * (*c.delta)[t][i];
        den += rest;
    }
    return num / (den + epsilon);
}

void check_contribs(const std::vector<Contribution>& contribs, int kmax_pos) {
    if (contribs.empty()) throw ConfigError("aggregation needs at least one contribution");
    if (kmax_pos < 0 || kmax_pos >= static_cast<int>(contribs.size()))
        throw ConfigError("kmax position out of range");
    const std::size_t tensors = contribs.front().delta->size();
    for (const Contribution& c : contribs) {
        if (c.delta->size() != tensors || c.mask->active.size() != tensors)
            throw ShapeError("contributions disagree on tensor count");
        for (std::size_t t = 0; t < tensors; ++t)
            if ((*c.delta)[t].size() != (*contribs.front().delta)[t].size() ||
                c.mask->active[t].size() != (*c.delta)[t].size())
                throw ShapeError("contributions disagree on tensor shapes");
    }
}

} // namespace

TensorSet maxnet_aggregate_serial(const std::vector<Contribution>& contribs, int kmax_pos,
                                  double beta, double epsilon) {
    check_contribs(contribs, kmax_pos);
    const TensorSet& ref = *contribs.front().delta;
    TensorSet out(ref.size());
    for (std::size_t t = 0; t < ref.size(); ++t) {
        out[t].resize(ref[t].size());
        for (std::size_t i = 0; i < ref[t].size(); ++i)
            out[t][i] = aggregate_one(contribs, kmax_pos, beta, epsilon, t, i);
    }
    return out;
}

TensorSet maxnet_aggregate(const std::vector<Contribution>& contribs, int kmax_pos,
                           double beta, double epsilon) {
    check_contribs(contribs, kmax_pos);
    const TensorSet& ref = *contribs.front().delta;
    TensorSet out(ref.size());
    for (std::size_t t = 0; t < ref.size(); ++t) {
        out[t].resize(ref[t].size());
        const std::int64_t n = static_cast<std::int64_t>(ref[t].size());
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i)
            out[t][static_cast<std::size_t>(i)] = aggregate_one(
                contribs, kmax_pos, beta, epsilon, t, static_cast<std::size_t>(i));
    }
    return out;
}

void apply_update(SupernetState& state, const TensorSet& delta, double eta_g) {
    if (delta.size() != state.values.size())
        throw ShapeError("update tensor count does not match state");
    for (std::size_t t = 0; t < state.values.size(); ++t) {
        if (delta[t].size() != state.values[t].size())
            throw ShapeError("update shape does not match state tensor " +
                             state.layout.names[t]);
        std::vector<double>& w = state.values[t];
        const std::vector<double>& d = delta[t];
        const std::int64_t n = static_cast<std::int64_t>(w.size());
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i)
            w[static_cast<std::size_t>(i)] += eta_g * d[static_cast<std::size_t>(i)];
    }
}

TrainResult run_training(const SearchSpaceConfig& cfg, const FedsimConfig& fed,
                         const std::vector<ArchGenome>& cache_genomes, std::uint64_t seed) {
    cfg.validate();
    fed.validate();
    if (cache_genomes.empty()) throw ConfigError("run_training needs a non-empty cache");
    for (const ArchGenome& g : cache_genomes) require_valid(g, cfg);

    TrainResult result;
    result.state = init_supernet(cfg, mix_seed(seed, 1));
    std::vector<ClientState> clients =
        make_clients(result.state.layout, fed, mix_seed(seed, 2));
    Rng round_rng(mix_seed(seed, 3));

    std::vector<ActivityMask> genome_masks;
    genome_masks.reserve(cache_genomes.size());
    for (const ArchGenome& g : cache_genomes)
        genome_masks.push_back(build_mask(result.state.layout, cfg, g));
    const ActivityMask& mask_min = genome_masks.front();
    const ActivityMask& mask_max = genome_masks.back();

    const int n_genomes = static_cast<int>(cache_genomes.size());
    result.trace.reserve(static_cast<std::size_t>(fed.rounds));

    for (int t = 0; t < fed.rounds; ++t) {
        const double beta = beta_schedule(t, fed.rounds);
        const std::vector<int> selected =
            select_clients(fed.clients, fed.participation, round_rng);
        const RoundPlan plan = path_sample(clients, selected, n_genomes, beta, round_rng);

        const int m = static_cast<int>(plan.clients.size());
        std::vector<TensorSet> deltas(static_cast<std::size_t>(m));
        std::vector<double> pre_losses(static_cast<std::size_t>(m), 0.0);

        // Clients are independent: no RNG inside, so the parallel schedule
        // cannot change results.
#pragma omp parallel for schedule(dynamic)
        for (int ci = 0; ci < m; ++ci) {
            const ClientState& client =
                clients[static_cast<std::size_t>(plan.clients[static_cast<std::size_t>(ci)])];
            const ActivityMask& mask =
                genome_masks[static_cast<std::size_t>(plan.genome_index[static_cast<std::size_t>(ci)])];
            Subnet received = extract_with_mask(result.state, mask);
            pre_losses[static_cast<std::size_t>(ci)] =
                client_loss(received.weights, mask, client);
            deltas[static_cast<std::size_t>(ci)] =
                local_train_impl<false>(received, client, fed.local_epochs, fed.eta);
        }

        double weight_sum = 0.0;
        double objective = 0.0;
        for (int ci = 0; ci < m; ++ci) {
            const double w =
                clients[static_cast<std::size_t>(plan.clients[static_cast<std::size_t>(ci)])]
                    .data_weight;
            weight_sum += w;
            objective += w * pre_losses[static_cast<std::size_t>(ci)];
        }
        objective /= weight_sum;

        // Fixed-mask losses at the cache endpoints over every client
        // (parallel per client, serial weighted combine for determinism).
        const int n_clients = static_cast<int>(clients.size());
        std::vector<double> lmin(static_cast<std::size_t>(n_clients));
        std::vector<double> lmax(static_cast<std::size_t>(n_clients));
#pragma omp parallel for schedule(dynamic)
        for (int k = 0; k < n_clients; ++k) {
            lmin[static_cast<std::size_t>(k)] =
                client_loss(result.state.values, mask_min, clients[static_cast<std::size_t>(k)]);
            lmax[static_cast<std::size_t>(k)] =
                client_loss(result.state.values, mask_max, clients[static_cast<std::size_t>(k)]);
        }
        double all_weight = 0.0, loss_min = 0.0, loss_max = 0.0;
        for (int k = 0; k < n_clients; ++k) {
            const double w = clients[static_cast<std::size_t>(k)].data_weight;
            all_weight += w;
            loss_min += w * lmin[static_cast<std::size_t>(k)];
            loss_max += w * lmax[static_cast<std::size_t>(k)];
        }
        loss_min /= all_weight;
        loss_max /= all_weight;

        std::vector<Contribution> contribs(static_cast<std::size_t>(m));
        for (int ci = 0; ci < m; ++ci)
            contribs[static_cast<std::size_t>(ci)] = {
                &deltas[static_cast<std::size_t>(ci)],
                &genome_masks[static_cast<std::size_t>(
                    plan.genome_index[static_cast<std::size_t>(ci)])]};
        const TensorSet agg = maxnet_aggregate(contribs, plan.kmax_pos, beta, fed.epsilon);
        apply_update(result.state, agg, fed.eta_g);
        result.state.round = t + 1;

        result.trace.push_back({t, beta, objective, loss_min, loss_max});
    }
    return result;
}

std::string trace_to_csv(const std::vector<RoundTrace>& trace) {
    std::ostringstream out;
    out << "round,beta,global_objective,loss_min_genome,loss_max_genome\n";
    for (const RoundTrace& r : trace)
        out << r.round << ',' << fmt_double(r.beta) << ',' << fmt_double(r.global_objective)
            << ',' << fmt_double(r.loss_min_genome) << ',' << fmt_double(r.loss_max_genome)
            << '\n';
    return out.str();
}

void save_checkpoint(const std::string& path, const SupernetState& state) {
    json tensors = json::array();
    std::size_t total = 0;
    for (std::size_t t = 0; t < state.layout.tensor_count(); ++t) {
        const TensorShape& s = state.layout.shapes[t];
        tensors.push_back(json{{"name", state.layout.names[t]},
                               {"rows", s.rows},
                               {"cols", s.cols},
                               {"kh", s.kh},
                               {"kw", s.kw}});
        total += s.size();
    }
    json header{{"format", "pnas-checkpoint"},
                {"version", 1},
                {"space_hash", hex64(state.space_hash)},
                {"round", state.round},
                {"tensors", tensors}};
    std::vector<double> payload;
    payload.reserve(total);
    for (const auto& v : state.values) payload.insert(payload.end(), v.begin(), v.end());
    write_blob(path, std::move(header), payload);
}

SupernetState load_checkpoint(const std::string& path, const SearchSpaceConfig& cfg) {
    std::vector<double> payload;
    const json header = read_blob(path, payload);
    if (header.value("format", "") != "pnas-checkpoint")
        throw IoError("not a checkpoint file: " + path);
    if (header.at("version").get<int>() != 1) throw IoError("unsupported checkpoint version");

    SupernetState state;
    state.layout = make_layout(cfg);
    state.space_hash = cfg.hash();
    state.round = header.at("round").get<int>();
    const std::uint64_t stored =
        std::stoull(header.at("space_hash").get<std::string>(), nullptr, 16);
    if (stored != state.space_hash)
        throw ConfigError("checkpoint was written for a different search space");

    const json& tensors = header.at("tensors");
    if (tensors.size() != state.layout.tensor_count())
        throw ShapeError("checkpoint tensor count does not match the space");
    std::size_t offset = 0;
    state.values.resize(state.layout.tensor_count());
    for (std::size_t t = 0; t < state.layout.tensor_count(); ++t) {
        const json& tj = tensors[t];
        const TensorShape expect = state.layout.shapes[t];
        if (tj.at("name").get<std::string>() != state.layout.names[t] ||
            tj.at("rows").get<int>() != expect.rows || tj.at("cols").get<int>() != expect.cols ||
            tj.at("kh").get<int>() != expect.kh || tj.at("kw").get<int>() != expect.kw)
            throw ShapeError("checkpoint tensor " + std::to_string(t) +
                             " does not match the space layout");
        const std::size_t n = expect.size();
        if (offset + n > payload.size()) throw ShapeError("checkpoint payload too short");
        state.values[t].assign(payload.begin() + static_cast<std::ptrdiff_t>(offset),
                               payload.begin() + static_cast<std::ptrdiff_t>(offset + n));
        offset += n;
    }
    if (offset != payload.size()) throw ShapeError("checkpoint payload has trailing data");
    return state;
}

} // namespace pnas
