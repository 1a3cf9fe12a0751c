#include "pnas/latency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pnas/errors.hpp"
#include "pnas/io.hpp"

namespace pnas {

DeviceProfile cpu_like_profile() { return {"cpu", 7.7, 0.02, 8.4, 0.1}; }
DeviceProfile gpu_like_profile() { return {"gpu", 0.05, 0.001, 3.8, 0.01}; }

std::optional<DeviceProfile> builtin_profile(const std::string& name) {
    if (name == "cpu") return cpu_like_profile();
    if (name == "gpu") return gpu_like_profile();
    return std::nullopt;
}

std::vector<double> featurize(const ArchGenome& g, const SearchSpaceConfig& cfg) {
    require_valid(g, cfg);
    const ArchInstance inst = decode(g, cfg);
    std::vector<double> f;
    f.reserve(static_cast<std::size_t>(cfg.genome_length()) + 2);
    for (int d : g.depths) f.push_back(static_cast<double>(d));
    for (double e : g.expansions) f.push_back(e);
    for (double w : g.widths) f.push_back(w);
    f.push_back(static_cast<double>(macs(inst)) * 1e-9);   // GMACs
    f.push_back(static_cast<double>(params(inst)) * 1e-6); // params_M
    return f;
}

double synth_latency(const ArchGenome& g, const SearchSpaceConfig& cfg,
                     const DeviceProfile& profile, Rng* rng) {
    const ArchInstance inst = decode(g, cfg);
    const double gmacs = static_cast<double>(macs(inst)) * 1e-9;
    const double layers = static_cast<double>(inst.layers.size());
    double lat = profile.ms_per_gmac * gmacs + profile.ms_per_layer * layers + profile.base_ms;
    if (rng != nullptr && profile.noise_sigma > 0.0) lat += profile.noise_sigma * gaussian(*rng);
    return std::max(lat, 1e-3); // clamp positive
}

LatencyDataset generate_latency_dataset(const SearchSpaceConfig& cfg,
                                        const DeviceProfile& profile, int n,
                                        std::uint64_t seed) {
    cfg.validate();
    if (n < 1) throw ConfigError("latency dataset needs n >= 1");
    Rng rng(seed);
    LatencyDataset ds;
    ds.device = profile.name;
    ds.genomes.reserve(static_cast<std::size_t>(n));
    ds.latency_ms.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        ArchGenome g = random_genome(cfg, rng);
        ds.latency_ms.push_back(synth_latency(g, cfg, profile, &rng));
        ds.genomes.push_back(std::move(g));
    }
    return ds;
}

std::vector<LatencySample> samples_from_dataset(const LatencyDataset& ds,
                                                const SearchSpaceConfig& cfg) {
    std::vector<LatencySample> samples;
    samples.reserve(ds.genomes.size());
    for (std::size_t i = 0; i < ds.genomes.size(); ++i)
        samples.push_back({featurize(ds.genomes[i], cfg), ds.latency_ms[i], ds.device});
    return samples;
}

std::string latency_csv(const LatencyDataset& ds, const SearchSpaceConfig& cfg) {
    const int s = cfg.num_stages;
    const int n = cfg.max_blocks_per_stage();
    std::ostringstream out;
    for (int i = 0; i < s; ++i) out << 'd' << i << ',';
    for (int i = 0; i < s * n; ++i) out << 'e' << i << ',';
    for (int i = 0; i < s + 1; ++i) out << 'w' << i << ',';
    out << "latency_ms,device\n";
    for (std::size_t r = 0; r < ds.genomes.size(); ++r) {
        for (int idx : to_indices(ds.genomes[r], cfg)) out << idx << ',';
        out << fmt_double(ds.latency_ms[r]) << ',' << ds.device << '\n';
    }
    return out.str();
}

LatencyDataset latency_from_csv(const std::string& text, const SearchSpaceConfig& cfg) {
    cfg.validate();
    const int genes = cfg.genome_length();
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError("latency CSV is empty");

    LatencyDataset ds;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (static_cast<int>(cells.size()) != genes + 2)
            throw DataError("latency CSV line " + std::to_string(line_no) +
                            " has wrong column count");
        try {
            std::vector<int> flat;
            flat.reserve(static_cast<std::size_t>(genes));
            for (int i = 0; i < genes; ++i)
                flat.push_back(std::stoi(cells[static_cast<std::size_t>(i)]));
            ds.genomes.push_back(from_indices(flat, cfg));
            ds.latency_ms.push_back(std::stod(cells[static_cast<std::size_t>(genes)]));
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw DataError("latency CSV line " + std::to_string(line_no) + " is malformed");
        }
        const std::string& dev = cells.back();
        if (ds.device.empty())
            ds.device = dev;
        else if (ds.device != dev)
            throw DataError("latency CSV mixes device tags ('" + ds.device + "' vs '" + dev +
                            "')");
    }
    if (ds.genomes.empty()) throw DataError("latency CSV has no data rows");
    return ds;
}

void LpmConfig::validate() const {
    if (hidden_units < 1) throw ConfigError("hidden_units must be >= 1");
    if (hidden_layers < 1) throw ConfigError("hidden_layers must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw ConfigError("val_fraction must be in (0, 1)");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
    if (ensemble < 1) throw ConfigError("ensemble must be >= 1");
}

void to_json(json& j, const LpmConfig& c) {
    j = json{{"hidden_units", c.hidden_units},     {"hidden_layers", c.hidden_layers},
             {"epochs", c.epochs},                 {"learning_rate", c.learning_rate},
             {"batch_size", c.batch_size},         {"val_fraction", c.val_fraction},
             {"momentum", c.momentum},             {"ensemble", c.ensemble}};
}

void from_json(const json& j, LpmConfig& c) {
    c = LpmConfig{};
    static const char* known[] = {"hidden_units", "hidden_layers", "epochs",
                                  "learning_rate", "batch_size",   "val_fraction",
                                  "momentum",      "ensemble"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || (it.key() == k);
        if (!ok) throw ConfigError("unknown latency config key: " + it.key());
    }
    if (j.contains("hidden_units")) j.at("hidden_units").get_to(c.hidden_units);
    if (j.contains("hidden_layers")) j.at("hidden_layers").get_to(c.hidden_layers);
    if (j.contains("epochs")) j.at("epochs").get_to(c.epochs);
    if (j.contains("learning_rate")) j.at("learning_rate").get_to(c.learning_rate);
    if (j.contains("batch_size")) j.at("batch_size").get_to(c.batch_size);
    if (j.contains("val_fraction")) j.at("val_fraction").get_to(c.val_fraction);
    if (j.contains("momentum")) j.at("momentum").get_to(c.momentum);
    if (j.contains("ensemble")) j.at("ensemble").get_to(c.ensemble);
}

namespace {

// One ensemble member's normalized forward pass. Weights/biases are stored
// member-major (member k's layer l lives at index k*layers + l); weights are
// row-major (out x in).
double forward(const LatencyModel& m, int member, const std::vector<double>& x,
               std::vector<std::vector<double>>* acts = nullptr,
               std::vector<std::vector<double>>* pre = nullptr) {
    const std::size_t n_layers = m.layer_sizes.size() - 1;
    const std::size_t base = static_cast<std::size_t>(member) * n_layers;
    std::vector<double> cur(m.input_dim);
    for (int i = 0; i < m.input_dim; ++i)
        cur[static_cast<std::size_t>(i)] =
            (x[static_cast<std::size_t>(i)] - m.feat_mean[static_cast<std::size_t>(i)]) *
            m.feat_scale[static_cast<std::size_t>(i)];
    if (acts) acts->clear();
    if (pre) pre->clear();
    for (std::size_t layer = 0; layer < n_layers; ++layer) {
        if (acts) acts->push_back(cur);
        const int in = m.layer_sizes[layer];
        const int out = m.layer_sizes[layer + 1];
        std::vector<double> next(static_cast<std::size_t>(out));
        for (int o = 0; o < out; ++o) {
            double acc = m.biases[base + layer][static_cast<std::size_t>(o)];
            const double* w = &m.weights[base + layer][static_cast<std::size_t>(o) *
                                                       static_cast<std::size_t>(in)];
            for (int i = 0; i < in; ++i) acc += w[i] * cur[static_cast<std::size_t>(i)];
            next[static_cast<std::size_t>(o)] = acc;
        }
        if (pre) pre->push_back(next);
        const bool last = (layer + 1 == n_layers);
        if (!last)
            for (double& v : next) v = std::max(0.0, v);
        cur = std::move(next);
    }
    return cur[0]; // normalized prediction
}

// Ensemble mean in normalized target space.
double forward_mean(const LatencyModel& m, const std::vector<double>& x) {
    double acc = 0.0;
    for (int k = 0; k < m.ensemble; ++k) acc += forward(m, k, x);
    return acc / static_cast<double>(m.ensemble);
}

} // namespace

LatencyModel train_lpm(const std::vector<LatencySample>& samples, const LpmConfig& cfg,
                       std::uint64_t seed, std::uint64_t space_hash,
                       const std::string& device) {
    cfg.validate();
    if (samples.size() < 50)
        throw DataError("latency training needs at least 50 samples, got " +
                        std::to_string(samples.size()));
    const std::size_t dim = samples.front().features.size();
    for (const LatencySample& s : samples) {
        if (s.features.size() != dim)
            throw ShapeError("latency samples disagree on feature dimension");
        if (s.device != samples.front().device)
            throw DataError("latency training set mixes device tags");
    }
    if (!device.empty() && device != samples.front().device)
        throw DataError("latency samples are tagged '" + samples.front().device +
                        "', expected '" + device + "'");

    Rng rng(seed);
    // One shuffle, then an 80/20 split: the tail is validation.
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
        const std::size_t j = uniform_index(rng, i + 1);
        std::swap(order[i], order[j]);
    }
    const std::size_t n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(cfg.val_fraction * samples.size())));
    const std::size_t n_train = samples.size() - n_val;
    if (n_train < 1) throw DataError("latency training split left no training samples");

    LatencyModel m;
    m.input_dim = static_cast<int>(dim);
    m.device = samples.front().device;
    m.space_hash = space_hash;

    // z-score stats from the training split only.
    m.feat_mean.assign(dim, 0.0);
    m.feat_scale.assign(dim, 0.0);
    for (std::size_t r = 0; r < n_train; ++r)
        for (std::size_t i = 0; i < dim; ++i) m.feat_mean[i] += samples[order[r]].features[i];
    for (double& v : m.feat_mean) v /= static_cast<double>(n_train);
    std::vector<double> var(dim, 0.0);
    for (std::size_t r = 0; r < n_train; ++r)
        for (std::size_t i = 0; i < dim; ++i) {
            const double d = samples[order[r]].features[i] - m.feat_mean[i];
            var[i] += d * d;
        }
    for (std::size_t i = 0; i < dim; ++i) {
        const double sd = std::sqrt(var[i] / static_cast<double>(n_train));
        // constant features carry no signal; scale 0 drops them after centering
        m.feat_scale[i] = (sd > 1e-12) ? 1.0 / sd : 0.0;
    }
    double tmean = 0.0;
    for (std::size_t r = 0; r < n_train; ++r) tmean += samples[order[r]].latency_ms;
    tmean /= static_cast<double>(n_train);
    double tvar = 0.0;
    for (std::size_t r = 0; r < n_train; ++r) {
        const double d = samples[order[r]].latency_ms - tmean;
        tvar += d * d;
    }
    m.target_mean = tmean;
    m.target_std = std::sqrt(tvar / static_cast<double>(n_train));
    if (m.target_std < 1e-12) m.target_std = 1.0;

    // [in, hidden.., 1] per ensemble member. A single net of this size rank-
    // orders unseen architectures noticeably worse run-to-run; averaging a
    // small bag of independently seeded nets cancels the interpolation wiggle
    // while each member keeps the same recipe.
    m.ensemble = cfg.ensemble;
    m.layer_sizes.push_back(m.input_dim);
    for (int l = 0; l < cfg.hidden_layers; ++l) m.layer_sizes.push_back(cfg.hidden_units);
    m.layer_sizes.push_back(1);
    const std::size_t n_layers = m.layer_sizes.size() - 1;

    std::vector<Rng> member_rng;
    for (int k = 0; k < cfg.ensemble; ++k)
        member_rng.emplace_back(mix_seed(seed, static_cast<std::uint64_t>(k) + 1));
    for (int k = 0; k < cfg.ensemble; ++k) {
        for (std::size_t l = 0; l < n_layers; ++l) {
            const int in = m.layer_sizes[l];
            const int out = m.layer_sizes[l + 1];
            // Shrink the output layer's init so each net starts near the zero
            // function; the fit stays smoother between training points, which
            // matters for ranking quality on unseen architectures.
            double limit = std::sqrt(6.0 / static_cast<double>(in));
            if (l + 1 == n_layers) limit *= 0.1;
            std::vector<double> w(static_cast<std::size_t>(in) * out);
            for (double& v : w) v = (uniform_real(member_rng[static_cast<std::size_t>(k)]) * 2.0 - 1.0) * limit;
            m.weights.push_back(std::move(w));
            m.biases.emplace_back(static_cast<std::size_t>(out), 0.0);
        }
    }

    m.epoch_mse.assign(static_cast<std::size_t>(cfg.epochs), 0.0);
    std::vector<std::vector<double>> acts, pre;
    for (int k = 0; k < cfg.ensemble; ++k) {
        Rng& krng = member_rng[static_cast<std::size_t>(k)];
        const std::size_t base = static_cast<std::size_t>(k) * n_layers;

        std::vector<std::vector<double>> vel_w, vel_b, grad_w, grad_b;
        for (std::size_t l = 0; l < n_layers; ++l) {
            vel_w.emplace_back(m.weights[base + l].size(), 0.0);
            vel_b.emplace_back(m.biases[base + l].size(), 0.0);
            grad_w.emplace_back(m.weights[base + l].size(), 0.0);
            grad_b.emplace_back(m.biases[base + l].size(), 0.0);
        }
        std::vector<std::size_t> train_idx(order.begin(),
                                           order.begin() + static_cast<std::ptrdiff_t>(n_train));

        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            // reshuffle the training slice each epoch
            for (std::size_t i = train_idx.size() - 1; i > 0; --i) {
                const std::size_t j = uniform_index(krng, i + 1);
                std::swap(train_idx[i], train_idx[j]);
            }
            double epoch_loss = 0.0;
            std::size_t pos = 0;
            while (pos < train_idx.size()) {
                const std::size_t batch_end =
                    std::min(train_idx.size(), pos + static_cast<std::size_t>(cfg.batch_size));
                const std::size_t bs = batch_end - pos;
                for (std::size_t l = 0; l < n_layers; ++l) {
                    std::fill(grad_w[l].begin(), grad_w[l].end(), 0.0);
                    std::fill(grad_b[l].begin(), grad_b[l].end(), 0.0);
                }
                for (std::size_t b = pos; b < batch_end; ++b) {
                    const LatencySample& s = samples[train_idx[b]];
                    const double y = (s.latency_ms - m.target_mean) / m.target_std;
                    const double out = forward(m, k, s.features, &acts, &pre);
                    const double err = out - y;
                    epoch_loss += err * err;

                    // backprop: delta over layers from the top
                    std::vector<double> delta{2.0 * err / static_cast<double>(bs)};
                    for (std::size_t l = n_layers; l-- > 0;) {
                        const int in = m.layer_sizes[l];
                        const int olen = m.layer_sizes[l + 1];
                        for (int o = 0; o < olen; ++o) {
                            const double d = delta[static_cast<std::size_t>(o)];
                            if (d == 0.0) continue;
                            grad_b[l][static_cast<std::size_t>(o)] += d;
                            double* gw = &grad_w[l][static_cast<std::size_t>(o) *
                                                    static_cast<std::size_t>(in)];
                            const std::vector<double>& a = acts[l];
                            for (int i = 0; i < in; ++i)
                                gw[i] += d * a[static_cast<std::size_t>(i)];
                        }
                        if (l == 0) break;
                        std::vector<double> prev(static_cast<std::size_t>(in), 0.0);
                        for (int o = 0; o < olen; ++o) {
                            const double d = delta[static_cast<std::size_t>(o)];
                            if (d == 0.0) continue;
                            const double* w =
                                &m.weights[base + l][static_cast<std::size_t>(o) *
                                                     static_cast<std::size_t>(in)];
                            for (int i = 0; i < in; ++i)
                                prev[static_cast<std::size_t>(i)] += d * w[i];
                        }
                        // ReLU gate of the previous layer's pre-activation
                        for (int i = 0; i < in; ++i)
                            if (pre[l - 1][static_cast<std::size_t>(i)] <= 0.0)
                                prev[static_cast<std::size_t>(i)] = 0.0;
                        delta = std::move(prev);
                    }
                }
                for (std::size_t l = 0; l < n_layers; ++l) {
                    for (std::size_t i = 0; i < m.weights[base + l].size(); ++i) {
                        vel_w[l][i] =
                            cfg.momentum * vel_w[l][i] - cfg.learning_rate * grad_w[l][i];
                        m.weights[base + l][i] += vel_w[l][i];
                    }
                    for (std::size_t i = 0; i < m.biases[base + l].size(); ++i) {
                        vel_b[l][i] =
                            cfg.momentum * vel_b[l][i] - cfg.learning_rate * grad_b[l][i];
                        m.biases[base + l][i] += vel_b[l][i];
                    }
                }
                pos = batch_end;
            }
            if (!std::isfinite(epoch_loss))
                throw DivergenceError("latency training diverged at epoch " +
                                      std::to_string(epoch));
            m.epoch_mse[static_cast<std::size_t>(epoch)] +=
                epoch_loss / static_cast<double>(n_train);
        }
    }
    // mean running loss per epoch across members, back in ms^2
    for (double& v : m.epoch_mse)
        v = v / static_cast<double>(cfg.ensemble) * m.target_std * m.target_std;

    // final MSEs of the ensemble mean, in original units (ms^2)
    auto mse_over = [&](std::size_t from, std::size_t to) {
        double acc = 0.0;
        for (std::size_t r = from; r < to; ++r) {
            const LatencySample& s = samples[order[r]];
            const double pred = forward_mean(m, s.features) * m.target_std + m.target_mean;
            const double d = pred - s.latency_ms;
            acc += d * d;
        }
        return acc / static_cast<double>(to - from);
    };
    m.train_mse = mse_over(0, n_train);
    m.val_mse = mse_over(n_train, samples.size());
    if (!std::isfinite(m.train_mse) || !std::isfinite(m.val_mse))
        throw DivergenceError("latency training produced non-finite error");
    return m;
}

double predict(const LatencyModel& model, const std::vector<double>& features) {
    if (static_cast<int>(features.size()) != model.input_dim)
        throw ShapeError("feature vector length " + std::to_string(features.size()) +
                         " does not match model input " + std::to_string(model.input_dim));
    return forward_mean(model, features) * model.target_std + model.target_mean;
}

double predict(const LatencyModel& model, const ArchGenome& g,
               const SearchSpaceConfig& cfg) {
    if (model.space_hash != 0 && model.space_hash != cfg.hash())
        throw ConfigError("latency model was trained on a different search space");
    return predict(model, featurize(g, cfg));
}

void save_model(const std::string& path, const LatencyModel& m) {
    json header{{"format", "pnas-latency-model"},
                {"version", 1},
                {"input_dim", m.input_dim},
                {"layer_sizes", m.layer_sizes},
                {"ensemble", m.ensemble},
                {"feat_mean", m.feat_mean},
                {"feat_scale", m.feat_scale},
                {"target_mean", m.target_mean},
                {"target_std", m.target_std},
                {"device", m.device},
                {"space_hash", hex64(m.space_hash)},
                {"train_mse", m.train_mse},
                {"val_mse", m.val_mse}};
    std::vector<double> payload;
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        payload.insert(payload.end(), m.weights[l].begin(), m.weights[l].end());
        payload.insert(payload.end(), m.biases[l].begin(), m.biases[l].end());
    }
    write_blob(path, std::move(header), payload);
}

LatencyModel load_model(const std::string& path) {
    std::vector<double> payload;
    const json header = read_blob(path, payload);
    if (header.value("format", "") != "pnas-latency-model")
        throw IoError("not a latency model file: " + path);
    if (header.at("version").get<int>() != 1) throw IoError("unsupported model version");
    LatencyModel m;
    m.input_dim = header.at("input_dim").get<int>();
    header.at("layer_sizes").get_to(m.layer_sizes);
    m.ensemble = header.at("ensemble").get<int>();
    header.at("feat_mean").get_to(m.feat_mean);
    header.at("feat_scale").get_to(m.feat_scale);
    m.target_mean = header.at("target_mean").get<double>();
    m.target_std = header.at("target_std").get<double>();
    m.device = header.at("device").get<std::string>();
    m.space_hash = std::stoull(header.at("space_hash").get<std::string>(), nullptr, 16);
    m.train_mse = header.at("train_mse").get<double>();
    m.val_mse = header.at("val_mse").get<double>();
    if (m.ensemble < 1 || m.layer_sizes.size() < 2)
        throw ShapeError("latency model header is inconsistent");

    std::size_t offset = 0;
    for (int k = 0; k < m.ensemble; ++k) {
        for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
            const std::size_t in = static_cast<std::size_t>(m.layer_sizes[l]);
            const std::size_t out = static_cast<std::size_t>(m.layer_sizes[l + 1]);
            if (offset + in * out + out > payload.size())
                throw ShapeError("latency model payload too short");
            m.weights.emplace_back(
                payload.begin() + static_cast<std::ptrdiff_t>(offset),
                payload.begin() + static_cast<std::ptrdiff_t>(offset + in * out));
            offset += in * out;
            m.biases.emplace_back(payload.begin() + static_cast<std::ptrdiff_t>(offset),
                                  payload.begin() + static_cast<std::ptrdiff_t>(offset + out));
            offset += out;
        }
    }
    if (offset != payload.size()) throw ShapeError("latency model payload has trailing data");
    if (static_cast<int>(m.feat_mean.size()) != m.input_dim ||
        static_cast<int>(m.feat_scale.size()) != m.input_dim)
        throw ShapeError("latency model normalization stats are inconsistent");
    return m;
}

} // namespace pnas
