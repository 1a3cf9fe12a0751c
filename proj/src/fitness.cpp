#include "pnas/fitness.hpp"

#include <cmath>

#include "pnas/errors.hpp"
#include "pnas/io.hpp"

namespace pnas {

double FitnessWeights::alpha_for(int stage) const {
    if (alpha.empty()) return 1.0;
    if (alpha.size() == 1) return alpha[0];
    return alpha[static_cast<std::size_t>(stage)];
}

void FitnessWeights::validate(int num_stages) const {
    if (!(alpha.empty() || alpha.size() == 1 ||
          static_cast<int>(alpha.size()) == num_stages))
        throw ConfigError("alpha must be empty, scalar, or one weight per stage");
    if (rho0 <= 0.0) throw ConfigError("rho0 must be positive");
    if (delta < 0.0) throw ConfigError("delta must be non-negative");
}

std::uint64_t FitnessWeights::hash() const {
    json j = *this;
    return fnv1a64(j.dump());
}

void to_json(json& j, const FitnessWeights& w) {
    j = json{{"alpha", w.alpha}, {"omega", w.omega},   {"lambda", w.lambda},
             {"gamma", w.gamma}, {"rho0", w.rho0},     {"delta", w.delta}};
}

void from_json(const json& j, FitnessWeights& w) {
    w = FitnessWeights{};
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        if (k != "alpha" && k != "omega" && k != "lambda" && k != "gamma" && k != "rho0" &&
            k != "delta")
            throw ConfigError("unknown weights key: " + k);
    }
    if (j.contains("alpha")) {
        // scalar or list
        if (j.at("alpha").is_number())
            w.alpha = {j.at("alpha").get<double>()};
        else
            j.at("alpha").get_to(w.alpha);
    }
    if (j.contains("omega")) j.at("omega").get_to(w.omega);
    if (j.contains("lambda")) j.at("lambda").get_to(w.lambda);
    if (j.contains("gamma")) j.at("gamma").get_to(w.gamma);
    if (j.contains("rho0")) j.at("rho0").get_to(w.rho0);
    if (j.contains("delta")) j.at("delta").get_to(w.delta);
}

namespace {

// H and rho cover every conv except the classifier (stem is rho-only since
// it belongs to no stage).
bool counted_layer(const LayerSpec& l) {
    return l.kind != LayerKind::classifier;
}

double fanin_log(const LayerSpec& l) {
    return std::log(static_cast<double>(l.c_in) * l.kernel * l.kernel);
}

} // namespace

double stage_entropy(const ArchInstance& inst, int stage) {
    const StageInfo& s = inst.stages.at(static_cast<std::size_t>(stage));
    double inner = 0.0;
    for (int i = s.first_layer; i < s.first_layer + s.layer_count; ++i)
        inner += fanin_log(inst.layers[static_cast<std::size_t>(i)]);
    const double r = static_cast<double>(s.out_resolution);
    return std::log(r * r * s.out_width) * inner;
}

double effectiveness(const ArchInstance& inst) {
    double sum = 0.0;
    int count = 0;
    for (const LayerSpec& l : inst.layers) {
        if (!counted_layer(l)) continue;
        sum += fanin_log(l);
        ++count;
    }
    if (count == 0) return 0.0;
    return static_cast<double>(count) / std::exp(sum / count);
}

double depth_penalty(const ArchGenome& g) {
    const std::size_t n = g.depths.size();
    if (n == 0) return 1.0;
    double mean = 0.0;
    for (int d : g.depths) mean += d;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (int d : g.depths) {
        const double dev = d - mean;
        var += dev * dev;
    }
    var /= static_cast<double>(n);
    return std::exp(var);
}

double channel_penalty(const ArchInstance& inst) {
    double v = 0.0;
    int prev = inst.stem_width;
    for (const StageInfo& s : inst.stages) {
        v += std::max(0, prev - s.out_width);
        prev = s.out_width;
    }
    return v;
}

void to_json(json& j, const FitnessReport& r) {
    j = json{{"stage_entropies", r.stage_entropies},
             {"effectiveness", r.effectiveness},
             {"depth_penalty", r.depth_penalty},
             {"channel_penalty", r.channel_penalty},
             {"total", r.total},
             {"feasible", r.feasible}};
}

FitnessReport fitness(const ArchGenome& g, const ArchInstance& inst,
                      const FitnessWeights& w) {
    w.validate(static_cast<int>(inst.stages.size()));
    FitnessReport r;
    r.stage_entropies.reserve(inst.stages.size());
    double weighted_entropy = 0.0;
    for (int j = 0; j < static_cast<int>(inst.stages.size()); ++j) {
        const double h = stage_entropy(inst, j);
        r.stage_entropies.push_back(h);
        weighted_entropy += w.alpha_for(j) * h;
    }
    r.effectiveness = effectiveness(inst);
    r.depth_penalty = depth_penalty(g);
    r.channel_penalty = channel_penalty(inst);
    r.total = weighted_entropy - w.omega * r.depth_penalty + w.lambda * r.effectiveness -
              w.gamma * r.channel_penalty;
    r.feasible = (r.effectiveness <= w.rho0);
    return r;
}

FitnessReport fitness(const ArchGenome& g, const SearchSpaceConfig& cfg,
                      const FitnessWeights& w) {
    return fitness(g, decode(g, cfg), w);
}

double deploy_fitness(double base_fitness, double predicted_latency_ms, double delta) {
    return base_fitness - delta * predicted_latency_ms;
}

} // namespace pnas
