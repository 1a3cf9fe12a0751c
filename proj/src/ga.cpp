#include "pnas/ga.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pnas/errors.hpp"
#include "pnas/io.hpp"

namespace pnas {

void GaConfig::validate() const {
    if (population_size < 2) throw ConfigError("population_size must be >= 2");
    if (generations < 0) throw ConfigError("generations must be >= 0");
    if (tournament_size < 1) throw ConfigError("tournament_size must be >= 1");
    if (!(mutation_prob >= 0.0 && mutation_prob <= 1.0))
        throw ConfigError("mutation_prob must be in [0, 1]");
    if (elitism_count < 0 || elitism_count >= population_size)
        throw ConfigError("elitism_count must be in [0, population_size)");
    if (max_rejection_attempts < 1) throw ConfigError("max_rejection_attempts must be >= 1");
}

void to_json(json& j, const GaConfig& c) {
    j = json{{"population_size", c.population_size},
             {"generations", c.generations},
             {"tournament_size", c.tournament_size},
             {"mutation_prob", c.mutation_prob},
             {"elitism_count", c.elitism_count},
             {"max_rejection_attempts", c.max_rejection_attempts}};
}

void from_json(const json& j, GaConfig& c) {
    c = GaConfig{};
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        if (k != "population_size" && k != "generations" && k != "tournament_size" &&
            k != "mutation_prob" && k != "elitism_count" && k != "max_rejection_attempts")
            throw ConfigError("unknown ga config key: " + k);
    }
    if (j.contains("population_size")) j.at("population_size").get_to(c.population_size);
    if (j.contains("generations")) j.at("generations").get_to(c.generations);
    if (j.contains("tournament_size")) j.at("tournament_size").get_to(c.tournament_size);
    if (j.contains("mutation_prob")) j.at("mutation_prob").get_to(c.mutation_prob);
    if (j.contains("elitism_count")) j.at("elitism_count").get_to(c.elitism_count);
    if (j.contains("max_rejection_attempts"))
        j.at("max_rejection_attempts").get_to(c.max_rejection_attempts);
}

bool candidate_better(const Candidate& a, const Candidate& b) {
    if (a.objective != b.objective) return a.objective > b.objective;
    if (a.macs != b.macs) return a.macs < b.macs;
    return a.flat < b.flat;
}

std::pair<ArchGenome, ArchGenome> crossover(const ArchGenome& a, const ArchGenome& b,
                                            std::size_t cut, const SearchSpaceConfig& cfg) {
    const std::vector<int> fa = to_indices(a, cfg);
    const std::vector<int> fb = to_indices(b, cfg);
    const std::size_t len = fa.size();
    if (cut > len) throw ConfigError("crossover cut beyond genome length");
    std::vector<int> ca(len), cb(len);
    for (std::size_t i = 0; i < len; ++i) {
        // child_a takes a's prefix and b's suffix; child_b the reverse.
        ca[i] = (i < cut) ? fa[i] : fb[i];
        cb[i] = (i < cut) ? fb[i] : fa[i];
    }
    return {from_indices(ca, cfg), from_indices(cb, cfg)};
}

ArchGenome mutate(const ArchGenome& g, const SearchSpaceConfig& cfg, double per_gene_prob,
                  Rng& rng) {
    ArchGenome m = g;
    for (auto& d : m.depths)
        if (uniform_real(rng) < per_gene_prob)
            d = cfg.depth_choices[uniform_index(rng, cfg.depth_choices.size())];
    for (auto& e : m.expansions)
        if (uniform_real(rng) < per_gene_prob)
            e = cfg.expansion_choices[uniform_index(rng, cfg.expansion_choices.size())];
    for (auto& w : m.widths)
        if (uniform_real(rng) < per_gene_prob)
            w = cfg.width_choices[uniform_index(rng, cfg.width_choices.size())];
    return m;
}

Candidate SearchProblem::evaluate(const ArchGenome& g) const {
    Candidate c;
    c.genome = g;
    c.flat = to_indices(g, *cfg);
    const ArchInstance inst = decode(g, *cfg);
    c.macs = macs(inst);
    c.params = params(inst);
    c.report = fitness(g, inst, *weights);
    c.objective = c.report.total;
    if (latency) {
        c.latency_ms = latency(g);
        // delta == 0 leaves the objective bit-identical to the plain search.
        if (delta != 0.0) c.objective -= delta * c.latency_ms;
    }
    return c;
}

bool SearchProblem::feasible(const Candidate& c) const {
    if (c.macs > constraint.macs_budget) return false;
    if (constraint.params_budget && c.params > *constraint.params_budget) return false;
    if (constraint.latency_budget_ms && c.latency_ms > *constraint.latency_budget_ms)
        return false;
    return c.report.effectiveness <= constraint.rho0;
}

std::vector<Candidate> init_population(const SearchProblem& problem, const GaConfig& ga,
                                       Rng& rng, long long* attempts, long long* accepted) {
    std::vector<Candidate> pop;
    pop.reserve(static_cast<std::size_t>(ga.population_size));
    int consecutive_failures = 0;
    while (static_cast<int>(pop.size()) < ga.population_size) {
        Candidate c = problem.evaluate(random_genome(*problem.cfg, rng));
        if (attempts) ++*attempts;
        if (problem.feasible(c)) {
            consecutive_failures = 0;
            if (accepted) ++*accepted;
            pop.push_back(std::move(c));
        } else if (++consecutive_failures >= ga.max_rejection_attempts) {
            throw InfeasibleError(
                "no feasible genome after " + std::to_string(consecutive_failures) +
                " consecutive rejections; constraints are likely unsatisfiable");
        }
    }
    return pop;
}

namespace {

const Candidate& tournament(const std::vector<Candidate>& pop, int size, Rng& rng) {
    const Candidate* best = &pop[uniform_index(rng, pop.size())];
    for (int i = 1; i < size; ++i) {
        const Candidate& c = pop[uniform_index(rng, pop.size())];
        if (candidate_better(c, *best)) best = &c;
    }
    return *best;
}

double mean_objective(const std::vector<Candidate>& pop) {
    double sum = 0.0;
    for (const Candidate& c : pop) sum += c.objective;
    return sum / static_cast<double>(pop.size());
}

// Feasible child from (offspring, fallback parent): re-mutates the parent on
// rejection, copying it verbatim once the attempt budget is spent.
Candidate settle_offspring(const SearchProblem& problem, const GaConfig& ga,
                           const ArchGenome& offspring, const Candidate& parent, Rng& rng,
                           long long* attempts, long long* accepted, long long* evals) {
    Candidate c = problem.evaluate(mutate(offspring, *problem.cfg, ga.mutation_prob, rng));
    ++*attempts;
    ++*evals;
    if (problem.feasible(c)) {
        ++*accepted;
        return c;
    }
    for (int tries = 1; tries < ga.max_rejection_attempts; ++tries) {
        Candidate retry =
            problem.evaluate(mutate(parent.genome, *problem.cfg, ga.mutation_prob, rng));
        ++*attempts;
        ++*evals;
        if (problem.feasible(retry)) {
            ++*accepted;
            return retry;
        }
    }
    return parent; // feasible by induction
}

} // namespace

SearchResult evolve(const SearchProblem& problem, const GaConfig& ga, std::uint64_t seed) {
    problem.cfg->validate();
    problem.weights->validate(problem.cfg->num_stages);
    ga.validate();
    if (problem.constraint.latency_budget_ms && !problem.latency)
        throw ConfigError("latency budget set but no latency model supplied");
    if (problem.delta != 0.0 && !problem.latency)
        throw ConfigError("latency trade-off delta set but no latency model supplied");

    Rng rng(seed);
    SearchResult res;
    long long init_attempts = 0, init_accepted = 0;
    std::vector<Candidate> pop = init_population(problem, ga, rng, &init_attempts, &init_accepted);
    res.evaluations = init_attempts;

    auto best_of = [](const std::vector<Candidate>& p) {
        const Candidate* b = &p.front();
        for (const Candidate& c : p)
            if (candidate_better(c, *b)) b = &c;
        return *b;
    };
    res.best = best_of(pop);
    res.trace.push_back({0, res.best.objective, mean_objective(pop),
                         static_cast<double>(init_accepted) /
                             static_cast<double>(std::max(1LL, init_attempts))});

    const std::size_t genome_len = static_cast<std::size_t>(problem.cfg->genome_length());
    for (int gen = 1; gen <= ga.generations; ++gen) {
        std::vector<Candidate> next;
        next.reserve(pop.size());
        if (ga.elitism_count > 0) {
            std::vector<const Candidate*> order;
            order.reserve(pop.size());
            for (const Candidate& c : pop) order.push_back(&c);
            std::partial_sort(order.begin(), order.begin() + ga.elitism_count, order.end(),
                              [](const Candidate* a, const Candidate* b) {
                                  return candidate_better(*a, *b);
                              });
            for (int i = 0; i < ga.elitism_count; ++i) next.push_back(*order[i]);
        }

        long long attempts = 0, accepted = 0;
        while (next.size() < pop.size()) {
            const Candidate& pa = tournament(pop, ga.tournament_size, rng);
            const Candidate& pb = tournament(pop, ga.tournament_size, rng);
            const std::size_t cut = uniform_index(rng, genome_len + 1);
            auto [child_a, child_b] = crossover(pa.genome, pb.genome, cut, *problem.cfg);
            next.push_back(settle_offspring(problem, ga, child_a, pa, rng, &attempts,
                                            &accepted, &res.evaluations));
            if (next.size() < pop.size())
                next.push_back(settle_offspring(problem, ga, child_b, pb, rng, &attempts,
                                                &accepted, &res.evaluations));
        }
        pop = std::move(next);
        const Candidate gen_best = best_of(pop);
        if (candidate_better(gen_best, res.best)) res.best = gen_best;
        res.trace.push_back({gen, res.best.objective, mean_objective(pop),
                             static_cast<double>(accepted) /
                                 static_cast<double>(std::max(1LL, attempts))});
    }
    return res;
}

SearchResult search_budget(const SearchSpaceConfig& cfg, const FitnessWeights& weights,
                           const GaConfig& ga, const BudgetConstraint& constraint,
                           std::uint64_t seed) {
    SearchProblem problem;
    problem.cfg = &cfg;
    problem.weights = &weights;
    problem.constraint = constraint;
    return evolve(problem, ga, seed);
}

std::string trace_to_csv(const std::vector<GaTraceRow>& trace) {
    std::ostringstream out;
    out << "generation,best_f,mean_f,feasible_fraction\n";
    for (const GaTraceRow& r : trace)
        out << r.generation << ',' << fmt_double(r.best_f) << ',' << fmt_double(r.mean_f)
            << ',' << fmt_double(r.feasible_fraction) << '\n';
    return out.str();
}

} // namespace pnas
