#include "voxnox/neat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace voxnox {

void NeatParams::validate() const {
    if (population_size < 2)
        throw Error(ErrorCode::invalid_argument, "neat: population_size must be >= 2");
    for (double p : {weight_mutation_prob, weight_replace_prob, add_connection_prob, add_node_prob,
                     activation_mutation_prob, crossover_prob, disabled_gene_prob})
        if (!(p >= 0.0 && p <= 1.0))
            throw Error(ErrorCode::invalid_argument, "neat: probabilities must lie in [0, 1]");
    if (!(survival_fraction > 0.0 && survival_fraction <= 1.0))
        throw Error(ErrorCode::invalid_argument, "neat: survival_fraction must lie in (0, 1]");
    if (compatibility_threshold <= 0.0 || target_species < 1 || stagnation_limit < 1 || elitism < 0)
        throw Error(ErrorCode::invalid_argument, "neat: invalid speciation settings");
}

nlohmann::json neat_params_to_json(const NeatParams& p) {
    return {{"population_size", p.population_size},
            {"c1", p.c1},
            {"c2", p.c2},
            {"c3", p.c3},
            {"compatibility_threshold", p.compatibility_threshold},
            {"threshold_step", p.threshold_step},
            {"min_threshold", p.min_threshold},
            {"target_species", p.target_species},
            {"weight_mutation_prob", p.weight_mutation_prob},
            {"weight_sigma", p.weight_sigma},
            {"weight_replace_prob", p.weight_replace_prob},
            {"add_connection_prob", p.add_connection_prob},
            {"add_node_prob", p.add_node_prob},
            {"activation_mutation_prob", p.activation_mutation_prob},
            {"crossover_prob", p.crossover_prob},
            {"disabled_gene_prob", p.disabled_gene_prob},
            {"elitism", p.elitism},
            {"elite_min_species_size", p.elite_min_species_size},
            {"survival_fraction", p.survival_fraction},
            {"stagnation_limit", p.stagnation_limit}};
}

NeatParams neat_params_from_json(const nlohmann::json& j) {
    if (!j.is_object())
        throw Error(ErrorCode::format, "neat: expected a JSON object");
    NeatParams p;
    std::vector<std::string> known;
    auto get = [&](const char* key, auto& field) {
        known.emplace_back(key);
        if (!j.contains(key))
            return;
        try {
            field = j.at(key).get<std::decay_t<decltype(field)>>();
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorCode::format, std::string("neat.") + key + ": expected a number, got " + j.at(key).dump());
        }
    };
    get("population_size", p.population_size);
    get("c1", p.c1);
    get("c2", p.c2);
    get("c3", p.c3);
    get("compatibility_threshold", p.compatibility_threshold);
    get("threshold_step", p.threshold_step);
    get("min_threshold", p.min_threshold);
    get("target_species", p.target_species);
    get("weight_mutation_prob", p.weight_mutation_prob);
    get("weight_sigma", p.weight_sigma);
    get("weight_replace_prob", p.weight_replace_prob);
    get("add_connection_prob", p.add_connection_prob);
    get("add_node_prob", p.add_node_prob);
    get("activation_mutation_prob", p.activation_mutation_prob);
    get("crossover_prob", p.crossover_prob);
    get("disabled_gene_prob", p.disabled_gene_prob);
    get("elitism", p.elitism);
    get("elite_min_species_size", p.elite_min_species_size);
    get("survival_fraction", p.survival_fraction);
    get("stagnation_limit", p.stagnation_limit);
    for (const auto& item : j.items())
        if (std::find(known.begin(), known.end(), item.key()) == known.end())
            throw Error(ErrorCode::format, "neat: unknown field '" + item.key() + "'");
    p.validate();
    return p;
}

int InnovationRegistry::connection(int from, int to) {
    const auto key = std::make_pair(from, to);
    if (auto it = connections_.find(key); it != connections_.end())
        return it->second;
    const int innovation = next_innovation_++;
    connections_.emplace(key, innovation);
    return innovation;
}

InnovationRegistry::Split InnovationRegistry::split(int innovation) {
    if (auto it = splits_.find(innovation); it != splits_.end())
        return it->second;
    const Split s = fresh_split();
    splits_.emplace(innovation, s);
    return s;
}

InnovationRegistry::Split InnovationRegistry::fresh_split() {
    Split s;
    s.node = next_node_++;
    s.in_innovation = next_innovation_++;
    s.out_innovation = next_innovation_++;
    return s;
}

void InnovationRegistry::new_generation() {
    connections_.clear();
    splits_.clear();
}

nlohmann::json InnovationRegistry::to_json() const {
    nlohmann::json conns = nlohmann::json::array();
    for (const auto& [key, innov] : connections_)
        conns.push_back({key.first, key.second, innov});
    nlohmann::json splits = nlohmann::json::array();
    for (const auto& [innov, s] : splits_)
        splits.push_back({innov, s.node, s.in_innovation, s.out_innovation});
    return {{"next_innovation", next_innovation_}, {"next_node", next_node_}, {"connections", conns}, {"splits", splits}};
}

InnovationRegistry InnovationRegistry::from_json(const nlohmann::json& j) {
    InnovationRegistry r;
    r.next_innovation_ = j.at("next_innovation").get<int>();
    r.next_node_ = j.at("next_node").get<int>();
    for (const auto& c : j.at("connections"))
        r.connections_[{c.at(0).get<int>(), c.at(1).get<int>()}] = c.at(2).get<int>();
    for (const auto& s : j.at("splits"))
        r.splits_[s.at(0).get<int>()] = Split{s.at(1).get<int>(), s.at(2).get<int>(), s.at(3).get<int>()};
    return r;
}

nlohmann::json species_state_to_json(const SpeciesState& s) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& sp : s.species)
        list.push_back({{"id", sp.id},
                        {"representative", genome_to_json(sp.representative)},
                        {"members", sp.members},
                        {"best_fitness", sp.best_fitness},
                        {"staleness", sp.staleness}});
    return {{"species", list}, {"threshold", s.threshold}, {"next_id", s.next_id}};
}

SpeciesState species_state_from_json(const nlohmann::json& j) {
    SpeciesState s;
    s.threshold = j.at("threshold").get<double>();
    s.next_id = j.at("next_id").get<int>();
    for (const auto& sp : j.at("species")) {
        Species x;
        x.id = sp.at("id").get<int>();
        x.representative = genome_from_json(sp.at("representative"));
        x.members = sp.at("members").get<std::vector<int>>();
        x.best_fitness = sp.at("best_fitness").get<double>();
        x.staleness = sp.at("staleness").get<int>();
        s.species.push_back(std::move(x));
    }
    return s;
}

namespace {

std::vector<const ConnectionGene*> sorted_genes(const CppnGenome& g) {
    std::vector<const ConnectionGene*> out;
    out.reserve(g.connections.size());
    for (const auto& c : g.connections)
        out.push_back(&c);
    std::sort(out.begin(), out.end(), [](auto* l, auto* r) { return l->innovation < r->innovation; });
    return out;
}

} // namespace

double compatibility_distance(const CppnGenome& a, const CppnGenome& b, const NeatParams& params) {
    const auto ga = sorted_genes(a), gb = sorted_genes(b);
    const int max_a = ga.empty() ? -1 : ga.back()->innovation;
    const int max_b = gb.empty() ? -1 : gb.back()->innovation;
    int excess = 0, disjoint = 0, matching = 0;
    double weight_diff = 0.0;
    std::size_t i = 0, j = 0;
    while (i < ga.size() || j < gb.size()) {
        if (j == gb.size() || (i < ga.size() && ga[i]->innovation < gb[j]->innovation)) {
            (ga[i]->innovation > max_b ? excess : disjoint) += 1;
            ++i;
        } else if (i == ga.size() || gb[j]->innovation < ga[i]->innovation) {
            (gb[j]->innovation > max_a ? excess : disjoint) += 1;
            ++j;
        } else {
            ++matching;
            weight_diff += std::fabs(ga[i]->weight - gb[j]->weight);
            ++i;
            ++j;
        }
    }
    const double n = double(std::max<std::size_t>({ga.size(), gb.size(), 1}));
    const double mean_w = matching ? weight_diff / matching : 0.0;
    return (params.c1 * excess + params.c2 * disjoint) / n + params.c3 * mean_w;
}

SpeciesState speciate(std::span<const CppnGenome> population, const SpeciesState& previous, const NeatParams& params) {
    if (population.empty())
        throw Error(ErrorCode::empty_input, "speciate: empty population");
    SpeciesState next;
    next.threshold = previous.threshold;
    next.next_id = previous.next_id;
    next.species = previous.species;
    for (auto& s : next.species)
        s.members.clear();

    for (int i = 0; i < int(population.size()); ++i) {
        bool placed = false;
        for (auto& s : next.species) {
            if (compatibility_distance(population[std::size_t(i)], s.representative, params) < next.threshold) {
                s.members.push_back(i);
                placed = true;
                break;
            }
        }
        if (!placed) {
            Species s;
            s.id = next.next_id++;
            s.representative = population[std::size_t(i)];
            s.members = {i};
            next.species.push_back(std::move(s));
        }
    }
    std::erase_if(next.species, [](const Species& s) { return s.members.empty(); });
    for (auto& s : next.species)
        s.representative = population[std::size_t(s.members.front())];

    const int live = int(next.species.size());
    if (live > params.target_species)
        next.threshold += params.threshold_step;
    else if (live < params.target_species)
        next.threshold = std::max(params.min_threshold, next.threshold - params.threshold_step);
    return next;
}

namespace {

void ensure_node(CppnGenome& child, const NodeGene& node) {
    if (!child.find_node(node.id))
        child.nodes.push_back(node);
}

} // namespace

CppnGenome crossover(const CppnGenome& parent_a, const CppnGenome& parent_b, const NeatParams& params, Rng& rng) {
    const bool tie = parent_a.fitness == parent_b.fitness;
    const CppnGenome& fit = parent_b.fitness > parent_a.fitness ? parent_b : parent_a;
    const CppnGenome& weak = &fit == &parent_a ? parent_b : parent_a;

    CppnGenome child;
    for (const auto& n : fit.nodes)
        if (n.kind != NodeKind::hidden)
            child.nodes.push_back(n);

    auto fit_genes = sorted_genes(fit), weak_genes = sorted_genes(weak);
    std::vector<ConnectionGene> picked;
    std::size_t i = 0, j = 0;
    while (i < fit_genes.size() || j < weak_genes.size()) {
        if (j == weak_genes.size() || (i < fit_genes.size() && fit_genes[i]->innovation < weak_genes[j]->innovation)) {
            if (!tie || bernoulli(rng, 0.5))
                picked.push_back(*fit_genes[i]);
            ++i;
        } else if (i == fit_genes.size() || weak_genes[j]->innovation < fit_genes[i]->innovation) {
            if (tie && bernoulli(rng, 0.5))
                picked.push_back(*weak_genes[j]);
            ++j;
        } else {
            const bool from_fit = bernoulli(rng, 0.5);
            ConnectionGene gene = from_fit ? *fit_genes[i] : *weak_genes[j];
            const bool a_on = fit_genes[i]->enabled, b_on = weak_genes[j]->enabled;
            if (!a_on && !b_on)
                gene.enabled = false;
            else if (a_on != b_on)
                gene.enabled = !bernoulli(rng, params.disabled_gene_prob);
            picked.push_back(gene);
            ++i;
            ++j;
        }
    }

    for (const auto& gene : picked) {
        // Only reachable on ties, where genes from both parents can close a loop.
        if (creates_cycle(child, gene.from, gene.to))
            continue;
        for (int id : {gene.from, gene.to}) {
            const NodeGene* in_fit = fit.find_node(id);
            const NodeGene* in_weak = weak.find_node(id);
            if (in_fit && in_weak && in_fit->activation != in_weak->activation)
                ensure_node(child, bernoulli(rng, 0.5) ? *in_fit : *in_weak);
            else
                ensure_node(child, in_fit ? *in_fit : *in_weak);
        }
        child.connections.push_back(gene);
    }
    // Hidden nodes of the fitter parent that lost all their genes still carry over.
    for (const auto& n : fit.nodes)
        if (!tie)
            ensure_node(child, n);
    std::sort(child.nodes.begin(), child.nodes.end(), [](const NodeGene& l, const NodeGene& r) { return l.id < r.id; });
    validate_genome(child);
    return child;
}

CppnGenome mutate(const CppnGenome& genome, InnovationRegistry& registry, const NeatParams& params, Rng& rng) {
    CppnGenome g = genome;

    if (bernoulli(rng, params.weight_mutation_prob)) {
        for (auto& c : g.connections) {
            if (bernoulli(rng, params.weight_replace_prob))
                c.weight = uniform(rng, -1.0, 1.0);
            else
                c.weight += gaussian(rng, params.weight_sigma);
        }
    }

    if (bernoulli(rng, params.add_connection_prob)) {
        std::set<std::pair<int, int>> existing;
        for (const auto& c : g.connections)
            existing.emplace(c.from, c.to);
        std::vector<std::pair<int, int>> candidates;
        for (const auto& src : g.nodes) {
            if (src.kind == NodeKind::output)
                continue;
            for (const auto& dst : g.nodes) {
                if (dst.kind == NodeKind::input || existing.count({src.id, dst.id}))
                    continue;
                if (!creates_cycle(g, src.id, dst.id))
                    candidates.emplace_back(src.id, dst.id);
            }
        }
        if (!candidates.empty()) {
            const auto [from, to] = candidates[std::size_t(uniform_int(rng, 0, int(candidates.size()) - 1))];
            g.connections.push_back({registry.connection(from, to), from, to, uniform(rng, -1.0, 1.0), true});
        }
    }

    if (bernoulli(rng, params.add_node_prob)) {
        std::vector<std::size_t> enabled;
        for (std::size_t i = 0; i < g.connections.size(); ++i)
            if (g.connections[i].enabled)
                enabled.push_back(i);
        if (!enabled.empty()) {
            const std::size_t pick = enabled[std::size_t(uniform_int(rng, 0, int(enabled.size()) - 1))];
            ConnectionGene old = g.connections[pick];
            g.connections[pick].enabled = false;
            auto split = registry.split(old.innovation);
            if (g.find_node(split.node) || g.find_connection(split.in_innovation) ||
                g.find_connection(split.out_innovation))
                split = registry.fresh_split();
            const Activation act = kActivations[std::size_t(uniform_int(rng, 0, int(kActivations.size()) - 1))];
            g.nodes.push_back({split.node, NodeKind::hidden, act});
            g.connections.push_back({split.in_innovation, old.from, split.node, 1.0, true});
            g.connections.push_back({split.out_innovation, split.node, old.to, old.weight, true});
        }
    }

    if (bernoulli(rng, params.activation_mutation_prob)) {
        std::vector<std::size_t> hidden;
        for (std::size_t i = 0; i < g.nodes.size(); ++i)
            if (g.nodes[i].kind == NodeKind::hidden)
                hidden.push_back(i);
        if (!hidden.empty()) {
            const std::size_t pick = hidden[std::size_t(uniform_int(rng, 0, int(hidden.size()) - 1))];
            g.nodes[pick].activation = kActivations[std::size_t(uniform_int(rng, 0, int(kActivations.size()) - 1))];
        }
    }

    validate_genome(g);
    return g;
}

std::vector<int> allocate_offspring(std::span<const double> scores, int total) {
    std::vector<int> quota(scores.size(), 0);
    if (scores.empty() || total <= 0)
        return quota;
    const double sum = std::accumulate(scores.begin(), scores.end(), 0.0);
    std::vector<double> exact(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        exact[i] = sum > 0.0 ? total * scores[i] / sum : double(total) / double(scores.size());
    int assigned = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        quota[i] = int(std::floor(exact[i]));
        assigned += quota[i];
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
        return exact[l] - quota[l] > exact[r] - quota[r];
    });
    for (std::size_t n = 0; assigned < total; n = (n + 1) % order.size(), ++assigned)
        ++quota[order[n]];
    return quota;
}

NeatPopulation seed_population(const NeatParams& params, Rng& rng) {
    NeatPopulation pop;
    pop.species.threshold = params.compatibility_threshold;
    pop.genomes.reserve(std::size_t(params.population_size));
    for (int i = 0; i < params.population_size; ++i)
        pop.genomes.push_back(seed_genome(rng));
    return pop;
}

GenerationReport next_generation(NeatPopulation& pop, std::span<const double> fitness,
                                 std::span<const std::uint8_t> feasible, const NeatParams& params, Rng& rng) {
    const std::size_t n = pop.genomes.size();
    if (fitness.size() != n || feasible.size() != n)
        throw Error(ErrorCode::dimension_mismatch, "next_generation: fitness/feasible size differs from population");
    GenerationReport report;
    pop.registry.new_generation();
    ++pop.generation;

    for (std::size_t i = 0; i < n; ++i)
        pop.genomes[i].fitness = feasible[i] ? fitness[i] : 0.0;

    if (std::none_of(feasible.begin(), feasible.end(), [](auto f) { return f != 0; })) {
        report.reseeded = true;
        pop.genomes.clear();
        for (int i = 0; i < params.population_size; ++i) {
            pop.genomes.push_back(seed_genome(rng));
            pop.genomes.back().generation = pop.generation;
        }
        pop.species = SpeciesState{{}, params.compatibility_threshold, pop.species.next_id};
        return report;
    }

    pop.species = speciate(pop.genomes, pop.species, params);

    struct Pool {
        std::size_t species;
        std::vector<int> ranked; // feasible members, best first
        double score = 0.0;
    };
    std::vector<Pool> pools;
    for (std::size_t s = 0; s < pop.species.species.size(); ++s) {
        auto& sp = pop.species.species[s];
        Pool pool{s, {}, 0.0};
        for (int m : sp.members)
            if (feasible[std::size_t(m)])
                pool.ranked.push_back(m);
        std::stable_sort(pool.ranked.begin(), pool.ranked.end(), [&](int l, int r) {
            return pop.genomes[std::size_t(l)].fitness > pop.genomes[std::size_t(r)].fitness;
        });
        const double best = pool.ranked.empty() ? 0.0 : pop.genomes[std::size_t(pool.ranked.front())].fitness;
        if (!pool.ranked.empty() && best > sp.best_fitness) {
            sp.best_fitness = best;
            sp.staleness = 0;
        } else {
            ++sp.staleness;
        }
        if (pool.ranked.empty())
            continue;
        // Fitness sharing over feasible members: sum_i f_i / n = mean feasible fitness.
        for (int m : pool.ranked)
            pool.score += pop.genomes[std::size_t(m)].fitness;
        pool.score /= double(pool.ranked.size());
        pools.push_back(std::move(pool));
    }

    std::vector<Pool> fresh;
    for (auto& p : pools)
        if (pop.species.species[p.species].staleness < params.stagnation_limit)
            fresh.push_back(p);
    report.removed_stagnant = int(pools.size() - fresh.size());
    if (fresh.empty())
        report.removed_stagnant = 0;
    else
        pools = std::move(fresh);
    report.species_count = int(pools.size());

    std::vector<double> scores;
    for (const auto& p : pools)
        scores.push_back(p.score);
    const auto quota = allocate_offspring(scores, params.population_size);

    std::vector<CppnGenome> next;
    next.reserve(std::size_t(params.population_size));
    for (std::size_t p = 0; p < pools.size(); ++p) {
        const auto& pool = pools[p];
        const auto& sp = pop.species.species[pool.species];
        int remaining = quota[p];
        if (remaining > 0 && int(sp.members.size()) >= params.elite_min_species_size) {
            for (int e = 0; e < params.elitism && e < int(pool.ranked.size()) && remaining > 0; ++e, --remaining) {
                next.push_back(pop.genomes[std::size_t(pool.ranked[std::size_t(e)])]);
                next.back().generation = pop.generation;
            }
        }
        const int survivors =
            std::max(1, int(std::ceil(params.survival_fraction * double(pool.ranked.size()))));
        for (; remaining > 0; --remaining) {
            const auto& a = pop.genomes[std::size_t(pool.ranked[std::size_t(uniform_int(rng, 0, survivors - 1))])];
            CppnGenome child;
            if (survivors > 1 && bernoulli(rng, params.crossover_prob)) {
                const auto& b =
                    pop.genomes[std::size_t(pool.ranked[std::size_t(uniform_int(rng, 0, survivors - 1))])];
                child = crossover(a, b, params, rng);
            } else {
                child = a;
            }
            child = mutate(child, pop.registry, params, rng);
            child.fitness = 0.0;
            child.generation = pop.generation;
            next.push_back(std::move(child));
        }
    }
    pop.genomes = std::move(next);
    return report;
}

} // namespace voxnox
