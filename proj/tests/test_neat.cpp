#include <gtest/gtest.h>

#include <set>

#include "voxnox/neat.hpp"

using namespace voxnox;

namespace {

NeatParams frozen() {
    NeatParams p;
    p.weight_mutation_prob = 0;
    p.add_connection_prob = 0;
    p.add_node_prob = 0;
    p.activation_mutation_prob = 0;
    return p;
}

CppnGenome with_genes(std::vector<std::pair<int, double>> genes) {
    CppnGenome g;
    for (auto [innov, w] : genes)
        g.connections.push_back({innov, innov, 100 + innov, w, true});
    return g;
}

std::set<int> innovations(const CppnGenome& g) {
    std::set<int> s;
    for (const auto& c : g.connections)
        s.insert(c.innovation);
    return s;
}

} // namespace

TEST(Compatibility, IdenticalIsZero) {
    const auto g = seed_genome(4);
    EXPECT_EQ(compatibility_distance(g, g, NeatParams{}), 0.0);
}

TEST(Compatibility, Symmetric) {
    Rng rng(31);
    NeatParams p;
    p.add_node_prob = 0.5;
    p.add_connection_prob = 0.5;
    InnovationRegistry reg;
    for (int t = 0; t < 50; ++t) {
        auto a = seed_genome(rng), b = seed_genome(rng);
        for (int r = 0; r < 5; ++r) {
            a = mutate(a, reg, p, rng);
            b = mutate(b, reg, p, rng);
        }
        EXPECT_DOUBLE_EQ(compatibility_distance(a, b, p), compatibility_distance(b, a, p));
    }
}

TEST(Compatibility, HandComputedThreeVersusFive) {
    // A: 0, 1, 2   B: 0, 1, 3, 4, 5
    // excess (B beyond A's max 2): 3, 4, 5 -> E = 3; disjoint: 2 -> D = 1
    // matching 0, 1: |0.5 - 0| + |-0.5 - 0.5| = 1.5 -> mean 0.75; N = 5
    // delta = (3 + 1) / 5 + 0.4 * 0.75 = 1.1
    const auto a = with_genes({{0, 0.5}, {1, -0.5}, {2, 1.0}});
    const auto b = with_genes({{0, 0.0}, {1, 0.5}, {3, 0.2}, {4, 0.2}, {5, 0.2}});
    EXPECT_NEAR(compatibility_distance(a, b, NeatParams{}), 1.1, 1e-12);
    EXPECT_NEAR(compatibility_distance(b, a, NeatParams{}), 1.1, 1e-12);
}

TEST(Speciate, IdenticalPopulationIsOneSpecies) {
    std::vector<CppnGenome> pop(20, seed_genome(8));
    SpeciesState prev;
    prev.threshold = 3.0;
    const auto s = speciate(pop, prev, NeatParams{});
    ASSERT_EQ(s.species.size(), 1u);
    EXPECT_EQ(s.species[0].members.size(), 20u);
}

TEST(Speciate, TwoDistantClusters) {
    std::vector<CppnGenome> pop;
    Rng rng(32);
    for (int i = 0; i < 10; ++i) {
        auto g = seed_genome(rng);
        if (i % 2)
            for (auto& c : g.connections)
                c.weight += 20.0; // c3 * 20 = 8, well past the threshold
        pop.push_back(g);
    }
    SpeciesState prev;
    prev.threshold = 3.0;
    const auto s = speciate(pop, prev, NeatParams{});
    ASSERT_EQ(s.species.size(), 2u);
    std::vector<int> seen(pop.size(), 0);
    for (const auto& sp : s.species) {
        for (int m : sp.members) {
            ++seen[std::size_t(m)];
            EXPECT_EQ(m % 2, sp.members.front() % 2);
        }
    }
    for (int c : seen)
        EXPECT_EQ(c, 1);
    // fewer species than the target: the threshold relaxes by one step
    EXPECT_NEAR(s.threshold, 2.9, 1e-12);
}

TEST(Crossover, SelfCrossIsIdentity) {
    Rng rng(33);
    NeatParams p;
    p.add_node_prob = 0.5;
    InnovationRegistry reg;
    auto g = seed_genome(rng);
    for (int r = 0; r < 10; ++r)
        g = mutate(g, reg, p, rng);
    g.fitness = 1.0;
    for (int t = 0; t < 20; ++t) {
        const auto c = crossover(g, g, p, rng);
        EXPECT_TRUE(c.structurally_equal(g));
    }
}

TEST(Crossover, ChildGenesComeFromParentsAndFitterExcessSurvives) {
    Rng rng(34);
    NeatParams p;
    p.add_node_prob = 0.6;
    p.add_connection_prob = 0.6;
    for (int t = 0; t < 100; ++t) {
        InnovationRegistry reg;
        auto a = seed_genome(rng);
        auto b = a;
        for (int r = 0; r < 6; ++r) {
            a = mutate(a, reg, p, rng);
            b = mutate(b, reg, p, rng);
        }
        a.fitness = 2.0;
        b.fitness = 1.0;
        const auto child = crossover(a, b, p, rng);
        EXPECT_TRUE(is_acyclic(child));
        const auto ia = innovations(a), ib = innovations(b), ic = innovations(child);
        for (int i : ic)
            EXPECT_TRUE(ia.count(i) || ib.count(i));
        // every gene of the fitter parent is either matching or disjoint/excess; all are inherited
        EXPECT_EQ(ic, ia);
    }
}

TEST(Crossover, DisabledInEitherParentUsuallyStaysDisabled) {
    Rng rng(35);
    auto a = seed_genome(1), b = a;
    b.connections[0].enabled = false;
    a.fitness = b.fitness = 1.0;
    int disabled = 0;
    const int trials = 4000;
    for (int t = 0; t < trials; ++t)
        disabled += !crossover(a, b, NeatParams{}, rng).find_connection(0)->enabled;
    EXPECT_NEAR(double(disabled) / trials, 0.75, 0.03);
}

TEST(Mutate, ZeroProbabilitiesLeaveGenomeUnchanged) {
    Rng rng(36);
    InnovationRegistry reg;
    const auto g = seed_genome(rng);
    const auto m = mutate(g, reg, frozen(), rng);
    EXPECT_EQ(m.nodes, g.nodes);
    EXPECT_EQ(m.connections, g.connections);
}

TEST(Mutate, AddNodeSplitsTheConnection) {
    CppnGenome g;
    for (int id = 0; id < kInputCount; ++id)
        g.nodes.push_back({id, NodeKind::input, Activation::sigmoid});
    g.nodes.push_back({kOutputId, NodeKind::output, Activation::sigmoid});
    g.connections.push_back({4, 4, kOutputId, 0.8, true});
    auto p = frozen();
    p.add_node_prob = 1.0;
    Rng rng(37);
    InnovationRegistry reg;
    const auto m = mutate(g, reg, p, rng);
    ASSERT_EQ(m.connections.size(), 3u);
    EXPECT_FALSE(m.find_connection(4)->enabled);
    int hidden = 0, enabled = 0;
    for (const auto& n : m.nodes)
        hidden += n.kind == NodeKind::hidden;
    for (const auto& c : m.connections)
        enabled += c.enabled;
    EXPECT_EQ(hidden, 1);
    EXPECT_EQ(enabled, 2);
    // the split keeps the signal: weight 1 in, old weight out
    const auto* in = &m.connections[1];
    const auto* out = &m.connections[2];
    EXPECT_EQ(in->weight, 1.0);
    EXPECT_EQ(out->weight, 0.8);
    EXPECT_EQ(in->from, 4);
    EXPECT_EQ(out->to, kOutputId);
}

TEST(Mutate, SameSplitInOneGenerationSharesNumbers) {
    auto p = frozen();
    p.add_node_prob = 1.0;
    CppnGenome g;
    for (int id = 0; id < kInputCount; ++id)
        g.nodes.push_back({id, NodeKind::input, Activation::sigmoid});
    g.nodes.push_back({kOutputId, NodeKind::output, Activation::sigmoid});
    g.connections.push_back({4, 4, kOutputId, 0.8, true});
    InnovationRegistry reg;
    Rng r1(1), r2(2);
    const auto a = mutate(g, reg, p, r1);
    const auto b = mutate(g, reg, p, r2);
    EXPECT_EQ(innovations(a), innovations(b));
    reg.new_generation();
    const auto c = mutate(g, reg, p, r1);
    EXPECT_GT(*innovations(c).rbegin(), *innovations(a).rbegin());
}

TEST(Mutate, NeverCreatesCycles) {
    Rng rng(38);
    NeatParams p;
    p.add_connection_prob = 0.9;
    p.add_node_prob = 0.3;
    p.activation_mutation_prob = 0.5;
    int violations = 0;
    for (int lineage = 0; lineage < 100; ++lineage) {
        InnovationRegistry reg;
        auto g = seed_genome(rng);
        for (int step = 0; step < 100; ++step) {
            g = mutate(g, reg, p, rng);
            violations += !is_acyclic(g);
        }
    }
    EXPECT_EQ(violations, 0);
}

TEST(AllocateOffspring, HandComputedShares) {
    // 10 * (3/4, 1/4) = 7.5, 2.5 -> floors 7, 2; the tied remainder goes to the first
    EXPECT_EQ(allocate_offspring(std::vector<double>{3, 1}, 10), (std::vector<int>{8, 2}));
    // 7 * (1, 2, 3)/6 = 1.17, 2.33, 3.5 -> floors 1, 2, 3; largest remainder is the third
    EXPECT_EQ(allocate_offspring(std::vector<double>{1, 2, 3}, 7), (std::vector<int>{1, 2, 4}));
    EXPECT_EQ(allocate_offspring(std::vector<double>{0, 0, 0}, 6), (std::vector<int>{2, 2, 2}));
}

TEST(NextGeneration, SizePreserved) {
    Rng rng(39);
    NeatParams p;
    p.population_size = 30;
    auto pop = seed_population(p, rng);
    for (int gen = 0; gen < 15; ++gen) {
        std::vector<double> fitness;
        std::vector<std::uint8_t> feasible;
        for (std::size_t i = 0; i < pop.genomes.size(); ++i) {
            fitness.push_back(uniform(rng, 0, 1));
            feasible.push_back(bernoulli(rng, 0.7));
        }
        next_generation(pop, fitness, feasible, p, rng);
        ASSERT_EQ(pop.genomes.size(), 30u);
        for (const auto& g : pop.genomes)
            EXPECT_TRUE(is_acyclic(g));
    }
}

TEST(NextGeneration, ElitePreservedBitExact) {
    Rng rng(40);
    NeatParams p;
    p.population_size = 10;
    auto pop = seed_population(p, rng);
    std::vector<double> fitness(10, 1.0);
    fitness[3] = 10.0;
    const auto champion = pop.genomes[3];
    next_generation(pop, fitness, std::vector<std::uint8_t>(10, 1), p, rng);
    bool found = false;
    for (const auto& g : pop.genomes)
        found = found || (g.nodes == champion.nodes && g.connections == champion.connections);
    EXPECT_TRUE(found);
}

TEST(NextGeneration, QuotaFollowsFitnessSharing) {
    // species A: 6 members with fitness 1 (shared 1); species B: 4 members with fitness 3 (shared 3)
    // 10 * (1/4, 3/4) = 2.5, 7.5 -> A gets the tied remainder: A 3, B 7
    auto p = frozen();
    p.population_size = 10;
    const auto a = seed_genome(41);
    auto b = a;
    for (auto& c : b.connections)
        c.weight += 20.0;
    NeatPopulation pop;
    pop.species.threshold = p.compatibility_threshold;
    std::vector<double> fitness;
    for (int i = 0; i < 6; ++i) {
        pop.genomes.push_back(a);
        fitness.push_back(1.0);
    }
    for (int i = 0; i < 4; ++i) {
        pop.genomes.push_back(b);
        fitness.push_back(3.0);
    }
    Rng rng(42);
    next_generation(pop, fitness, std::vector<std::uint8_t>(10, 1), p, rng);
    int like_a = 0, like_b = 0;
    for (const auto& g : pop.genomes) {
        like_a += g.connections == a.connections;
        like_b += g.connections == b.connections;
    }
    EXPECT_EQ(like_a, 3);
    EXPECT_EQ(like_b, 7);
}

TEST(NextGeneration, InfeasibleNeverReproduce) {
    auto p = frozen();
    p.population_size = 8;
    const auto good = seed_genome(43);
    auto bad = good;
    for (auto& c : bad.connections)
        c.weight -= 20.0;
    NeatPopulation pop;
    pop.species.threshold = p.compatibility_threshold;
    std::vector<double> fitness;
    std::vector<std::uint8_t> feasible;
    for (int i = 0; i < 8; ++i) {
        pop.genomes.push_back(i < 2 ? good : bad);
        fitness.push_back(i < 2 ? 1.0 : 5.0);
        feasible.push_back(i < 2);
    }
    Rng rng(44);
    next_generation(pop, fitness, feasible, p, rng);
    for (const auto& g : pop.genomes)
        EXPECT_EQ(g.connections, good.connections);
}

TEST(NextGeneration, AllInfeasibleReseeds) {
    Rng rng(45);
    NeatParams p;
    p.population_size = 12;
    auto pop = seed_population(p, rng);
    const auto report =
        next_generation(pop, std::vector<double>(12, 1.0), std::vector<std::uint8_t>(12, 0), p, rng);
    EXPECT_TRUE(report.reseeded);
    EXPECT_EQ(pop.genomes.size(), 12u);
    for (const auto& g : pop.genomes) {
        EXPECT_EQ(g.nodes.size(), 6u);
        EXPECT_EQ(g.connections.size(), 5u);
    }
}

TEST(NextGeneration, InnovationNumbersOnlyGrow) {
    Rng rng(46);
    NeatParams p;
    p.population_size = 20;
    p.add_connection_prob = 0.5;
    p.add_node_prob = 0.3;
    auto pop = seed_population(p, rng);
    int last = pop.registry.next_innovation();
    for (int gen = 0; gen < 10; ++gen) {
        std::vector<double> fitness(20);
        for (auto& f : fitness)
            f = uniform(rng, 0, 1);
        next_generation(pop, fitness, std::vector<std::uint8_t>(20, 1), p, rng);
        EXPECT_GE(pop.registry.next_innovation(), last);
        last = pop.registry.next_innovation();
    }
}

TEST(NeatParams, JsonRoundTripAndErrors) {
    NeatParams p;
    p.population_size = 33;
    p.c3 = 0.7;
    const auto back = neat_params_from_json(neat_params_to_json(p));
    EXPECT_EQ(back.population_size, 33);
    EXPECT_EQ(back.c3, 0.7);

    auto bad = neat_params_to_json(p);
    bad["add_node_prob"] = "often";
    try {
        neat_params_from_json(bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("add_node_prob"), std::string::npos);
    }
    EXPECT_THROW(neat_params_from_json({{"popsize", 3}}), Error);
    EXPECT_THROW(neat_params_from_json({{"add_node_prob", 1.5}}), Error);
    EXPECT_THROW(neat_params_from_json({{"population_size", 1}}), Error);
}

TEST(NeatState, RegistryAndSpeciesRoundTrip) {
    Rng rng(47);
    NeatParams p;
    p.population_size = 15;
    p.add_node_prob = 0.5;
    auto pop = seed_population(p, rng);
    for (int gen = 0; gen < 3; ++gen)
        next_generation(pop, std::vector<double>(15, 1.0), std::vector<std::uint8_t>(15, 1), p, rng);
    const auto reg = InnovationRegistry::from_json(pop.registry.to_json());
    EXPECT_EQ(reg.to_json(), pop.registry.to_json());
    const auto sp = species_state_from_json(species_state_to_json(pop.species));
    EXPECT_EQ(species_state_to_json(sp), species_state_to_json(pop.species));
}
