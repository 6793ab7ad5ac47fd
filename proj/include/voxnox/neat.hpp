#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxnox/cppn.hpp"
#include "voxnox/random.hpp"

namespace voxnox {

struct NeatParams {
    int population_size = 200;

    // Compatibility: delta = (c1 * E + c2 * D) / N + c3 * mean |dw|
    double c1 = 1.0;
    double c2 = 1.0;
    double c3 = 0.4;
    double compatibility_threshold = 3.0;
    double threshold_step = 0.1;
    double min_threshold = 0.1;
    int target_species = 10;

    double weight_mutation_prob = 0.8;
    double weight_sigma = 0.5;
    double weight_replace_prob = 0.1;
    double add_connection_prob = 0.1;
    double add_node_prob = 0.05;
    double activation_mutation_prob = 0.1;

    double crossover_prob = 0.75;
    double disabled_gene_prob = 0.75;

    int elitism = 1;
    int elite_min_species_size = 5;
    double survival_fraction = 0.4;
    int stagnation_limit = 20;

    void validate() const;
};

nlohmann::json neat_params_to_json(const NeatParams& p);
NeatParams neat_params_from_json(const nlohmann::json& j);

// Hands out innovation numbers and hidden-node ids. Identical structural
// mutations within one generation share numbers; counters never go back.
class InnovationRegistry {
public:
    struct Split {
        int node = 0;
        int in_innovation = 0;
        int out_innovation = 0;
    };

    int connection(int from, int to);
    Split split(int innovation);
    // A split that is guaranteed not to collide with existing ids.
    Split fresh_split();
    void new_generation();

    int next_innovation() const { return next_innovation_; }
    int next_node() const { return next_node_; }

    nlohmann::json to_json() const;
    static InnovationRegistry from_json(const nlohmann::json& j);

private:
    int next_innovation_ = kInputCount; // seed connections use 0..4
    int next_node_ = kFirstHiddenId;
    std::map<std::pair<int, int>, int> connections_;
    std::map<int, Split> splits_;
};

struct Species {
    int id = 0;
    CppnGenome representative;
    std::vector<int> members; // indices into the population
    double best_fitness = 0.0;
    int staleness = 0;
};

struct SpeciesState {
    std::vector<Species> species;
    double threshold = 3.0;
    int next_id = 0;
};

nlohmann::json species_state_to_json(const SpeciesState& s);
SpeciesState species_state_from_json(const nlohmann::json& j);

double compatibility_distance(const CppnGenome& a, const CppnGenome& b, const NeatParams& params);

// Assigns each genome to the first species (in previous order) whose
// representative is within the threshold, else founds a new species. Empty
// species are dropped and the threshold moves one step toward the target
// species count. Representatives become each species' first member.
SpeciesState speciate(std::span<const CppnGenome> population, const SpeciesState& previous, const NeatParams& params);

// Fitness from `genome.fitness`. Matching genes come from either parent at
// random, disjoint/excess genes from the fitter parent (both on a tie).
CppnGenome crossover(const CppnGenome& parent_a, const CppnGenome& parent_b, const NeatParams& params, Rng& rng);

CppnGenome mutate(const CppnGenome& genome, InnovationRegistry& registry, const NeatParams& params, Rng& rng);

// Largest-remainder apportionment of `total` slots proportional to `scores`;
// equal split when every score is zero.
std::vector<int> allocate_offspring(std::span<const double> scores, int total);

struct NeatPopulation {
    std::vector<CppnGenome> genomes;
    SpeciesState species;
    InnovationRegistry registry;
    int generation = 0;
};

NeatPopulation seed_population(const NeatParams& params, Rng& rng);

struct GenerationReport {
    bool reseeded = false; // every genome was infeasible
    int species_count = 0;
    int removed_stagnant = 0;
};

// Replaces `pop.genomes` with the next generation. Infeasible genomes get
// fitness 0 and never reproduce.
GenerationReport next_generation(NeatPopulation& pop, std::span<const double> fitness,
                                 std::span<const std::uint8_t> feasible, const NeatParams& params, Rng& rng);

} // namespace voxnox
