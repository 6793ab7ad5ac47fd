#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxnox/lattice.hpp"
#include "voxnox/random.hpp"

namespace voxnox {

enum class NodeKind : std::uint8_t { input, hidden, output };

enum class Activation : std::uint8_t { sigmoid, tanh, sine, gaussian, abs };

inline constexpr std::array<Activation, 5> kActivations = {
    Activation::sigmoid, Activation::tanh, Activation::sine, Activation::gaussian, Activation::abs};

double activate(Activation a, double x);

struct NodeGene {
    int id = 0;
    NodeKind kind = NodeKind::hidden;
    Activation activation = Activation::sigmoid;
    bool operator==(const NodeGene&) const = default;
};

struct ConnectionGene {
    int innovation = 0;
    int from = 0;
    int to = 0;
    double weight = 0.0;
    bool enabled = true;
    bool operator==(const ConnectionGene&) const = default;
};

// Inputs x, y, z, r = sqrt(x^2 + z^2), bias take ids 0..4; the output is id 5.
// Hidden ids come from the population's innovation registry.
inline constexpr int kInputCount = 5;
inline constexpr int kOutputId = 5;
inline constexpr int kFirstHiddenId = 6;

struct CppnGenome {
    std::vector<NodeGene> nodes;
    std::vector<ConnectionGene> connections;
    double fitness = 0.0;
    int generation = 0;

    const NodeGene* find_node(int id) const;
    const ConnectionGene* find_connection(int innovation) const;
    bool structurally_equal(const CppnGenome& other) const;
};

// Node ids in an evaluation order over all connections (enabled or not);
// nullopt if the graph has a directed cycle.
std::optional<std::vector<int>> topological_order(const CppnGenome& genome);
bool is_acyclic(const CppnGenome& genome);

// Would adding from -> to close a cycle?
bool creates_cycle(const CppnGenome& genome, int from, int to);

// Throws Error(cyclic_genome) if the genome has a cycle, Error(invalid_argument)
// if the fixed input/output layout is broken.
void validate_genome(const CppnGenome& genome);

// Compiled form for repeated queries.
class CppnNetwork {
public:
    explicit CppnNetwork(const CppnGenome& genome);
    double evaluate(double x, double y, double z) const;

private:
    struct Link {
        int source;
        double weight;
    };
    struct Step {
        int slot;
        Activation activation;
        std::vector<Link> links;
    };
    int slot_count_ = 0;
    int output_slot_ = 0;
    std::vector<Step> steps_;
};

double eval_network(const CppnGenome& genome, double x, double y, double z);

BooleanLattice generate_hull(const CppnGenome& genome, Dims dims);

// Fully connected inputs -> output, weights Uniform(-1, 1), no hidden nodes.
CppnGenome seed_genome(std::uint64_t rng_seed);
CppnGenome seed_genome(Rng& rng);

nlohmann::json genome_to_json(const CppnGenome& genome);
CppnGenome genome_from_json(const nlohmann::json& j);

} // namespace voxnox
