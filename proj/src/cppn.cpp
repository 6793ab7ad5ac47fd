#include "voxnox/cppn.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

namespace voxnox {

double activate(Activation a, double x) {
    switch (a) {
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::tanh: return std::tanh(x);
    case Activation::sine: return std::sin(x);
    case Activation::gaussian: return std::exp(-x * x);
    case Activation::abs: return std::fabs(x);
    }
    return x;
}

const NodeGene* CppnGenome::find_node(int id) const {
    for (const auto& n : nodes)
        if (n.id == id)
            return &n;
    return nullptr;
}

const ConnectionGene* CppnGenome::find_connection(int innovation) const {
    for (const auto& c : connections)
        if (c.innovation == innovation)
            return &c;
    return nullptr;
}

bool CppnGenome::structurally_equal(const CppnGenome& other) const {
    auto nodes_a = nodes, nodes_b = other.nodes;
    auto conns_a = connections, conns_b = other.connections;
    auto by_id = [](const NodeGene& l, const NodeGene& r) { return l.id < r.id; };
    auto by_innov = [](const ConnectionGene& l, const ConnectionGene& r) { return l.innovation < r.innovation; };
    std::sort(nodes_a.begin(), nodes_a.end(), by_id);
    std::sort(nodes_b.begin(), nodes_b.end(), by_id);
    std::sort(conns_a.begin(), conns_a.end(), by_innov);
    std::sort(conns_b.begin(), conns_b.end(), by_innov);
    return nodes_a == nodes_b && conns_a == conns_b;
}

std::optional<std::vector<int>> topological_order(const CppnGenome& genome) {
    std::map<int, int> indegree;
    std::map<int, std::vector<int>> successors;
    for (const auto& n : genome.nodes)
        indegree[n.id] = 0;
    for (const auto& c : genome.connections) {
        indegree[c.from];
        ++indegree[c.to];
        successors[c.from].push_back(c.to);
    }
    // Kahn's algorithm, smallest ready id first for a stable order.
    std::set<int> ready;
    for (const auto& [id, deg] : indegree)
        if (deg == 0)
            ready.insert(id);
    std::vector<int> order;
    order.reserve(indegree.size());
    while (!ready.empty()) {
        const int id = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(id);
        for (int s : successors[id])
            if (--indegree[s] == 0)
                ready.insert(s);
    }
    if (order.size() != indegree.size())
        return std::nullopt;
    return order;
}

bool is_acyclic(const CppnGenome& genome) { return topological_order(genome).has_value(); }

bool creates_cycle(const CppnGenome& genome, int from, int to) {
    if (from == to)
        return true;
    // A cycle appears iff `from` is already reachable from `to`.
    std::unordered_map<int, std::vector<int>> successors;
    for (const auto& c : genome.connections)
        successors[c.from].push_back(c.to);
    std::vector<int> stack{to};
    std::set<int> seen{to};
    while (!stack.empty()) {
        const int n = stack.back();
        stack.pop_back();
        if (n == from)
            return true;
        for (int s : successors[n])
            if (seen.insert(s).second)
                stack.push_back(s);
    }
    return false;
}

void validate_genome(const CppnGenome& genome) {
    for (int id = 0; id < kInputCount; ++id) {
        const NodeGene* n = genome.find_node(id);
        if (!n || n->kind != NodeKind::input)
            throw Error(ErrorCode::invalid_argument, "genome is missing input node " + std::to_string(id));
    }
    const NodeGene* out = genome.find_node(kOutputId);
    if (!out || out->kind != NodeKind::output || out->activation != Activation::sigmoid)
        throw Error(ErrorCode::invalid_argument, "genome output node must be a sigmoid with id 5");
    std::set<int> ids;
    for (const auto& n : genome.nodes) {
        if (!ids.insert(n.id).second)
            throw Error(ErrorCode::invalid_argument, "duplicate node id " + std::to_string(n.id));
        if (n.kind == NodeKind::input && n.id >= kInputCount)
            throw Error(ErrorCode::invalid_argument, "unexpected input node " + std::to_string(n.id));
        if (n.kind == NodeKind::output && n.id != kOutputId)
            throw Error(ErrorCode::invalid_argument, "unexpected output node " + std::to_string(n.id));
    }
    std::set<int> innovations;
    for (const auto& c : genome.connections) {
        if (!innovations.insert(c.innovation).second)
            throw Error(ErrorCode::invalid_argument, "duplicate innovation " + std::to_string(c.innovation));
        if (!ids.count(c.from) || !ids.count(c.to))
            throw Error(ErrorCode::invalid_argument,
                        "connection " + std::to_string(c.innovation) + " references a missing node");
        const NodeGene* target = genome.find_node(c.to);
        if (target->kind == NodeKind::input)
            throw Error(ErrorCode::invalid_argument, "connection into input node " + std::to_string(c.to));
    }
    if (!is_acyclic(genome))
        throw Error(ErrorCode::cyclic_genome, "genome contains a directed cycle");
}

CppnNetwork::CppnNetwork(const CppnGenome& genome) {
    validate_genome(genome);
    const auto order = *topological_order(genome);
    std::unordered_map<int, int> slot;
    for (int id = 0; id < kInputCount; ++id)
        slot[id] = id;
    slot_count_ = kInputCount;
    for (int id : order)
        if (!slot.count(id))
            slot[id] = slot_count_++;
    output_slot_ = slot.at(kOutputId);

    std::unordered_map<int, std::vector<Link>> incoming;
    for (const auto& c : genome.connections)
        if (c.enabled)
            incoming[c.to].push_back({slot.at(c.from), c.weight});
    for (int id : order) {
        const NodeGene* n = genome.find_node(id);
        if (n->kind == NodeKind::input)
            continue;
        steps_.push_back({slot.at(id), n->activation, incoming[id]});
    }
}

double CppnNetwork::evaluate(double x, double y, double z) const {
    std::vector<double> values(std::size_t(slot_count_), 0.0);
    values[0] = x;
    values[1] = y;
    values[2] = z;
    values[3] = std::sqrt(x * x + z * z);
    values[4] = 1.0;
    for (const auto& step : steps_) {
        double sum = 0.0;
        for (const auto& l : step.links)
            sum += l.weight * values[std::size_t(l.source)];
        values[std::size_t(step.slot)] = activate(step.activation, sum);
    }
    return values[std::size_t(output_slot_)];
}

double eval_network(const CppnGenome& genome, double x, double y, double z) {
    return CppnNetwork(genome).evaluate(x, y, z);
}

namespace {
double normalized(int i, int dim) { return dim > 1 ? 2.0 * i / double(dim - 1) - 1.0 : 0.0; }
} // namespace

BooleanLattice generate_hull(const CppnGenome& genome, Dims dims) {
    const CppnNetwork net(genome);
    BooleanLattice hull(dims, 0);
    for (int j = 0; j < dims.y; ++j)
        for (int k = 0; k < dims.z; ++k)
            for (int i = 0; i < dims.x; ++i)
                hull.at(i, j, k) =
                    net.evaluate(normalized(i, dims.x), normalized(j, dims.y), normalized(k, dims.z)) > 0.5;
    return hull;
}

CppnGenome seed_genome(Rng& rng) {
    CppnGenome g;
    for (int id = 0; id < kInputCount; ++id)
        g.nodes.push_back({id, NodeKind::input, Activation::sigmoid});
    g.nodes.push_back({kOutputId, NodeKind::output, Activation::sigmoid});
    for (int id = 0; id < kInputCount; ++id)
        g.connections.push_back({id, id, kOutputId, uniform(rng, -1.0, 1.0), true});
    return g;
}

CppnGenome seed_genome(std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    return seed_genome(rng);
}

namespace {

const char* kind_name(NodeKind k) {
    switch (k) {
    case NodeKind::input: return "input";
    case NodeKind::hidden: return "hidden";
    case NodeKind::output: return "output";
    }
    return "hidden";
}

const char* activation_name(Activation a) {
    switch (a) {
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::sine: return "sine";
    case Activation::gaussian: return "gaussian";
    case Activation::abs: return "abs";
    }
    return "sigmoid";
}

NodeKind kind_from(const std::string& s) {
    if (s == "input")
        return NodeKind::input;
    if (s == "hidden")
        return NodeKind::hidden;
    if (s == "output")
        return NodeKind::output;
    throw Error(ErrorCode::format, "genome: unknown node kind '" + s + "'");
}

Activation activation_from(const std::string& s) {
    for (Activation a : kActivations)
        if (s == activation_name(a))
            return a;
    throw Error(ErrorCode::format, "genome: unknown activation '" + s + "'");
}

} // namespace

nlohmann::json genome_to_json(const CppnGenome& genome) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : genome.nodes)
        nodes.push_back({{"id", n.id}, {"kind", kind_name(n.kind)}, {"activation", activation_name(n.activation)}});
    nlohmann::json conns = nlohmann::json::array();
    for (const auto& c : genome.connections)
        conns.push_back({{"innovation", c.innovation},
                         {"from", c.from},
                         {"to", c.to},
                         {"weight", c.weight},
                         {"enabled", c.enabled}});
    return {{"nodes", nodes}, {"connections", conns}, {"generation", genome.generation}, {"novelty", genome.fitness}};
}

CppnGenome genome_from_json(const nlohmann::json& j) {
    CppnGenome g;
    try {
        for (const auto& n : j.at("nodes"))
            g.nodes.push_back({n.at("id").get<int>(), kind_from(n.at("kind").get<std::string>()),
                               activation_from(n.at("activation").get<std::string>())});
        for (const auto& c : j.at("connections"))
            g.connections.push_back({c.at("innovation").get<int>(), c.at("from").get<int>(), c.at("to").get<int>(),
                                     c.at("weight").get<double>(), c.at("enabled").get<bool>()});
        g.generation = j.at("generation").get<int>();
        g.fitness = j.at("novelty").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::format, std::string("genome: ") + e.what());
    }
    validate_genome(g);
    return g;
}

} // namespace voxnox
